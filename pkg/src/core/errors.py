class ShapeError(ValueError):
    '''
    Raised when tensor extents do not agree with what an operation expects.
    '''

class NonFiniteError(ArithmeticError):
    '''
    Raised when NaN or Inf shows up in the output of an operation.
    '''

class NegativeActivationError(ValueError):
    '''
    Raised when a pooling region holds a negative activation where the
    selection probabilities require non-negative inputs.
    '''

class ArchitectureError(ValueError):
    '''
    Raised for malformed architecture strings.

    Attributes:
        position: 0-based character offset of the offending token.
    '''

    def __init__(self, message: str, position: int):
        super().__init__(f'{message} (at position {position})')
        self.position = position

class ConfigError(ValueError):
    pass

class DataFormatError(ValueError):
    pass

class CountingError(ValueError):
    pass

class EnumerationError(ValueError):
    pass

class CheckpointError(ValueError):
    pass

class DivergenceError(RuntimeError):
    '''
    Raised when the training loss stops being finite.
    '''

    def __init__(self, epoch: int, batch: int, learning_rate: float, loss: float):
        super().__init__(
            f'Training diverged at epoch {epoch}, batch {batch}: loss={loss} '
            f'with learning rate {learning_rate}. Lower the learning rate or the momentum.'
        )
        self.epoch = epoch
        self.batch = batch
        self.learning_rate = learning_rate
        self.loss = loss
