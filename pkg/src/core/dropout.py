from dataclasses import dataclass
from typing import Optional, Tuple
from core.errors import ConfigError, ShapeError
from core.random_stream import RandomStream, per_example_uniforms
import numpy as np

@dataclass(frozen=True)
class DropoutPlacement:
    '''
    Where dropout is applied at training time, each site with its own
    retaining probability. A probability of 1 switches the site off.

    Attributes:
        conv_input: Retain probability on the input of convolutional layers.
        pool_input: Retain probability on the input of max-pooling layers
            (max-pooling dropout).
        fc_input: Retain probability on the input of fully-connected layers
            after the first one.
        first_fc_input: Retain probability on the input of the first
            fully-connected layer.
        input_image: Whether conv dropout also touches the raw image fed to
            the first convolutional layer.
    '''
    conv_input: float = 1.0
    pool_input: float = 1.0
    fc_input: float = 1.0
    first_fc_input: float = 1.0
    input_image: bool = False

    def __post_init__(self):
        for name in ('conv_input', 'pool_input', 'fc_input', 'first_fc_input'):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise ConfigError(f'Dropout retain probability "{name}" must lie in (0, 1], got {value}')

    @classmethod
    def from_flags(cls, conv: bool = False, pool: bool = False, fc: bool = False, retain_p: float = 0.5, first_fc_retain_p: float = 0.8, input_image: bool = False) -> 'DropoutPlacement':
        '''
        Build a placement from on/off flags using the default probabilities
        (0.5 everywhere, 0.8 for the first fully-connected layer).
        '''
        return cls(
            conv_input=retain_p if conv else 1.0,
            pool_input=retain_p if pool else 1.0,
            fc_input=retain_p if fc else 1.0,
            first_fc_input=first_fc_retain_p if fc else 1.0,
            input_image=input_image
        )

    def describe(self) -> str:
        sites = []
        if self.conv_input < 1.0:
            sites.append('conv')
        if self.pool_input < 1.0:
            sites.append('pool')
        if self.fc_input < 1.0 or self.first_fc_input < 1.0:
            sites.append('fc')
        return '+'.join(sites) if sites else 'none'

def dropout_train(inputs: np.ndarray, retain_p: float, stream: RandomStream, example_indices: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    '''
    Multiply the input by an i.i.d. Bernoulli(retain_p) mask.

    Args:
        inputs: Activations; the first axis is the batch when
            example_indices is given.
        retain_p: Retaining probability in (0, 1].
        stream: Stream of this dropout site.
        example_indices: Dataset index per batch row; each row's mask then
            comes from its own counter and does not depend on the batching.

    Returns:
        (masked, mask) with mask as a boolean array of the input's shape.
    '''
    if not 0.0 < retain_p <= 1.0:
        raise ConfigError(f'Retain probability must lie in (0, 1], got {retain_p}')
    if example_indices is None:
        mask = stream.bernoulli(inputs.shape, retain_p)
    else:
        if len(example_indices) != inputs.shape[0]:
            raise ShapeError(f'{len(example_indices)} example indices for a batch of {inputs.shape[0]}')
        mask = per_example_uniforms(stream, example_indices, inputs.shape[1:]) < retain_p
    return apply_mask(inputs, mask), mask

def apply_mask(inputs: np.ndarray, mask: np.ndarray) -> np.ndarray:
    if mask.shape != inputs.shape:
        raise ShapeError(f'Mask shape {mask.shape} does not match input {inputs.shape}')
    if mask.all():
        return inputs.copy()
    return inputs * mask

def dropout_backward(grad_out: np.ndarray, mask: np.ndarray) -> np.ndarray:
    if mask.shape != grad_out.shape:
        raise ShapeError(f'Mask shape {mask.shape} does not match gradient {grad_out.shape}')
    return grad_out * mask

def dropout_test_scale(inputs: np.ndarray, retain_p: float) -> np.ndarray:
    '''
    Test-time model averaging: scale activations by the retaining probability,
    equivalent to scaling the outgoing weights of the consuming linear map.
    '''
    if retain_p == 1.0:
        return inputs
    return inputs * retain_p
