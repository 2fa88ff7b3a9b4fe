from dataclasses import dataclass, field, replace
from typing import Optional, Tuple
from core.dropout import DropoutPlacement
from core.errors import ConfigError
from pooling.pool_spec import TRAIN_MODES, TEST_MODES
import numpy as np

DTYPES = ('float64', 'float32')

def default_lr_drop_epochs(epochs: int) -> Tuple[int, ...]:
    '''
    Drop the learning rate at 50% and 75% of the run. Runs shorter than
    three epochs have no room for two distinct drops and keep a flat rate.
    '''
    first, second = int(0.5 * epochs), int(0.75 * epochs)
    if epochs < 3 or not 0 < first < second < epochs:
        return ()
    return (first, second)

@dataclass(frozen=True)
class TrainConfig:
    '''
    Optimizer hyperparameters, schedule, seed, dropout placement and
    pooling modes of one training run.

    Attributes:
        epochs: Number of passes over the training set.
        batch_size: Mini-batch size; the last batch of an epoch may be smaller.
        momentum: mu in v <- mu*v - lr*grad.
        learning_rate: Initial learning rate, divided by ten at each drop epoch.
        lr_drop_epochs: Epochs at which the rate drops; None picks the default.
        seed: Experiment seed from which every random draw is derived.
        dtype: 'float64' or 'float32'.
        init_std: Standard deviation of the Gaussian weight initialisation.
        dropout: Dropout sites and retain probabilities.
        pool_train_mode: 'max', 'max_dropout' or 'stochastic'.
        pool_test_mode: Default test-time pooling.
        multinomial_path: Sample max-pooling dropout per window from the
            multinomial instead of drawing an input mask.
    '''
    epochs: int = 30
    batch_size: int = 100
    momentum: float = 0.95
    learning_rate: float = 0.1
    lr_drop_epochs: Optional[Tuple[int, ...]] = None
    seed: int = 0
    dtype: str = 'float64'
    init_std: float = 0.1
    dropout: DropoutPlacement = field(default_factory=DropoutPlacement)
    pool_train_mode: str = 'max'
    pool_test_mode: str = 'max'
    multinomial_path: bool = False

    def __post_init__(self):
        if self.lr_drop_epochs is None:
            object.__setattr__(self, 'lr_drop_epochs', default_lr_drop_epochs(self.epochs))
        else:
            object.__setattr__(self, 'lr_drop_epochs', tuple(int(epoch) for epoch in self.lr_drop_epochs))
        self.validate()

    def validate(self):
        if not isinstance(self.epochs, (int, np.integer)) or self.epochs < 1:
            raise ConfigError(f'"epochs" must be a positive integer, got {self.epochs!r}')
        if not isinstance(self.batch_size, (int, np.integer)) or self.batch_size < 1:
            raise ConfigError(f'"batch_size" must be a positive integer, got {self.batch_size!r}')
        if not self.learning_rate >= 0.0:
            raise ConfigError(f'"learning_rate" must not be negative, got {self.learning_rate}')
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f'"momentum" must lie in [0, 1), got {self.momentum}')
        drops = self.lr_drop_epochs
        if any(later <= earlier for earlier, later in zip(drops, drops[1:])):
            raise ConfigError(f'"lr_drop_epochs" must be strictly increasing, got {list(drops)}')
        if any(epoch < 1 or epoch >= self.epochs for epoch in drops):
            raise ConfigError(f'"lr_drop_epochs" must lie in [1, {self.epochs}), got {list(drops)}')
        if not 0 <= self.seed < (1 << 64):
            raise ConfigError(f'"seed" must be a 64-bit unsigned integer, got {self.seed}')
        if self.dtype not in DTYPES:
            raise ConfigError(f'Unknown dtype "{self.dtype}". Options: {", ".join(DTYPES)}')
        if not self.init_std > 0.0:
            raise ConfigError(f'"init_std" must be positive, got {self.init_std}')
        if self.pool_train_mode not in TRAIN_MODES:
            raise ConfigError(f'Unknown pooling train mode "{self.pool_train_mode}". Options: {", ".join(TRAIN_MODES)}')
        if self.pool_test_mode not in TEST_MODES:
            raise ConfigError(f'Unknown pooling test mode "{self.pool_test_mode}". Options: {", ".join(TEST_MODES)}')
        if self.pool_train_mode != 'max_dropout' and self.dropout.pool_input < 1.0:
            raise ConfigError(
                f'Pooling dropout (pool_input={self.dropout.pool_input}) needs pooling train mode '
                f'"max_dropout", got "{self.pool_train_mode}"'
            )

    @property
    def np_dtype(self) -> np.dtype:
        return np.dtype(self.dtype)

    @property
    def pool_retain_p(self) -> float:
        return self.dropout.pool_input if self.pool_train_mode == 'max_dropout' else 1.0

    def learning_rate_at(self, epoch: int) -> float:
        '''
        Learning rate of a 0-based epoch: divided by ten once per drop
        epoch already reached.
        '''
        drops = sum(1 for drop in self.lr_drop_epochs if epoch >= drop)
        return self.learning_rate * (0.1 ** drops)

    def with_overrides(self, **changes) -> 'TrainConfig':
        if 'epochs' in changes and 'lr_drop_epochs' not in changes:
            changes['lr_drop_epochs'] = None
        return replace(self, **changes)
