from dataclasses import dataclass
from core.errors import ConfigError

TRAIN_MODES = ('max', 'max_dropout', 'stochastic')
TEST_MODES = ('max', 'scaled_max', 'prob_weighted', 'stochastic_weighted')

# Marks an output unit whose whole window was dropped; routes no gradient.
ALL_DROPPED = -1

@dataclass(frozen=True)
class PoolSpec:
    '''
    Configuration of one pooling layer.

    Attributes:
        window: Side of the square pooling region (t = window**2 units).
        stride: Step between regions.
        train_mode: 'max', 'max_dropout' or 'stochastic'.
        test_mode: 'max', 'scaled_max', 'prob_weighted' or 'stochastic_weighted'.
        retain_p: Retaining probability p for max-pooling dropout.
    '''
    window: int
    stride: int
    train_mode: str = 'max'
    test_mode: str = 'max'
    retain_p: float = 1.0

    def __post_init__(self):
        if self.window < 1 or self.stride < 1:
            raise ConfigError(f'Pooling window and stride must be positive, got {self.window}P{self.stride}')
        if self.stride > self.window:
            raise ConfigError(f'Pooling stride {self.stride} exceeds window {self.window}')
        if self.train_mode not in TRAIN_MODES:
            raise ConfigError(f'Unknown pooling train mode "{self.train_mode}". Options: {", ".join(TRAIN_MODES)}')
        if self.test_mode not in TEST_MODES:
            raise ConfigError(f'Unknown pooling test mode "{self.test_mode}". Options: {", ".join(TEST_MODES)}')
        if not 0.0 < self.retain_p <= 1.0:
            raise ConfigError(f'Retain probability must lie in (0, 1], got {self.retain_p}')

    @property
    def region_size(self) -> int:
        return self.window * self.window

    def output_side(self, side: int) -> int:
        return (side - self.window) // self.stride + 1

    def with_test_mode(self, test_mode: str) -> 'PoolSpec':
        return PoolSpec(self.window, self.stride, self.train_mode, test_mode, self.retain_p)
