from dataclasses import dataclass
from typing import Tuple
import numpy as np

# Domain tags used as the first spawn key, so that independent consumers
# of one experiment seed never share draws.
INIT_DOMAIN = 0
SHUFFLE_DOMAIN = 1
TRAINING_DOMAIN = 2
DROPOUT_DOMAIN = 3
POOLING_DOMAIN = 4
ORACLE_DOMAIN = 5

_UINT64_MASK = (1 << 64) - 1

@dataclass(frozen=True)
class RandomStream:
    '''
    Counter-based random stream on top of numpy's Philox generator.

    The (seed, counter) pair fully determines every draw: the seed is the
    Philox key and the counter selects the block the draws start from.
    Streams never mutate; `at` and `spawn` return new streams.

    Attributes:
        seed: 64-bit key.
        counter: 64-bit block counter.
    '''
    seed: int
    counter: int = 0

    def __post_init__(self):
        if not 0 <= self.seed <= _UINT64_MASK:
            raise ValueError(f'Seed must be a 64-bit unsigned integer, got {self.seed}')
        if not 0 <= self.counter <= _UINT64_MASK:
            raise ValueError(f'Counter must be a 64-bit unsigned integer, got {self.counter}')

    def generator(self) -> np.random.Generator:
        '''
        Build the numpy generator positioned at this stream's counter.

        The lowest Philox counter word is left at zero so that a long draw
        from one counter never runs into the block of the next counter.
        '''
        bit_generator = np.random.Philox(key=self.seed, counter=[0, self.counter, 0, 0])
        return np.random.Generator(bit_generator)

    def at(self, counter: int) -> 'RandomStream':
        return RandomStream(self.seed, counter & _UINT64_MASK)

    def spawn(self, *keys: int) -> 'RandomStream':
        '''
        Derive an independent child stream, e.g. per layer or per epoch.

        Args:
            keys: Non-negative integers naming the child (domain, epoch, layer...).

        Returns:
            A stream with a derived key and counter 0.
        '''
        sequence = np.random.SeedSequence(entropy=[self.seed, self.counter], spawn_key=tuple(int(k) for k in keys))
        child_seed = int(sequence.generate_state(1, dtype=np.uint64)[0])
        return RandomStream(child_seed, 0)

    def uniform(self, shape) -> np.ndarray:
        return self.generator().random(shape)

    def bernoulli(self, shape, p: float) -> np.ndarray:
        '''
        Boolean mask whose entries are True with probability p.
        '''
        if p >= 1.0:
            return np.ones(shape, dtype=bool)
        return self.generator().random(shape) < p

    def normal(self, shape, std: float) -> np.ndarray:
        return self.generator().normal(0.0, std, size=shape)

    def permutation(self, n: int) -> np.ndarray:
        return self.generator().permutation(n)

def per_example_uniforms(stream: RandomStream, example_indices: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    '''
    Draw one block of uniforms per example, keyed by the example's dataset
    index, so masks do not depend on how examples are batched.

    Args:
        stream: Stream already specialised to (domain, epoch, site).
        example_indices: Dataset indices of the examples in the batch.
        shape: Per-example shape.

    Returns:
        Array of shape (len(example_indices), *shape).
    '''
    draws = np.empty((len(example_indices),) + tuple(shape), dtype=np.float64)
    for row, example_index in enumerate(example_indices):
        draws[row] = stream.at(int(example_index)).uniform(shape)
    return draws
