'''
Selection distributions of a single pooling region, and the exhaustive
mask enumeration that checks them.
'''
from dataclasses import dataclass
from typing import Dict, Optional, Sequence, Union
from core.errors import EnumerationError, NegativeActivationError
from core.random_stream import RandomStream
import numpy as np

MAX_DROPOUT = 'max_dropout'
STOCHASTIC = 'stochastic'

MAX_ENUMERATION_UNITS = 20
ENUMERATION_CHUNK = 1 << 14

@dataclass(frozen=True)
class RegionDistribution:
    '''
    Outcome distribution of one pooling region.

    Attributes:
        acts: Region activations. Non-decreasing for the max-dropout flavor
            (stable on ties); original window order for the stochastic flavor.
        probs: (p_0, p_1, ..., p_n); p_0 is the all-dropped outcome with
            pooled value 0, and is always 0 for the stochastic flavor.
        order: Original window position of each entry of `acts`.
        flavor: 'max_dropout' or 'stochastic'.
    '''
    acts: np.ndarray
    probs: np.ndarray
    order: np.ndarray
    flavor: str

    @property
    def selection_probs(self) -> np.ndarray:
        return self.probs[1:]

    @property
    def outcome_values(self) -> np.ndarray:
        return np.concatenate(([0.0], self.acts))

    def expected_value(self) -> float:
        return float(np.dot(self.probs[1:], self.acts))

    def value_distribution(self) -> Dict[float, float]:
        '''
        Probability mass per pooled value, with tied values aggregated.
        '''
        return _aggregate(self.outcome_values, self.probs)

def _aggregate(values: np.ndarray, masses: np.ndarray) -> Dict[float, float]:
    unique, inverse = np.unique(values, return_inverse=True)
    totals = np.bincount(inverse.ravel(), weights=masses, minlength=unique.size)
    return {float(value): float(mass) for value, mass in zip(unique, totals) if mass > 0.0}

def _validated(acts: Sequence[float]) -> np.ndarray:
    values = np.asarray(acts, dtype=np.float64).ravel()
    if values.size < 1:
        raise ValueError('A pooling region needs at least one activation')
    if np.any(values < 0):
        raise NegativeActivationError(f'Pooling region holds negative activations: {values[values < 0]}')
    return values

def region_distribution_maxdrop(acts: Sequence[float], retain_p: float) -> RegionDistribution:
    '''
    Distribution of the pooled value under max-pooling dropout.

    Unit i of the sorted region is the output when it is retained and all
    stronger units are dropped: p_i = p * q**(n - i); everything dropped has
    probability p_0 = q**n.

    Args:
        acts: n >= 1 non-negative activations.
        retain_p: Retaining probability p in (0, 1].

    Returns:
        A RegionDistribution with sorted activations.
    '''
    if not 0.0 < retain_p <= 1.0:
        raise ValueError(f'Retain probability must lie in (0, 1], got {retain_p}')
    values = _validated(acts)
    order = np.argsort(values, kind='stable')
    n = values.size
    drop_p = 1.0 - retain_p
    ranks = np.arange(1, n + 1)
    probs = np.empty(n + 1, dtype=np.float64)
    probs[0] = drop_p ** n
    probs[1:] = retain_p * drop_p ** (n - ranks)
    return RegionDistribution(values[order], probs, order, MAX_DROPOUT)

def region_distribution_stochastic(acts: Sequence[float]) -> RegionDistribution:
    '''
    Distribution used by stochastic pooling: p_i = a_i / sum(a).

    An all-zero region has no defined normalisation; it gets uniform
    probabilities, and its pooled value is 0 whichever unit is drawn.
    '''
    values = _validated(acts)
    n = values.size
    total = values.sum()
    probs = np.zeros(n + 1, dtype=np.float64)
    if total > 0.0:
        probs[1:] = values / total
    else:
        probs[1:] = 1.0 / n
    return RegionDistribution(values, probs, np.arange(n), STOCHASTIC)

def sample_pooled_activation(dist: RegionDistribution, stream: RandomStream, size: Optional[int] = None) -> Union[float, np.ndarray]:
    '''
    Draw the pooled value: a_i with probability p_i, 0 with probability p_0.

    Args:
        dist: Region distribution.
        stream: Source of randomness.
        size: Number of independent draws; None for a single scalar.
    '''
    uniforms = stream.uniform(1 if size is None else size)
    cdf = np.cumsum(dist.probs)
    outcomes = np.minimum(np.searchsorted(cdf, uniforms, side='right'), dist.probs.size - 1)
    values = dist.outcome_values[outcomes]
    return float(values[0]) if size is None else values

def enumerate_mask_distribution(acts: Sequence[float], retain_p: float) -> Dict[float, float]:
    '''
    Exact distribution of max-over-retained by walking all 2**n masks.

    Every mask is weighted by p**retained * q**dropped; a mask that drops
    every unit pools to 0.

    Args:
        acts: n <= 20 activations.
        retain_p: Retaining probability.

    Returns:
        Mapping pooled value -> probability mass (ties aggregated).

    Raises:
        EnumerationError: If n exceeds 20.
    '''
    values = np.asarray(acts, dtype=np.float64).ravel()
    n = values.size
    if n > MAX_ENUMERATION_UNITS:
        raise EnumerationError(f'Mask enumeration is limited to {MAX_ENUMERATION_UNITS} units, got {n}')
    if n < 1:
        raise ValueError('A pooling region needs at least one activation')
    totals: Dict[float, float] = {}
    bits = np.arange(n)
    total_masks = 2 ** n
    # Bounded memory: at most ENUMERATION_CHUNK masks are materialised at once.
    for start in range(0, total_masks, ENUMERATION_CHUNK):
        codes = np.arange(start, min(start + ENUMERATION_CHUNK, total_masks))
        masks = ((codes[:, np.newaxis] >> bits) & 1).astype(bool)
        retained = masks.sum(axis=1)
        weights = retain_p ** retained * (1.0 - retain_p) ** (n - retained)
        pooled = np.where(masks, values, -np.inf).max(axis=1)
        pooled[retained == 0] = 0.0
        for value, mass in _aggregate(pooled, weights).items():
            totals[value] = totals.get(value, 0.0) + mass
    return totals

def enumerated_expectation(acts: Sequence[float], retain_p: float) -> float:
    distribution = enumerate_mask_distribution(acts, retain_p)
    return float(sum(value * mass for value, mass in distribution.items()))
