from dataclasses import dataclass
from itertools import product
from core.errors import CountingError
import pandas as pd
import numpy as np
import math

MAXPOOL_DROPOUT = 'maxpool_dropout'
STOCHASTIC = 'stochastic'
CONV_DROPOUT = 'conv_dropout'
FC_DROPOUT = 'fc_dropout'

FLAVORS = (MAXPOOL_DROPOUT, STOCHASTIC, CONV_DROPOUT, FC_DROPOUT)
POOLING_FLAVORS = (MAXPOOL_DROPOUT, STOCHASTIC)

@dataclass(frozen=True)
class CountQuery:
    '''
    Geometry of one layer for model counting.

    Attributes:
        r: Number of feature maps.
        s: Units per feature map for the pooling and fully-connected flavors;
            feature map side for conv_dropout.
        t: Pooling region size in units (window**2), or filter side for conv_dropout.
        flavor: One of FLAVORS.
    '''
    r: int
    s: int
    t: int
    flavor: str

    def __post_init__(self):
        for name in ('r', 's', 't'):
            value = getattr(self, name)
            if not isinstance(value, (int, np.integer)) or value < 1:
                raise CountingError(f'"{name}" must be a positive integer, got {value!r}')
        if self.flavor not in FLAVORS:
            raise CountingError(f'Unknown counting flavor "{self.flavor}". Options: {", ".join(FLAVORS)}')

    @property
    def region_count(self) -> int:
        return self.r * self.s // self.t

def _check_pooling_geometry(q: CountQuery):
    if (q.r * q.s) % q.t != 0:
        raise CountingError(
            f'r*s = {q.r * q.s} is not divisible by t = {q.t}; the model count assumes '
            'non-overlapping pooling regions that tile the feature maps'
        )

def log_model_count(q: CountQuery) -> float:
    '''
    Natural log of the number of possibly trained models at one layer.

    maxpool_dropout: (rs/t) ln(1 + t), every region has t + 1 outcomes.
    stochastic: (rs/t) ln t, every region has t outcomes.
    conv_dropout: r t^2 (s - t + 1)^2 ln 2, every convolved feature sees 2^(t*t) masks.
    fc_dropout: r s ln 2, one binary choice per unit.

    Raises:
        CountingError: For pooling geometries that do not tile, or filters
            wider than the feature map.
    '''
    if q.flavor in POOLING_FLAVORS:
        _check_pooling_geometry(q)
        choices = q.t + 1 if q.flavor == MAXPOOL_DROPOUT else q.t
        return q.region_count * math.log(choices)
    if q.flavor == CONV_DROPOUT:
        if q.t > q.s:
            raise CountingError(f'Filter side {q.t} exceeds feature map side {q.s}')
        return q.r * q.t ** 2 * (q.s - q.t + 1) ** 2 * math.log(2.0)
    return q.r * q.s * math.log(2.0)

def base_b(t: int, flavor: str) -> float:
    '''
    Per-unit growth factor of the model count: (1 + t)^(1/t) for max-pooling
    dropout, t^(1/t) for stochastic pooling, 2 for fully-connected dropout.
    '''
    if t < 1:
        raise CountingError(f'Region size must be at least 1, got {t}')
    if flavor == MAXPOOL_DROPOUT:
        return (1.0 + t) ** (1.0 / t)
    if flavor == STOCHASTIC:
        return float(t) ** (1.0 / t)
    if flavor == FC_DROPOUT:
        return 2.0
    raise CountingError(f'No per-unit base is defined for flavor "{flavor}"')

def log_count_ratio(q_maxdrop: CountQuery, q_stoch: CountQuery) -> float:
    '''
    Natural log of how many times more models max-pooling dropout can
    train than stochastic pooling on the same geometry: (rs/t) ln((1 + t)/t).
    '''
    if q_maxdrop.flavor != MAXPOOL_DROPOUT or q_stoch.flavor != STOCHASTIC:
        raise CountingError(f'Expected a ({MAXPOOL_DROPOUT}, {STOCHASTIC}) pair, got ({q_maxdrop.flavor}, {q_stoch.flavor})')
    if (q_maxdrop.r, q_maxdrop.s, q_maxdrop.t) != (q_stoch.r, q_stoch.s, q_stoch.t):
        raise CountingError(
            f'Mismatched geometry: r,s,t = {(q_maxdrop.r, q_maxdrop.s, q_maxdrop.t)} '
            f'vs {(q_stoch.r, q_stoch.s, q_stoch.t)}'
        )
    _check_pooling_geometry(q_maxdrop)
    return q_maxdrop.region_count * math.log1p(1.0 / q_maxdrop.t)

def enumerate_model_count(q: CountQuery, limit: int = 1 << 20) -> int:
    '''
    Count distinct per-region (or per-unit) choice combinations by brute
    force. Only meant for tiny geometries.
    '''
    if q.flavor in POOLING_FLAVORS:
        _check_pooling_geometry(q)
        slots = q.region_count
        choices = range(q.t + 1) if q.flavor == MAXPOOL_DROPOUT else range(q.t)
    elif q.flavor == CONV_DROPOUT:
        slots = q.r * (q.s - q.t + 1) ** 2
        choices = range(2 ** (q.t * q.t))
    else:
        slots = q.r * q.s
        choices = range(2)
    if len(choices) ** slots > limit:
        raise CountingError(f'{len(choices)}^{slots} combinations exceed the enumeration limit {limit}')
    return sum(1 for _ in product(choices, repeat=slots))

class ModelCountAnalyzer:
    '''
    Tables behind the model-count comparison: bases b(t) for a range of
    region sizes, and log counts with their ratio for one layer geometry.
    '''

    def get_base_table(self, t_max: int = 64) -> pd.DataFrame:
        rows = []
        for t in range(1, t_max + 1):
            maxdrop = base_b(t, MAXPOOL_DROPOUT)
            stochastic = base_b(t, STOCHASTIC)
            rows.append({
                't': t,
                'b_maxpool_dropout': maxdrop,
                'b_stochastic': stochastic,
                'difference': maxdrop - stochastic
            })
        return pd.DataFrame(rows)

    def get_count_summary(self, r: int, s: int, t: int) -> pd.DataFrame:
        maxdrop = CountQuery(r, s, t, MAXPOOL_DROPOUT)
        stochastic = CountQuery(r, s, t, STOCHASTIC)
        fully_connected = CountQuery(r, s, 1, FC_DROPOUT)
        rows = []
        for label, value in (
            ('ln C maxpool_dropout', log_model_count(maxdrop)),
            ('ln C stochastic', log_model_count(stochastic)),
            ('ln C fc_dropout', log_model_count(fully_connected)),
            ('ln epsilon', log_count_ratio(maxdrop, stochastic))
        ):
            rows.append({'quantity': label, 'ln': value, 'log10': value / math.log(10.0)})
        return pd.DataFrame(rows)

    def get_conv_summary(self, r: int, side: int, filter_side: int) -> pd.DataFrame:
        value = log_model_count(CountQuery(r, side, filter_side, CONV_DROPOUT))
        return pd.DataFrame([{'quantity': 'ln C conv_dropout', 'ln': value, 'log10': value / math.log(10.0)}])

    def get_stochastic_peak(self, t_max: int = 64) -> int:
        table = self.get_base_table(t_max)
        return int(table.loc[table['b_stochastic'].idxmax(), 't'])
