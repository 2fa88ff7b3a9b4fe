from .pool_spec import PoolSpec, TRAIN_MODES, TEST_MODES, ALL_DROPPED
from .region_distribution import (
    RegionDistribution,
    region_distribution_maxdrop,
    region_distribution_stochastic,
    sample_pooled_activation,
    enumerate_mask_distribution,
    enumerated_expectation
)
from .pool_layers import (
    max_pool,
    max_pool_dropout_forward,
    max_pool_dropout_multinomial_forward,
    prob_weighted_pool,
    scaled_max_pool,
    stochastic_pool_forward,
    stochastic_pool_test,
    pool_forward_replay,
    pool_backward,
    pool_train_forward,
    pool_test_forward
)
