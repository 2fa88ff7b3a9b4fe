from core.errors import EnumerationError, NegativeActivationError
from core.random_stream import RandomStream
from pooling.pool_layers import prob_weighted_pool
from pooling.pool_spec import PoolSpec
from pooling import region_distribution
from pooling.region_distribution import (
    region_distribution_maxdrop, region_distribution_stochastic, sample_pooled_activation,
    enumerate_mask_distribution, enumerated_expectation
)
import numpy as np
import pytest

REGION = (1.0, 6.0, 5.0, 3.0)

def assert_same_distribution(first, second, tolerance=1e-12):
    assert first.keys() == second.keys()
    for value in first:
        assert first[value] == pytest.approx(second[value], abs=tolerance)

def test_worked_region_probabilities():
    dist = region_distribution_maxdrop(REGION, 0.5)
    np.testing.assert_array_equal(dist.acts, [1.0, 3.0, 5.0, 6.0])
    np.testing.assert_allclose(dist.probs, [0.0625, 0.0625, 0.125, 0.25, 0.5], atol=1e-15)
    np.testing.assert_array_equal(dist.order, [0, 3, 2, 1])
    assert dist.expected_value() == pytest.approx(4.6875, abs=1e-12)

def test_full_retention_selects_the_maximum():
    dist = region_distribution_maxdrop(REGION, 1.0)
    np.testing.assert_array_equal(dist.probs, [0.0, 0.0, 0.0, 0.0, 1.0])

def test_single_unit_is_one_bernoulli():
    np.testing.assert_allclose(region_distribution_maxdrop([2.0], 0.3).probs, [0.7, 0.3], atol=1e-15)

def test_probabilities_sum_to_one(rng):
    for p in (0.1, 0.5, 0.9):
        assert region_distribution_maxdrop(rng.random(9), p).probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert region_distribution_stochastic(rng.random(9)).probs.sum() == pytest.approx(1.0, abs=1e-12)

def test_negative_activation_is_rejected():
    with pytest.raises(NegativeActivationError):
        region_distribution_maxdrop([1.0, -0.5], 0.5)
    with pytest.raises(NegativeActivationError):
        region_distribution_stochastic([1.0, -0.5])

def test_enumeration_of_the_worked_region():
    assert_same_distribution(enumerate_mask_distribution(REGION, 0.5), {6.0: 0.5, 5.0: 0.25, 3.0: 0.125, 1.0: 0.0625, 0.0: 0.0625})

def test_enumeration_aggregates_ties():
    assert_same_distribution(enumerate_mask_distribution([2.0, 2.0], 0.5), {2.0: 0.75, 0.0: 0.25})
    assert_same_distribution(enumerate_mask_distribution([1.0, 4.0, 2.0], 1.0), {4.0: 1.0})

def test_enumeration_limit():
    with pytest.raises(EnumerationError):
        enumerate_mask_distribution(np.ones(21), 0.5)

def test_enumeration_spanning_several_chunks(rng):
    acts = rng.uniform(0.0, 10.0, size=16)
    acts[3] = acts[11]
    assert_same_distribution(region_distribution_maxdrop(acts, 0.3).value_distribution(), enumerate_mask_distribution(acts, 0.3))

def test_chunk_boundaries_do_not_change_the_result(monkeypatch):
    whole = enumerate_mask_distribution(REGION + (2.0, 6.0), 0.4)
    monkeypatch.setattr(region_distribution, 'ENUMERATION_CHUNK', 3)
    assert_same_distribution(enumerate_mask_distribution(REGION + (2.0, 6.0), 0.4), whole)

@pytest.mark.parametrize('n', [2, 4, 9, 12])
@pytest.mark.parametrize('p', [0.1, 0.5, 0.9])
def test_closed_form_matches_mask_enumeration(rng, n, p):
    acts = rng.uniform(0.0, 10.0, size=n)
    assert_same_distribution(region_distribution_maxdrop(acts, p).value_distribution(), enumerate_mask_distribution(acts, p))
    assert region_distribution_maxdrop(acts, p).expected_value() == pytest.approx(enumerated_expectation(acts, p), abs=1e-12)

def test_tie_order_does_not_change_the_distribution():
    p = 0.4
    first = region_distribution_maxdrop([2.0, 5.0, 5.0, 1.0], p)
    second = region_distribution_maxdrop([5.0, 1.0, 2.0, 5.0], p)
    assert_same_distribution(first.value_distribution(), second.value_distribution())
    spec = PoolSpec(2, 2, 'max_dropout', 'prob_weighted', p)
    a = prob_weighted_pool(np.array([2.0, 5.0, 5.0, 1.0]).reshape(1, 2, 2), spec)
    b = prob_weighted_pool(np.array([5.0, 1.0, 2.0, 5.0]).reshape(1, 2, 2), spec)
    assert a[0, 0, 0] == pytest.approx(b[0, 0, 0], abs=1e-12)

def test_stochastic_probabilities():
    dist = region_distribution_stochastic(REGION)
    np.testing.assert_allclose(dist.selection_probs, np.array(REGION) / 15.0, atol=1e-15)
    assert dist.probs[0] == 0.0
    np.testing.assert_allclose(region_distribution_stochastic([2.0, 2.0, 2.0]).selection_probs, 1.0 / 3.0)

def test_stochastic_all_zero_region_is_uniform():
    dist = region_distribution_stochastic([0.0, 0.0, 0.0, 0.0])
    np.testing.assert_allclose(dist.selection_probs, 0.25)
    assert dist.expected_value() == 0.0

def test_sampling_a_certain_outcome():
    dist = region_distribution_maxdrop(REGION, 1.0)
    samples = sample_pooled_activation(dist, RandomStream(11), size=1000)
    assert np.all(samples == 6.0)
    assert sample_pooled_activation(dist, RandomStream(11)) == 6.0

def test_sampling_frequency_of_the_maximum():
    draws = 100_000
    samples = sample_pooled_activation(region_distribution_maxdrop(REGION, 0.5), RandomStream(12), size=draws)
    frequency = np.mean(samples == 6.0)
    assert abs(frequency - 0.5) <= 3 * np.sqrt(0.25 / draws)
