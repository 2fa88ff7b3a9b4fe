from core.random_stream import RandomStream, per_example_uniforms, DROPOUT_DOMAIN, POOLING_DOMAIN
import numpy as np
import pytest

def test_same_seed_and_counter_give_identical_draws():
    first = RandomStream(42, 7).uniform((3, 4))
    second = RandomStream(42, 7).uniform((3, 4))
    assert np.array_equal(first, second)

def test_different_counters_give_different_draws():
    stream = RandomStream(42)
    assert not np.array_equal(stream.at(0).uniform(16), stream.at(1).uniform(16))

def test_spawn_is_deterministic_and_keyed():
    root = RandomStream(9)
    assert root.spawn(DROPOUT_DOMAIN, 3) == root.spawn(DROPOUT_DOMAIN, 3)
    assert root.spawn(DROPOUT_DOMAIN, 3) != root.spawn(POOLING_DOMAIN, 3)
    assert root.spawn(DROPOUT_DOMAIN, 3) != root.spawn(DROPOUT_DOMAIN, 4)
    assert root.spawn(1).counter == 0

def test_streams_are_immutable():
    stream = RandomStream(5)
    stream.uniform(10)
    assert stream.counter == 0
    assert stream.at(3).seed == stream.seed

def test_out_of_range_seed_is_rejected():
    with pytest.raises(ValueError):
        RandomStream(-1)
    with pytest.raises(ValueError):
        RandomStream(1 << 64)

def test_bernoulli_with_certain_retention_is_all_true(stream):
    assert stream.bernoulli((5, 5), 1.0).all()

def test_per_example_draws_do_not_depend_on_batch_composition(stream):
    together = per_example_uniforms(stream, np.array([3, 7]), (2, 2))
    alone = per_example_uniforms(stream, np.array([7]), (2, 2))
    assert np.array_equal(together[1], alone[0])
    assert not np.array_equal(together[0], together[1])
