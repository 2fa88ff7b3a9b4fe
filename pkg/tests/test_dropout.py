from core.dropout import DropoutPlacement, dropout_train, dropout_backward, dropout_test_scale, apply_mask
from core.errors import ConfigError, ShapeError
from core.tensor_ops import fc_forward
import numpy as np
import pytest

def test_full_retention_is_the_identity(stream, rng):
    x = rng.normal(size=(4, 5))
    masked, mask = dropout_train(x, 1.0, stream)
    assert np.array_equal(masked, x)
    assert mask.all()

def test_fraction_of_dropped_units(stream):
    p = 0.3
    count = 100_000
    _, mask = dropout_train(np.ones(count), p, stream)
    dropped = 1.0 - mask.mean()
    sigma = np.sqrt(p * (1 - p) / count)
    assert abs(dropped - (1 - p)) <= 3 * sigma

def test_expected_value_of_masked_input(stream):
    x = np.full(100_000, 2.0)
    masked, _ = dropout_train(x, 0.5, stream)
    sigma = 2.0 * np.sqrt(0.25 / x.size)
    assert abs(masked.mean() - 1.0) <= 3 * sigma

def test_same_stream_gives_the_same_mask(stream):
    _, first = dropout_train(np.ones((8, 8)), 0.5, stream)
    _, second = dropout_train(np.ones((8, 8)), 0.5, stream)
    assert np.array_equal(first, second)

def test_backward_uses_the_forward_mask(stream, rng):
    _, mask = dropout_train(np.ones((3, 3)), 0.5, stream)
    grad = rng.normal(size=(3, 3))
    np.testing.assert_array_equal(dropout_backward(grad, mask), grad * mask)
    with pytest.raises(ShapeError):
        dropout_backward(grad, mask[:2])
    with pytest.raises(ShapeError):
        apply_mask(grad, mask[:, :2])

def test_test_scale(rng):
    x = rng.normal(size=6)
    np.testing.assert_array_equal(dropout_test_scale(x, 0.5), 0.5 * x)
    assert dropout_test_scale(x, 1.0) is x

def test_scaling_activations_equals_scaling_weights(rng):
    x = rng.normal(size=7)
    weights = rng.normal(size=(4, 7))
    biases = rng.normal(size=4)
    scaled_inputs = fc_forward(dropout_test_scale(x, 0.8), weights, biases)
    scaled_weights = fc_forward(x, 0.8 * weights, biases)
    np.testing.assert_allclose(scaled_inputs, scaled_weights, atol=1e-12)

@pytest.mark.parametrize('retain_p', [0.0, -0.2, 1.5])
def test_invalid_retain_probability(stream, retain_p):
    with pytest.raises(ConfigError):
        dropout_train(np.ones(3), retain_p, stream)
    with pytest.raises(ConfigError):
        DropoutPlacement(fc_input=retain_p)

def test_placement_from_flags():
    placement = DropoutPlacement.from_flags(pool=True, fc=True)
    assert placement.pool_input == 0.5
    assert placement.fc_input == 0.5
    assert placement.first_fc_input == 0.8
    assert placement.conv_input == 1.0
    assert placement.describe() == 'pool+fc'
    assert DropoutPlacement().describe() == 'none'

def test_per_example_masks_ignore_the_batching(stream):
    x = np.ones((4, 6, 5))
    _, whole = dropout_train(x, 0.5, stream, np.array([10, 11, 12, 13]))
    _, part = dropout_train(x[:2], 0.5, stream, np.array([12, 13]))
    np.testing.assert_array_equal(whole[2:], part)
    with pytest.raises(ShapeError):
        dropout_train(x, 0.5, stream, np.array([1, 2]))
