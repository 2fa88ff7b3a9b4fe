'''
Central finite-difference checks of the analytic gradients, both for
single layer primitives and for a whole network with its randomness
frozen through a replayed forward cache.
'''
from dataclasses import dataclass
from typing import Callable, Dict, Optional
from core.random_stream import RandomStream
from core.tensor_ops import (
    conv2d_forward, conv2d_backward, fc_forward, fc_backward, softmax_cross_entropy
)
from network.network import Network
from pooling.pool_layers import pool_forward_replay, pool_backward
import numpy as np

DEFAULT_STEP = 1e-5

def numerical_gradient(func: Callable[[], float], x: np.ndarray, step: float = DEFAULT_STEP) -> np.ndarray:
    '''
    d func / d x by central differences, perturbing `x` in place one entry
    at a time and restoring it afterwards.

    Args:
        func: Scalar function that reads `x`.
        x: Array to perturb (float64).
        step: Perturbation size.
    '''
    grad = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    for i in range(flat.size):
        original = flat[i]
        flat[i] = original + step
        plus = func()
        flat[i] = original - step
        minus = func()
        flat[i] = original
        grad.reshape(-1)[i] = (plus - minus) / (2.0 * step)
    return grad

def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    '''
    ||a - n|| / (||a|| + ||n||), and 0 when both gradients vanish.
    '''
    denominator = np.linalg.norm(analytic) + np.linalg.norm(numeric)
    if denominator == 0.0:
        return 0.0
    return float(np.linalg.norm(analytic - numeric) / denominator)

@dataclass(frozen=True)
class GradientReport:
    errors: Dict[str, float]

    @property
    def max_error(self) -> float:
        return max(self.errors.values()) if self.errors else 0.0

def check_network_gradients(network: Network, images: np.ndarray, labels: np.ndarray, stream: Optional[RandomStream] = None, example_indices: Optional[np.ndarray] = None, step: float = DEFAULT_STEP) -> GradientReport:
    '''
    Compare backpropagation against finite differences of the mean
    cross-entropy for every parameter of a (small) network.

    One train-mode forward records the dropout masks and pooling
    selections; every perturbed evaluation replays them so the loss is a
    deterministic function of the parameters.

    Returns:
        Relative error per parameter array, named 'W<slot>' and 'b<slot>'.
    '''
    stream = stream if stream is not None else RandomStream(network.cfg.seed)
    logits, cache = network.forward(images, 'train', stream, example_indices=example_indices)
    _, grad_logits = softmax_cross_entropy(logits, labels)
    analytic = network.backward(cache, grad_logits)

    def loss() -> float:
        replayed, _ = network.forward(images, 'train', stream, example_indices=example_indices, replay=cache)
        value, _ = softmax_cross_entropy(replayed, labels)
        return value

    errors = {}
    for position, param in enumerate(network.params):
        name = f'{"W" if position % 2 == 0 else "b"}{position // 2}'
        numeric = numerical_gradient(loss, param, step)
        errors[name] = relative_error(analytic[position], numeric)
    return GradientReport(errors)

def check_conv_gradients(inputs: np.ndarray, filters: np.ndarray, biases: np.ndarray, upstream: np.ndarray, step: float = DEFAULT_STEP) -> GradientReport:
    '''
    Check conv2d_backward on the scalar sum(upstream * conv2d_forward(...)).
    '''
    def objective() -> float:
        return float(np.sum(upstream * conv2d_forward(inputs, filters, biases)))

    grad_input, grad_filters, grad_biases = conv2d_backward(upstream, inputs, filters)
    return GradientReport({
        'input': relative_error(grad_input, numerical_gradient(objective, inputs, step)),
        'filters': relative_error(grad_filters, numerical_gradient(objective, filters, step)),
        'biases': relative_error(grad_biases, numerical_gradient(objective, biases, step))
    })

def check_fc_gradients(inputs: np.ndarray, weights: np.ndarray, biases: np.ndarray, upstream: np.ndarray, step: float = DEFAULT_STEP) -> GradientReport:
    def objective() -> float:
        return float(np.sum(upstream * fc_forward(inputs, weights, biases)))

    grad_input, grad_weights, grad_biases = fc_backward(upstream, inputs, weights)
    return GradientReport({
        'input': relative_error(grad_input, numerical_gradient(objective, inputs, step)),
        'weights': relative_error(grad_weights, numerical_gradient(objective, weights, step)),
        'biases': relative_error(grad_biases, numerical_gradient(objective, biases, step))
    })

def check_softmax_gradients(logits: np.ndarray, labels: np.ndarray, step: float = DEFAULT_STEP) -> GradientReport:
    def objective() -> float:
        value, _ = softmax_cross_entropy(logits, labels)
        return value

    _, grad = softmax_cross_entropy(logits, labels)
    return GradientReport({'logits': relative_error(grad, numerical_gradient(objective, logits, step))})

def check_pool_gradients(inputs: np.ndarray, selected: np.ndarray, upstream: np.ndarray, step: float = DEFAULT_STEP) -> GradientReport:
    '''
    Check pool_backward against the replayed (frozen-selection) pooling.
    '''
    def objective() -> float:
        return float(np.sum(upstream * pool_forward_replay(inputs, selected)))

    grad_input = pool_backward(upstream, selected, inputs.shape)
    return GradientReport({'input': relative_error(grad_input, numerical_gradient(objective, inputs, step))})
