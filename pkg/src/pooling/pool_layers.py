'''
Pooling layer operations over [maps, h, w] or [batch, maps, h, w] tensors.

Train-time modes return the selected input offsets so that pool_backward
can route gradients; test-time modes are deterministic estimators and have
no backward.
'''
from typing import Optional, Tuple
from core.errors import ConfigError, NegativeActivationError, ShapeError
from core.random_stream import RandomStream, per_example_uniforms
from core.tensor_ops import as_batch
from pooling.pool_spec import PoolSpec
from pooling import kernels
import numpy as np

def _prepare(inputs: np.ndarray, spec: PoolSpec) -> Tuple[np.ndarray, bool]:
    batch, single = as_batch(inputs, 3, 'Pooling input')
    height, width = batch.shape[2], batch.shape[3]
    if spec.window > height or spec.window > width:
        raise ShapeError(f'Pooling window {spec.window} is larger than the feature map {height}x{width}')
    return np.ascontiguousarray(batch), single

def _check_non_negative(batch: np.ndarray, operation: str):
    if np.any(batch < 0):
        raise NegativeActivationError(f'{operation} requires non-negative activations; got minimum {batch.min()}')

def _uniforms(stream: RandomStream, shape, example_indices: Optional[np.ndarray]) -> np.ndarray:
    if example_indices is None:
        return stream.uniform(shape)
    if len(example_indices) != shape[0]:
        raise ShapeError(f'{len(example_indices)} example indices for a batch of {shape[0]}')
    return per_example_uniforms(stream, example_indices, shape[1:])

def _unbatch(single: bool, *arrays):
    if single:
        arrays = tuple(array[0] for array in arrays)
    return arrays if len(arrays) > 1 else arrays[0]

def max_pool(inputs: np.ndarray, spec: PoolSpec) -> Tuple[np.ndarray, np.ndarray]:
    '''
    Deterministic max-pooling.

    Returns:
        (output, argmax offsets) with one offset per output unit.
    '''
    batch, single = _prepare(inputs, spec)
    out, selected = kernels.max_pool_kernel(batch, spec.window, spec.stride)
    return _unbatch(single, out, selected)

def max_pool_dropout_forward(inputs: np.ndarray, spec: PoolSpec, stream: RandomStream, example_indices: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    '''
    Max-pooling dropout through an explicit mask.

    One Bernoulli(retain_p) mask covers the whole input, so overlapping
    windows share their dropped units. Each output is the maximum over the
    retained units of its window, or 0 with the ALL_DROPPED offset when
    nothing in the window survived.

    Args:
        inputs: Activations feeding the pooling layer.
        spec: Pooling configuration (train_mode 'max_dropout').
        stream: Source of the mask.
        example_indices: Dataset index per batch row; when given, each row's
            mask comes from its own counter so batching does not matter.

    Returns:
        (output, selected offsets, mask).
    '''
    if spec.train_mode != 'max_dropout':
        raise ConfigError(f'max_pool_dropout_forward needs train_mode "max_dropout", got "{spec.train_mode}"')
    batch, single = _prepare(inputs, spec)
    mask = _uniforms(stream, batch.shape, example_indices) < spec.retain_p
    out, selected = kernels.masked_max_pool_kernel(batch, mask, spec.window, spec.stride)
    return _unbatch(single, out, selected, mask)

def max_pool_dropout_multinomial_forward(inputs: np.ndarray, spec: PoolSpec, stream: RandomStream, example_indices: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    '''
    Max-pooling dropout by sampling every window directly from
    Multinomial(p_0, ..., p_n). Windows are sampled independently, which
    matches the mask path region by region but not jointly when windows
    overlap.
    '''
    if spec.train_mode != 'max_dropout':
        raise ConfigError(f'max_pool_dropout_multinomial_forward needs train_mode "max_dropout", got "{spec.train_mode}"')
    batch, single = _prepare(inputs, spec)
    _check_non_negative(batch, 'Multinomial max-pooling dropout')
    out_shape = (batch.shape[0], batch.shape[1], spec.output_side(batch.shape[2]), spec.output_side(batch.shape[3]))
    uniforms = _uniforms(stream, out_shape, example_indices)
    out, selected = kernels.multinomial_max_dropout_kernel(batch, uniforms, spec.window, spec.stride, float(spec.retain_p))
    return _unbatch(single, out, selected)

def prob_weighted_pool(inputs: np.ndarray, spec: PoolSpec) -> np.ndarray:
    '''
    Probabilistic weighted pooling: sum_i p_i * a_i over the sorted region,
    the expected train-time output of max-pooling dropout.

    Raises:
        NegativeActivationError: If any activation is negative.
    '''
    batch, single = _prepare(inputs, spec)
    _check_non_negative(batch, 'Probabilistic weighted pooling')
    out = kernels.prob_weighted_kernel(batch, spec.window, spec.stride, float(spec.retain_p))
    return _unbatch(single, out)

def scaled_max_pool(inputs: np.ndarray, spec: PoolSpec) -> np.ndarray:
    '''
    Scaled max-pooling: retain_p times the window maximum.
    '''
    out, _ = max_pool(inputs, spec)
    return out * spec.retain_p if spec.retain_p != 1.0 else out

def stochastic_pool_forward(inputs: np.ndarray, spec: PoolSpec, stream: RandomStream, example_indices: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    '''
    Stochastic pooling at training time: unit i is picked with
    probability a_i / sum(a).

    Returns:
        (output, selected offsets).
    '''
    batch, single = _prepare(inputs, spec)
    _check_non_negative(batch, 'Stochastic pooling')
    out_shape = (batch.shape[0], batch.shape[1], spec.output_side(batch.shape[2]), spec.output_side(batch.shape[3]))
    uniforms = _uniforms(stream, out_shape, example_indices)
    out, selected = kernels.stochastic_sample_kernel(batch, uniforms, spec.window, spec.stride)
    return _unbatch(single, out, selected)

def stochastic_pool_test(inputs: np.ndarray, spec: PoolSpec) -> np.ndarray:
    '''
    Stochastic pooling at test time: sum_i p_i * a_i with p_i = a_i / sum(a).
    '''
    batch, single = _prepare(inputs, spec)
    _check_non_negative(batch, 'Stochastic weighted pooling')
    out = kernels.stochastic_weighted_kernel(batch, spec.window, spec.stride)
    return _unbatch(single, out)

def pool_forward_replay(inputs: np.ndarray, selected: np.ndarray) -> np.ndarray:
    '''
    Re-run a train-time pooling with its recorded selections frozen.
    '''
    batch, single = as_batch(inputs, 3, 'Pooling input')
    offsets, _ = as_batch(selected, 3, 'Selected offsets')
    if offsets.shape[:2] != batch.shape[:2]:
        raise ShapeError(f'Selections of shape {selected.shape} do not belong to input {inputs.shape}')
    out = kernels.gather_kernel(np.ascontiguousarray(batch), np.ascontiguousarray(offsets))
    return _unbatch(single, out)

def pool_backward(grad_out: np.ndarray, selected: np.ndarray, input_shape: Tuple[int, ...]) -> np.ndarray:
    '''
    Route each output gradient to its selected input unit; overlapping
    windows add up and the all-dropped sentinel routes nothing.

    Args:
        grad_out: Gradient w.r.t. the pooled output.
        selected: Offsets recorded by the forward pass.
        input_shape: Shape of the forward input.

    Raises:
        ShapeError: If the offsets do not match the gradient or the input.
    '''
    grads, single = as_batch(grad_out, 3, 'Pooling gradient')
    offsets, _ = as_batch(selected, 3, 'Selected offsets')
    if offsets.shape != grads.shape:
        raise ShapeError(f'Stale pooling indices: offsets {selected.shape} vs gradient {grad_out.shape}')
    height, width = input_shape[-2], input_shape[-1]
    maps = input_shape[-3]
    if offsets.size and offsets.max() >= maps * height * width:
        raise ShapeError(f'Stale pooling indices: offset {offsets.max()} outside input {input_shape}')
    grad_in = kernels.route_gradient_kernel(np.ascontiguousarray(grads), np.ascontiguousarray(offsets), height, width)
    return _unbatch(single, grad_in)

def pool_train_forward(inputs: np.ndarray, spec: PoolSpec, stream: Optional[RandomStream], example_indices: Optional[np.ndarray] = None, multinomial_path: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    '''
    Dispatch on spec.train_mode.

    Returns:
        (output, selected offsets).
    '''
    if spec.train_mode == 'max' or (spec.train_mode == 'max_dropout' and spec.retain_p == 1.0):
        return max_pool(inputs, spec)
    if stream is None:
        raise ConfigError(f'Pooling train mode "{spec.train_mode}" needs a random stream')
    if spec.train_mode == 'max_dropout':
        if multinomial_path:
            return max_pool_dropout_multinomial_forward(inputs, spec, stream, example_indices)
        out, selected, _ = max_pool_dropout_forward(inputs, spec, stream, example_indices)
        return out, selected
    return stochastic_pool_forward(inputs, spec, stream, example_indices)

def pool_test_forward(inputs: np.ndarray, spec: PoolSpec) -> np.ndarray:
    '''
    Dispatch on spec.test_mode.
    '''
    if spec.test_mode == 'max':
        out, _ = max_pool(inputs, spec)
        return out
    if spec.test_mode == 'scaled_max':
        return scaled_max_pool(inputs, spec)
    if spec.test_mode == 'prob_weighted':
        return prob_weighted_pool(inputs, spec)
    return stochastic_pool_test(inputs, spec)
