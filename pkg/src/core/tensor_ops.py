'''
Dense layer primitives shared by the whole engine: valid convolution,
fully-connected maps, the rectifier, softmax with cross-entropy and
Gaussian initialisation.

Every op accepts a single example (e.g. [maps, h, w]) or a batch with a
leading example axis (e.g. [batch, maps, h, w]) and returns the same layout.
'''
from typing import Tuple, Union
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import logsumexp, softmax
from core.errors import ShapeError, NonFiniteError
from core.random_stream import RandomStream
import numpy as np

def ensure_finite(tensor: np.ndarray, where: str) -> np.ndarray:
    '''
    Raise NonFiniteError if the tensor holds NaN or Inf.

    Args:
        tensor: Values to check.
        where: Name of the producing operation, used in the message.

    Returns:
        The tensor, unchanged.
    '''
    if not np.all(np.isfinite(tensor)):
        bad = int(np.size(tensor) - np.count_nonzero(np.isfinite(tensor)))
        raise NonFiniteError(f'{bad} non-finite values produced by {where}')
    return tensor

def as_batch(tensor: np.ndarray, single_ndim: int, name: str) -> Tuple[np.ndarray, bool]:
    if tensor.ndim == single_ndim:
        return tensor[np.newaxis], True
    if tensor.ndim == single_ndim + 1:
        return tensor, False
    raise ShapeError(f'{name} must have {single_ndim} or {single_ndim + 1} dimensions, got shape {tensor.shape}')

def _check_conv_shapes(inputs: np.ndarray, filters: np.ndarray, biases: np.ndarray):
    if filters.ndim != 4:
        raise ShapeError(f'Filters must be [maps_out, maps_in, t, t], got shape {filters.shape}')
    maps_out, maps_in, t_rows, t_cols = filters.shape
    if t_rows != t_cols:
        raise ShapeError(f'Filters must be square, got {t_rows}x{t_cols}')
    if inputs.shape[1] != maps_in:
        raise ShapeError(f'Input has {inputs.shape[1]} maps but filters expect {maps_in}')
    if t_rows > inputs.shape[2] or t_cols > inputs.shape[3]:
        raise ShapeError(f'Filter side {t_rows} exceeds input extent {inputs.shape[2:]}')
    if biases.shape != (maps_out,):
        raise ShapeError(f'Biases must have shape ({maps_out},), got {biases.shape}')

def conv2d_forward(inputs: np.ndarray, filters: np.ndarray, biases: np.ndarray) -> np.ndarray:
    '''
    Valid cross-correlation, stride 1, summed over input maps, plus bias.

    Args:
        inputs: [maps_in, h, w] or [batch, maps_in, h, w].
        filters: [maps_out, maps_in, t, t].
        biases: [maps_out].

    Returns:
        [maps_out, h - t + 1, w - t + 1] (with a leading batch axis if given one).

    Raises:
        ShapeError: If the extents do not agree.
    '''
    batch, single = as_batch(inputs, 3, 'Convolution input')
    _check_conv_shapes(batch, filters, biases)
    t = filters.shape[2]
    # im2col view: [batch, maps_in, out_h, out_w, t, t]
    windows = sliding_window_view(batch, (t, t), axis=(2, 3))
    out = np.tensordot(windows, filters, axes=([1, 4, 5], [1, 2, 3]))
    out = out.transpose(0, 3, 1, 2) + biases[np.newaxis, :, np.newaxis, np.newaxis]
    out = np.ascontiguousarray(out)
    return out[0] if single else out

def conv2d_backward(grad_out: np.ndarray, inputs: np.ndarray, filters: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    '''
    Reverse-mode of conv2d_forward.

    Args:
        grad_out: Gradient w.r.t. the convolution output.
        inputs: The forward input.
        filters: The forward filters.

    Returns:
        (grad_input, grad_filters, grad_biases); filter and bias gradients
        are summed over the batch.
    '''
    batch, single = as_batch(inputs, 3, 'Convolution input')
    grads, _ = as_batch(grad_out, 3, 'Convolution gradient')
    maps_out, _, t, _ = filters.shape
    _check_conv_shapes(batch, filters, np.zeros(maps_out))
    expected = (batch.shape[0], maps_out, batch.shape[2] - t + 1, batch.shape[3] - t + 1)
    if grads.shape != expected:
        raise ShapeError(f'Gradient shape {grads.shape} does not match convolution output {expected}')

    windows = sliding_window_view(batch, (t, t), axis=(2, 3))
    grad_filters = np.tensordot(grads, windows, axes=([0, 2, 3], [0, 2, 3]))
    grad_biases = grads.sum(axis=(0, 2, 3))

    # Full correlation of the output gradient with the flipped filters.
    padded = np.pad(grads, ((0, 0), (0, 0), (t - 1, t - 1), (t - 1, t - 1)))
    padded_windows = sliding_window_view(padded, (t, t), axis=(2, 3))
    flipped = filters[:, :, ::-1, ::-1]
    grad_input = np.tensordot(padded_windows, flipped, axes=([1, 4, 5], [0, 2, 3]))
    grad_input = np.ascontiguousarray(grad_input.transpose(0, 3, 1, 2))
    return (grad_input[0] if single else grad_input), grad_filters, grad_biases

def fc_forward(inputs: np.ndarray, weights: np.ndarray, biases: np.ndarray) -> np.ndarray:
    '''
    Affine map weights . inputs + biases for [n_in] or [batch, n_in] inputs.
    '''
    batch, single = as_batch(inputs, 1, 'Fully-connected input')
    if weights.ndim != 2 or weights.shape[1] != batch.shape[1]:
        raise ShapeError(f'Weights of shape {weights.shape} cannot consume {batch.shape[1]} inputs')
    if biases.shape != (weights.shape[0],):
        raise ShapeError(f'Biases must have shape ({weights.shape[0]},), got {biases.shape}')
    out = batch @ weights.T + biases
    return out[0] if single else out

def fc_backward(grad_out: np.ndarray, inputs: np.ndarray, weights: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    batch, single = as_batch(inputs, 1, 'Fully-connected input')
    grads, _ = as_batch(grad_out, 1, 'Fully-connected gradient')
    if grads.shape != (batch.shape[0], weights.shape[0]):
        raise ShapeError(f'Gradient shape {grads.shape} does not match output ({batch.shape[0]}, {weights.shape[0]})')
    grad_input = grads @ weights
    grad_weights = grads.T @ batch
    grad_biases = grads.sum(axis=0)
    return (grad_input[0] if single else grad_input), grad_weights, grad_biases

def relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0)

def relu_backward(grad_out: np.ndarray, x: np.ndarray) -> np.ndarray:
    '''
    Pass the gradient only where the forward input was strictly positive.
    '''
    if grad_out.shape != x.shape:
        raise ShapeError(f'Gradient shape {grad_out.shape} does not match input {x.shape}')
    return grad_out * (x > 0)

def softmax_cross_entropy(logits: np.ndarray, labels: Union[int, np.ndarray]) -> Tuple[float, np.ndarray]:
    '''
    Cross-entropy of softmax(logits) against integer labels.

    For a single example the loss is -log softmax(logits)[label] and the
    gradient is softmax(logits) - onehot(label). For a batch the loss is the
    mean over examples and the gradient is that of the mean.

    Raises:
        ShapeError: If there are fewer than two classes.
        ValueError: If a label is out of range.
    '''
    batch, single = as_batch(logits, 1, 'Logits')
    labels = np.atleast_1d(np.asarray(labels, dtype=np.int64))
    classes = batch.shape[1]
    if classes < 2:
        raise ShapeError(f'Softmax needs at least 2 classes, got {classes}')
    if labels.shape != (batch.shape[0],):
        raise ShapeError(f'Expected {batch.shape[0]} labels, got {labels.shape}')
    if np.any(labels < 0) or np.any(labels >= classes):
        raise ValueError(f'Labels must lie in [0, {classes}), got {labels[(labels < 0) | (labels >= classes)][:5]}')

    rows = np.arange(batch.shape[0])
    # logsumexp subtracts the row maximum internally.
    losses = logsumexp(batch, axis=1) - batch[rows, labels]
    probabilities = softmax(batch, axis=1)
    grad = probabilities
    grad[rows, labels] -= 1.0
    if single:
        return float(losses[0]), grad[0]
    return float(losses.mean()), grad / batch.shape[0]

def gaussian_init(stream: RandomStream, shape, std: float, dtype=np.float64) -> np.ndarray:
    '''
    I.i.d. zero-mean normal draws, reproducible from the stream's (seed, counter).
    '''
    if std <= 0:
        raise ValueError(f'Standard deviation must be positive, got {std}')
    return stream.normal(tuple(shape), std).astype(dtype, copy=False)
