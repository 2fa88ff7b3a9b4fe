'''
Network assembly and forward/backward orchestration.

Layer l draws its randomness from the batch stream spawned with
(DROPOUT_DOMAIN, l) for input dropout and (POOLING_DOMAIN, l) for pooling,
and every example uses its dataset index as the counter.
'''
from dataclasses import dataclass, field
from typing import List, Optional, Tuple
from core.dropout import apply_mask, dropout_backward, dropout_test_scale, dropout_train
from core.errors import ConfigError, ShapeError
from core.random_stream import RandomStream, INIT_DOMAIN, DROPOUT_DOMAIN, POOLING_DOMAIN
from core.tensor_ops import (
    conv2d_forward, conv2d_backward, fc_forward, fc_backward,
    relu, relu_backward, ensure_finite, gaussian_init
)
from network.arch_spec import ArchSpec, ConvLayerSpec, PoolLayerSpec, FullLayerSpec
from network.train_config import TrainConfig
from pooling.pool_spec import PoolSpec, TRAIN_MODES, TEST_MODES
from pooling.pool_layers import pool_train_forward, pool_test_forward, pool_forward_replay, pool_backward
import numpy as np

MODES = ('train', 'test')

@dataclass
class LayerCache:
    '''
    What one layer recorded during a forward pass.
    '''
    kind: str
    input_shape: Tuple[int, ...]
    inputs: Optional[np.ndarray] = None
    mask: Optional[np.ndarray] = None
    pre_activation: Optional[np.ndarray] = None
    selected: Optional[np.ndarray] = None

@dataclass
class ForwardCache:
    mode: str
    layers: List[LayerCache] = field(default_factory=list)

def parameter_shapes(spec: ArchSpec) -> List[Tuple[int, ...]]:
    '''
    Shapes of [W_0, b_0, W_1, b_1, ...]: conv filters are
    [maps_out, maps_in, t, t], fully-connected weights [units, inputs].
    '''
    shapes = []
    incoming_shapes = spec.shapes()
    for index, layer in enumerate(spec.layers):
        incoming = incoming_shapes[index]
        if isinstance(layer, ConvLayerSpec):
            shapes.append((layer.maps, incoming[0], layer.filter_side, layer.filter_side))
            shapes.append((layer.maps,))
        elif isinstance(layer, FullLayerSpec):
            shapes.append((layer.units, int(np.prod(incoming))))
            shapes.append((layer.units,))
    return shapes

class Network:
    '''
    A stack of conv (with rectifier), pooling and fully-connected layers
    ending in a linear classifier whose logits feed softmax cross-entropy.

    Parameters are kept as a flat list [W_0, b_0, W_1, b_1, ...] in layer
    order, with one velocity array per parameter for momentum SGD.
    '''

    def __init__(self, spec: ArchSpec, cfg: TrainConfig, params: List[np.ndarray]):
        self.spec = spec
        self.cfg = cfg
        self.shapes = spec.shapes()
        self.param_layers = [
            index for index, layer in enumerate(spec.layers)
            if isinstance(layer, (ConvLayerSpec, FullLayerSpec))
        ]
        expected = self.parameter_shapes()
        if len(params) != len(expected):
            raise ShapeError(f'Expected {len(expected)} parameter arrays, got {len(params)}')
        for array, shape in zip(params, expected):
            if array.shape != shape:
                raise ShapeError(f'Parameter of shape {array.shape} where {shape} is expected')
        self.params = [np.ascontiguousarray(array, dtype=cfg.np_dtype) for array in params]
        self.velocities = [np.zeros_like(array) for array in self.params]
        self.pool_specs = {
            index: PoolSpec(layer.window, layer.stride, cfg.pool_train_mode, cfg.pool_test_mode, cfg.pool_retain_p)
            for index, layer in enumerate(spec.layers) if isinstance(layer, PoolLayerSpec)
        }
        self._first_full = next(index for index, layer in enumerate(spec.layers) if isinstance(layer, FullLayerSpec))
        self._first_conv = next((index for index, layer in enumerate(spec.layers) if isinstance(layer, ConvLayerSpec)), None)

    def parameter_shapes(self) -> List[Tuple[int, ...]]:
        return parameter_shapes(self.spec)

    @property
    def parameter_count(self) -> int:
        return int(sum(array.size for array in self.params))

    def flat_parameters(self) -> np.ndarray:
        return np.concatenate([array.ravel() for array in self.params])

    def load_flat_parameters(self, flat: np.ndarray):
        '''
        Replace every parameter from one flat vector in layer order.

        Raises:
            ShapeError: If the vector length does not match the architecture.
        '''
        flat = np.asarray(flat)
        if flat.ndim != 1 or flat.size != self.parameter_count:
            raise ShapeError(f'Expected {self.parameter_count} parameters, got {flat.size}')
        offset = 0
        for index, array in enumerate(self.params):
            size = array.size
            self.params[index] = flat[offset:offset + size].reshape(array.shape).astype(self.cfg.np_dtype)
            offset += size
        self.velocities = [np.zeros_like(array) for array in self.params]

    def _weights(self, layer_index: int) -> Tuple[np.ndarray, np.ndarray]:
        slot = self.param_layers.index(layer_index)
        return self.params[2 * slot], self.params[2 * slot + 1]

    def input_retain_p(self, layer_index: int) -> float:
        '''
        Retain probability of dropout on the input of a conv or fully-connected layer.
        '''
        layer = self.spec.layers[layer_index]
        placement = self.cfg.dropout
        if isinstance(layer, ConvLayerSpec):
            if layer_index == self._first_conv and not placement.input_image:
                return 1.0
            return placement.conv_input
        if isinstance(layer, FullLayerSpec):
            return placement.first_fc_input if layer_index == self._first_full else placement.fc_input
        return 1.0

    def _check_pooling_mode(self, mode: str, pooling: Optional[str]) -> Optional[str]:
        if mode not in MODES:
            raise ConfigError(f'Unknown forward mode "{mode}". Options: {", ".join(MODES)}')
        if pooling is None:
            return None
        allowed = TRAIN_MODES if mode == 'train' else TEST_MODES
        if pooling not in allowed:
            raise ConfigError(f'Pooling mode "{pooling}" cannot be used in {mode} mode. Options: {", ".join(allowed)}')
        return pooling

    def forward(self, inputs: np.ndarray, mode: str = 'test', stream: Optional[RandomStream] = None, example_indices: Optional[np.ndarray] = None, pooling: Optional[str] = None, replay: Optional[ForwardCache] = None) -> Tuple[np.ndarray, ForwardCache]:
        '''
        Run the network on a batch.

        Args:
            inputs: [batch, channels, h, w] or a single [channels, h, w] image.
            mode: 'train' applies dropout masks and train-time pooling;
                'test' applies no masks, rescales dropout sites and uses
                the test-time pooling.
            stream: Batch stream; required in train mode when any site is random.
            example_indices: Dataset index of every batch row.
            pooling: Overrides the configured pooling mode for this mode.
            replay: A train-mode cache whose masks and pooling selections
                are reused verbatim, freezing all randomness.

        Returns:
            (logits [batch, classes], cache for backward).

        Raises:
            ConfigError: For an unknown mode, a pooling mode that does not
                belong to it, or a missing stream.
            ShapeError: If the input does not match the architecture.
            NonFiniteError: If any layer output stops being finite.
        '''
        pooling = self._check_pooling_mode(mode, pooling)
        if replay is not None and (mode != 'train' or replay.mode != 'train'):
            raise ConfigError('Replay is only defined for train-mode passes')
        x = np.asarray(inputs, dtype=self.cfg.np_dtype)
        if x.ndim == len(self.spec.input_shape):
            x = x[np.newaxis]
        if x.shape[1:] != tuple(self.spec.input_shape):
            raise ShapeError(f'Input of shape {x.shape[1:]} does not match architecture input {self.spec.input_shape}')
        if example_indices is not None:
            example_indices = np.asarray(example_indices, dtype=np.int64)
            if example_indices.shape != (x.shape[0],):
                raise ShapeError(f'{example_indices.shape[0]} example indices for a batch of {x.shape[0]}')

        cache = ForwardCache(mode)
        last = len(self.spec.layers) - 1
        for index, layer in enumerate(self.spec.layers):
            recorded = replay.layers[index] if replay is not None else None
            if isinstance(layer, PoolLayerSpec):
                spec = self.pool_specs[index]
                entry = LayerCache('pool', x.shape)
                if mode == 'train':
                    if recorded is not None:
                        x = pool_forward_replay(x, recorded.selected)
                        entry.selected = recorded.selected
                    else:
                        if pooling is not None:
                            spec = PoolSpec(spec.window, spec.stride, pooling, spec.test_mode, spec.retain_p)
                        site = stream.spawn(POOLING_DOMAIN, index) if stream is not None else None
                        x, entry.selected = pool_train_forward(x, spec, site, example_indices, self.cfg.multinomial_path)
                else:
                    x = pool_test_forward(x, spec.with_test_mode(pooling or spec.test_mode))
                cache.layers.append(entry)
                ensure_finite(x, f'pooling layer {index}')
                continue

            entry = LayerCache('conv' if isinstance(layer, ConvLayerSpec) else 'full', x.shape)
            if isinstance(layer, FullLayerSpec) and x.ndim > 2:
                x = x.reshape(x.shape[0], -1)
            retain_p = self.input_retain_p(index)
            if retain_p < 1.0:
                if mode == 'train':
                    if recorded is not None:
                        entry.mask = recorded.mask
                        x = apply_mask(x, entry.mask)
                    else:
                        if stream is None:
                            raise ConfigError(f'Dropout on the input of layer {index} needs a random stream')
                        site = stream.spawn(DROPOUT_DOMAIN, index)
                        x, entry.mask = dropout_train(x, retain_p, site, example_indices)
                else:
                    x = dropout_test_scale(x, retain_p)
            weights, biases = self._weights(index)
            entry.inputs = x
            if isinstance(layer, ConvLayerSpec):
                z = conv2d_forward(x, weights, biases)
            else:
                z = fc_forward(x, weights, biases)
            ensure_finite(z, f'layer {index} ({layer.token()})')
            if index == last:
                x = z
            else:
                entry.pre_activation = z
                x = relu(z)
            cache.layers.append(entry)
        return x, cache

    def backward(self, cache: ForwardCache, grad_logits: np.ndarray) -> List[np.ndarray]:
        '''
        Back-propagate the gradient of the loss w.r.t. the logits.

        Returns:
            Gradients aligned with self.params.

        Raises:
            ConfigError: If the cache comes from a test-mode pass.
        '''
        if cache.mode != 'train':
            raise ConfigError('Backward needs a train-mode forward cache; test-time pooling has no gradient')
        grads: List[Optional[np.ndarray]] = [None] * len(self.params)
        grad = grad_logits
        for index in range(len(self.spec.layers) - 1, -1, -1):
            entry = cache.layers[index]
            if entry.kind == 'pool':
                grad = pool_backward(grad, entry.selected, entry.input_shape)
                continue
            if entry.pre_activation is not None:
                grad = relu_backward(grad, entry.pre_activation)
            weights, _ = self._weights(index)
            slot = self.param_layers.index(index)
            if entry.kind == 'conv':
                grad_input, grad_weights, grad_biases = conv2d_backward(grad, entry.inputs, weights)
            else:
                grad_input, grad_weights, grad_biases = fc_backward(grad, entry.inputs, weights)
            grads[2 * slot] = grad_weights
            grads[2 * slot + 1] = grad_biases
            if index == 0:
                break
            if entry.mask is not None:
                grad_input = dropout_backward(grad_input, entry.mask)
            grad = grad_input.reshape(entry.input_shape)
        return grads

def build_network(spec: ArchSpec, cfg: TrainConfig, stream: Optional[RandomStream] = None) -> Network:
    '''
    Build a network with weights ~ N(0, init_std^2) and zero biases.

    Args:
        spec: Parsed architecture.
        cfg: Training configuration (dtype, init_std, pooling, dropout).
        stream: Root stream; defaults to RandomStream(cfg.seed).

    Returns:
        The Network; layer l's weights come from stream.spawn(INIT_DOMAIN, l).
    '''
    stream = stream if stream is not None else RandomStream(cfg.seed)
    params = []
    param_layers = [index for index, layer in enumerate(spec.layers) if not isinstance(layer, PoolLayerSpec)]
    shapes = parameter_shapes(spec)
    for slot, index in enumerate(param_layers):
        params.append(gaussian_init(stream.spawn(INIT_DOMAIN, index), shapes[2 * slot], cfg.init_std, cfg.np_dtype))
        params.append(np.zeros(shapes[2 * slot + 1], dtype=cfg.np_dtype))
    return Network(spec, cfg, params)
