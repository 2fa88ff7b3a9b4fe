'''
Parser for the compact architecture notation, e.g.

    1x28x28-6C5-2P2-12C5-2P2-1000N-10N

DIMS ("-" LAYER)+ with DIMS = channels "x" height "x" width and
LAYER = <maps>C<filter side> | <window>P<stride> | <units>N.
'''
from dataclasses import dataclass
from typing import List, Tuple, Union
from core.errors import ArchitectureError
import re

_INTEGER = re.compile(r'\d+')
_DIM_SEPARATORS = ('x', 'X', '×')

@dataclass(frozen=True)
class ConvLayerSpec:
    maps: int
    filter_side: int
    position: int = 0

    def token(self) -> str:
        return f'{self.maps}C{self.filter_side}'

@dataclass(frozen=True)
class PoolLayerSpec:
    window: int
    stride: int
    position: int = 0

    def token(self) -> str:
        return f'{self.window}P{self.stride}'

@dataclass(frozen=True)
class FullLayerSpec:
    units: int
    position: int = 0

    def token(self) -> str:
        return f'{self.units}N'

LayerSpec = Union[ConvLayerSpec, PoolLayerSpec, FullLayerSpec]
Shape = Tuple[int, ...]

@dataclass(frozen=True)
class ArchSpec:
    '''
    Parsed architecture: input dimensions and the ordered layer descriptors.
    The final fully-connected layer is the classifier.
    '''
    input_shape: Tuple[int, int, int]
    layers: Tuple[LayerSpec, ...]

    @property
    def text(self) -> str:
        channels, height, width = self.input_shape
        return '-'.join([f'{channels}x{height}x{width}'] + [layer.token() for layer in self.layers])

    @property
    def class_count(self) -> int:
        return self.layers[-1].units

    def shapes(self) -> List[Shape]:
        '''
        Shape after the input and after every layer.
        '''
        return propagate_shapes(self.input_shape, self.layers)

def propagate_shapes(input_shape: Tuple[int, int, int], layers) -> List[Shape]:
    '''
    Conv: side - filter + 1; pool: (side - window) // stride + 1;
    full: a flat vector of the layer's units.

    Raises:
        ArchitectureError: If any inferred extent is not positive.
    '''
    shapes: List[Shape] = [tuple(input_shape)]
    current = tuple(input_shape)
    for layer in layers:
        if isinstance(layer, ConvLayerSpec):
            if len(current) != 3:
                raise ArchitectureError(f'Convolutional layer {layer.token()} cannot follow a fully-connected layer', layer.position)
            side_h = current[1] - layer.filter_side + 1
            side_w = current[2] - layer.filter_side + 1
            if side_h < 1 or side_w < 1:
                raise ArchitectureError(
                    f'Filter side {layer.filter_side} of {layer.token()} exceeds the {current[1]}x{current[2]} input '
                    f'(non-positive inferred dimension)', layer.position
                )
            current = (layer.maps, side_h, side_w)
        elif isinstance(layer, PoolLayerSpec):
            if len(current) != 3:
                raise ArchitectureError(f'Pooling layer {layer.token()} cannot follow a fully-connected layer', layer.position)
            side_h = (current[1] - layer.window) // layer.stride + 1
            side_w = (current[2] - layer.window) // layer.stride + 1
            if current[1] < layer.window or current[2] < layer.window or side_h < 1 or side_w < 1:
                raise ArchitectureError(
                    f'Pooling window {layer.window} of {layer.token()} exceeds the {current[1]}x{current[2]} input '
                    f'(non-positive inferred dimension)', layer.position
                )
            current = (current[0], side_h, side_w)
        else:
            current = (layer.units,)
        shapes.append(current)
    return shapes

def _read_int(text: str, position: int, what: str) -> Tuple[int, int]:
    match = _INTEGER.match(text, position)
    if not match:
        found = repr(text[position]) if position < len(text) else 'end of string'
        raise ArchitectureError(f'Expected {what}, found {found}', position)
    return int(match.group()), match.end()

def _require_positive(value: int, what: str, position: int):
    if value < 1:
        raise ArchitectureError(f'Non-positive {what}: {value}', position)

def parse_arch(text: str) -> ArchSpec:
    '''
    Parse an architecture string and validate its shape chain.

    Args:
        text: Architecture string such as '1x28x28-6C5-2P2-12C5-2P2-1000N-10N'.

    Returns:
        The ArchSpec.

    Raises:
        ArchitectureError: For malformed tokens, non-positive dimensions,
            misplaced layers or trailing garbage; the error carries the
            0-based position of the problem.
    '''
    if not isinstance(text, str) or not text:
        raise ArchitectureError('Empty architecture string', 0)

    dims = []
    position = 0
    for index, what in enumerate(('channel count', 'input height', 'input width')):
        if index > 0:
            if position >= len(text) or text[position] not in _DIM_SEPARATORS:
                found = repr(text[position]) if position < len(text) else 'end of string'
                raise ArchitectureError(f'Expected "x" between input dimensions, found {found}', position)
            position += 1
        start = position
        value, position = _read_int(text, position, what)
        _require_positive(value, what, start)
        dims.append(value)

    layers: List[LayerSpec] = []
    while position < len(text):
        if text[position] != '-':
            raise ArchitectureError(f'Unexpected trailing characters {text[position:]!r}; expected "-"', position)
        start = position + 1
        value, position = _read_int(text, start, 'layer size')
        if position >= len(text):
            raise ArchitectureError('Missing layer type after size (expected C, P or N)', position)
        kind = text[position]
        kind_position = position
        position += 1
        if kind == 'C':
            _require_positive(value, 'feature maps', start)
            side_start = position
            side, position = _read_int(text, position, 'filter side')
            _require_positive(side, 'filter side', side_start)
            layers.append(ConvLayerSpec(value, side, start))
        elif kind == 'P':
            _require_positive(value, 'pooling window', start)
            stride_start = position
            stride, position = _read_int(text, position, 'pooling stride')
            _require_positive(stride, 'pooling stride', stride_start)
            if stride > value:
                raise ArchitectureError(f'Pooling stride {stride} exceeds window {value}', stride_start)
            layers.append(PoolLayerSpec(value, stride, start))
        elif kind == 'N':
            _require_positive(value, 'units', start)
            layers.append(FullLayerSpec(value, start))
        else:
            raise ArchitectureError(f'Unknown layer type {kind!r} (expected C, P or N)', kind_position)

    if not layers:
        raise ArchitectureError('Architecture has no layers', len(text))
    _validate_order(layers, len(text))
    spec = ArchSpec(tuple(dims), tuple(layers))
    spec.shapes()
    return spec

def _validate_order(layers: List[LayerSpec], end: int):
    previous = None
    for layer in layers:
        if isinstance(layer, PoolLayerSpec) and not isinstance(previous, ConvLayerSpec):
            raise ArchitectureError(f'Pooling layer {layer.token()} must follow a convolutional layer', layer.position)
        if isinstance(layer, (ConvLayerSpec, PoolLayerSpec)) and isinstance(previous, FullLayerSpec):
            raise ArchitectureError(f'{layer.token()} cannot follow a fully-connected layer', layer.position)
        previous = layer
    if not isinstance(layers[-1], FullLayerSpec):
        raise ArchitectureError('The last layer must be fully-connected (the classifier)', layers[-1].position)
    if layers[-1].units < 2:
        raise ArchitectureError('The classifier needs at least 2 units', layers[-1].position)
