'''
Binary checkpoint container, little-endian throughout:

    magic      4 bytes  b'PDCK'
    version    u8       1
    arch_len   u32      length of the UTF-8 architecture string
    arch       bytes
    seed       u64
    epoch      u32
    count      u64      number of parameters
    params     count x f64, flattened in layer order
'''
from dataclasses import dataclass
from typing import Optional
from core.errors import CheckpointError
from core.helpers import setup_logger
from network.arch_spec import parse_arch
from network.network import Network, parameter_shapes
from network.train_config import TrainConfig
import numpy as np
import struct
import os

MAGIC = b'PDCK'
VERSION = 1
_HEADER = struct.Struct('<4sBI')
_TRAILER = struct.Struct('<QIQ')

@dataclass(frozen=True)
class Checkpoint:
    arch: str
    seed: int
    epoch: int
    params: np.ndarray

def save_checkpoint(path: str, network: Network, epoch: int, seed: Optional[int] = None) -> str:
    '''
    Serialize the network's architecture and parameters.

    Args:
        path: Destination file.
        network: Network to save.
        epoch: Completed epochs.
        seed: Experiment seed; defaults to the network's config seed.

    Returns:
        The path written.
    '''
    arch = network.spec.text.encode('utf-8')
    flat = network.flat_parameters().astype('<f8')
    seed = network.cfg.seed if seed is None else seed
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'wb') as handle:
        handle.write(_HEADER.pack(MAGIC, VERSION, len(arch)))
        handle.write(arch)
        handle.write(_TRAILER.pack(seed, epoch, flat.size))
        handle.write(flat.tobytes())
    setup_logger('Checkpoint').info(f'Saved checkpoint of epoch {epoch} ({flat.size} parameters) to {path}')
    return path

def load_checkpoint(path: str) -> Checkpoint:
    '''
    Raises:
        CheckpointError: On a bad magic or version, or a truncated file.
    '''
    with open(path, 'rb') as handle:
        data = handle.read()
    if len(data) < _HEADER.size:
        raise CheckpointError(f'{path}: truncated header at offset {len(data)}, {_HEADER.size} bytes needed')
    try:
        magic, version, arch_length = _HEADER.unpack_from(data, 0)
    except struct.error as exc:
        raise CheckpointError(f'{path}: truncated header at offset 0') from exc
    if magic != MAGIC:
        raise CheckpointError(f'{path}: bad magic {magic!r}, expected {MAGIC!r}')
    if version != VERSION:
        raise CheckpointError(f'{path}: unsupported version {version}, expected {VERSION}')
    offset = _HEADER.size
    if len(data) < offset + arch_length + _TRAILER.size:
        raise CheckpointError(f'{path}: truncated at offset {len(data)}, before the parameter block')
    try:
        arch = data[offset:offset + arch_length].decode('utf-8')
    except UnicodeDecodeError as exc:
        raise CheckpointError(f'{path}: architecture string at offset {offset + exc.start} is not valid UTF-8') from exc
    offset += arch_length
    try:
        seed, epoch, count = _TRAILER.unpack_from(data, offset)
    except struct.error as exc:
        raise CheckpointError(f'{path}: truncated header at offset {offset}') from exc
    offset += _TRAILER.size
    expected = offset + 8 * count
    if len(data) != expected:
        raise CheckpointError(f'{path}: expected {expected} bytes for {count} parameters, found {len(data)}')
    params = np.frombuffer(data, dtype='<f8', count=count, offset=offset).astype(np.float64)
    return Checkpoint(arch, seed, epoch, params)

def restore_network(path: str, cfg: TrainConfig) -> Network:
    '''
    Rebuild a network from a checkpoint. The architecture comes from the
    file; pooling and dropout modes come from `cfg`.
    '''
    checkpoint = load_checkpoint(path)
    spec = parse_arch(checkpoint.arch)
    network = Network(spec, cfg, [np.zeros(shape) for shape in parameter_shapes(spec)])
    try:
        network.load_flat_parameters(checkpoint.params)
    except ValueError as exc:
        raise CheckpointError(f'{path}: {exc}') from exc
    return network
