'''
Readers and writers for the MNIST IDX and CIFAR binary formats, plus the
preprocessing applied before training:

    MNIST: pixels / 255, values in [0, 1].
    CIFAR: pixels / 255, then the per-channel mean of the training split
           is subtracted from both splits.
'''
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple
from core.errors import ConfigError, DataFormatError
from core.helpers import setup_logger
import numpy as np
import struct
import gzip
import os

IDX_UBYTE = 0x08
IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801

CIFAR_SIDE = 32
CIFAR_CHANNELS = 3
CIFAR_PIXELS = CIFAR_CHANNELS * CIFAR_SIDE * CIFAR_SIDE
CIFAR_LABEL_BYTES = {10: 1, 100: 2}

@dataclass(frozen=True)
class LabeledImageSet:
    '''
    Preprocessed images with their class labels.

    Attributes:
        images: [count, channels, h, w] floating-point array.
        labels: [count] int64 class indices.
        class_count: Number of classes.
        name: Where the set came from, for logs.
        channel_mean: Per-channel mean that was subtracted, if any.
    '''
    images: np.ndarray
    labels: np.ndarray
    class_count: int
    name: str = ''
    channel_mean: Optional[np.ndarray] = field(default=None, compare=False)

    def __post_init__(self):
        if self.images.ndim != 4:
            raise DataFormatError(f'Images must be [count, channels, h, w], got shape {self.images.shape}')
        if self.labels.shape != (self.images.shape[0],):
            raise DataFormatError(f'{self.images.shape[0]} images but {self.labels.shape[0]} labels')
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise DataFormatError(f'Labels must lie in [0, {self.class_count}), got range [{self.labels.min()}, {self.labels.max()}]')

    def __len__(self) -> int:
        return int(self.images.shape[0])

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return tuple(self.images.shape[1:])

    def subset(self, count: Optional[int]) -> 'LabeledImageSet':
        '''
        The first `count` examples; None keeps everything.
        '''
        if count is None:
            return self
        if count < 1 or count > len(self):
            raise ConfigError(f'Subset size {count} must lie in [1, {len(self)}] for {self.name or "the dataset"}')
        return LabeledImageSet(self.images[:count], self.labels[:count], self.class_count, self.name, self.channel_mean)

    def astype(self, dtype) -> 'LabeledImageSet':
        if self.images.dtype == np.dtype(dtype):
            return self
        return LabeledImageSet(self.images.astype(dtype), self.labels, self.class_count, self.name, self.channel_mean)

def _open(path: str):
    return gzip.open(path, 'rb') if path.endswith('.gz') else open(path, 'rb')

def read_idx(path: str, expected_magic: Optional[int] = None) -> np.ndarray:
    '''
    Read an unsigned-byte IDX file into a uint8 array.

    Args:
        path: IDX file, optionally gzip-compressed ('.gz').
        expected_magic: Magic number the file must carry.

    Raises:
        DataFormatError: For a bad magic, an unsupported element type or a
            truncated payload.
    '''
    if not os.path.isfile(path):
        raise DataFormatError(f'IDX file not found: {path}')
    with _open(path) as handle:
        data = handle.read()
    if len(data) < 4:
        raise DataFormatError(f'{path}: truncated IDX header')
    magic = struct.unpack_from('>I', data, 0)[0]
    if expected_magic is not None and magic != expected_magic:
        raise DataFormatError(f'{path}: bad IDX magic 0x{magic:08x}, expected 0x{expected_magic:08x}')
    if magic >> 16 != 0 or (magic >> 8) & 0xFF != IDX_UBYTE:
        raise DataFormatError(f'{path}: unsupported IDX magic 0x{magic:08x} (only unsigned-byte data is read)')
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if ndim < 1 or len(data) < header:
        raise DataFormatError(f'{path}: truncated IDX dimension header')
    dims = struct.unpack_from(f'>{ndim}I', data, 4)
    expected = int(np.prod(dims))
    if len(data) - header < expected:
        raise DataFormatError(f'{path}: truncated file, {len(data) - header} of {expected} payload bytes present')
    if len(data) - header > expected:
        raise DataFormatError(f'{path}: {len(data) - header - expected} trailing bytes after the IDX payload')
    return np.frombuffer(data, dtype=np.uint8, count=expected, offset=header).reshape(dims)

def write_idx(path: str, array: np.ndarray) -> str:
    '''
    Write a uint8 array as an IDX file (gzip-compressed if the path ends in '.gz').
    '''
    array = np.asarray(array)
    if array.dtype != np.uint8:
        raise DataFormatError(f'IDX writer only handles uint8 data, got {array.dtype}')
    header = struct.pack('>I', (IDX_UBYTE << 8) | array.ndim) + struct.pack(f'>{array.ndim}I', *array.shape)
    payload = header + np.ascontiguousarray(array).tobytes()
    opener = gzip.open if path.endswith('.gz') else open
    with opener(path, 'wb') as handle:
        handle.write(payload)
    return path

def load_mnist(images_path: str, labels_path: str) -> LabeledImageSet:
    '''
    Load an MNIST split and scale pixels to [0, 1].

    Raises:
        DataFormatError: For bad magic numbers, truncated files, or a
            count mismatch between images and labels.
    '''
    logger = setup_logger('DatasetParser')
    pixels = read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = read_idx(labels_path, IDX_LABELS_MAGIC)
    if pixels.shape[0] != labels.shape[0]:
        raise DataFormatError(f'{images_path} holds {pixels.shape[0]} images but {labels_path} holds {labels.shape[0]} labels')
    images = pixels[:, np.newaxis, :, :].astype(np.float64) / 255.0
    dataset = LabeledImageSet(images, labels.astype(np.int64), 10, os.path.basename(images_path))
    logger.info(f'Loaded {len(dataset)} MNIST examples of shape {dataset.image_shape} from {images_path}')
    return dataset

def read_cifar_records(path: str, class_count: int) -> Tuple[np.ndarray, np.ndarray]:
    '''
    Read raw CIFAR records: 1 label byte (CIFAR-10) or coarse + fine label
    bytes (CIFAR-100, fine label kept), then 3072 pixel bytes in
    channel-major order.

    Returns:
        (pixels uint8 [count, 3, 32, 32], labels int64 [count]).

    Raises:
        DataFormatError: If the file size is not a whole number of records
            or a label is out of range.
    '''
    if class_count not in CIFAR_LABEL_BYTES:
        raise ConfigError(f'CIFAR class count must be 10 or 100, got {class_count}')
    if not os.path.isfile(path):
        raise DataFormatError(f'CIFAR file not found: {path}')
    label_bytes = CIFAR_LABEL_BYTES[class_count]
    record_size = label_bytes + CIFAR_PIXELS
    with _open(path) as handle:
        data = handle.read()
    if len(data) == 0 or len(data) % record_size != 0:
        raise DataFormatError(f'{path}: {len(data)} bytes is not a whole number of {record_size}-byte records')
    records = np.frombuffer(data, dtype=np.uint8).reshape(-1, record_size)
    labels = records[:, label_bytes - 1].astype(np.int64)
    if labels.max() >= class_count:
        raise DataFormatError(f'{path}: label {labels.max()} is not below the class count {class_count}')
    pixels = records[:, label_bytes:].reshape(-1, CIFAR_CHANNELS, CIFAR_SIDE, CIFAR_SIDE)
    return pixels, labels

def write_cifar_records(path: str, pixels: np.ndarray, labels: np.ndarray, class_count: int = 10, coarse_labels: Optional[np.ndarray] = None) -> str:
    if class_count not in CIFAR_LABEL_BYTES:
        raise ConfigError(f'CIFAR class count must be 10 or 100, got {class_count}')
    pixels = np.asarray(pixels, dtype=np.uint8).reshape(-1, CIFAR_PIXELS)
    labels = np.asarray(labels, dtype=np.uint8).reshape(-1, 1)
    if pixels.shape[0] != labels.shape[0]:
        raise DataFormatError(f'{pixels.shape[0]} images but {labels.shape[0]} labels')
    columns = [labels, pixels]
    if class_count == 100:
        coarse = np.zeros_like(labels) if coarse_labels is None else np.asarray(coarse_labels, dtype=np.uint8).reshape(-1, 1)
        columns.insert(0, coarse)
    with open(path, 'wb') as handle:
        handle.write(np.concatenate(columns, axis=1).tobytes())
    return path

def load_cifar(paths: Sequence[str], class_count: int, channel_mean: Optional[np.ndarray] = None) -> LabeledImageSet:
    '''
    Load CIFAR-10/100 binary files, scale to [0, 1] and subtract the
    per-channel mean.

    Args:
        paths: Binary batch files, concatenated in order.
        class_count: 10 or 100.
        channel_mean: Mean to subtract, as computed on the training split.
            When omitted, the mean of these files is used (the training split).

    Returns:
        The preprocessed set, carrying the mean it subtracted.
    '''
    logger = setup_logger('DatasetParser')
    if isinstance(paths, str):
        paths = [paths]
    if not paths:
        raise ConfigError('No CIFAR files given')
    parts = [read_cifar_records(path, class_count) for path in paths]
    pixels = np.concatenate([part[0] for part in parts])
    labels = np.concatenate([part[1] for part in parts])
    images = pixels.astype(np.float64) / 255.0
    if channel_mean is None:
        channel_mean = images.mean(axis=(0, 2, 3))
    channel_mean = np.asarray(channel_mean, dtype=np.float64)
    if channel_mean.shape != (CIFAR_CHANNELS,):
        raise DataFormatError(f'Channel mean must have {CIFAR_CHANNELS} entries, got shape {channel_mean.shape}')
    images -= channel_mean[np.newaxis, :, np.newaxis, np.newaxis]
    dataset = LabeledImageSet(images, labels, class_count, os.path.basename(paths[0]), channel_mean)
    logger.info(f'Loaded {len(dataset)} CIFAR-{class_count} examples from {len(paths)} file(s); channel mean {np.round(channel_mean, 4).tolist()}')
    return dataset

def load_cifar_splits(train_paths: Sequence[str], test_paths: Sequence[str], class_count: int) -> Tuple[LabeledImageSet, LabeledImageSet]:
    '''
    Load both splits; the test split reuses the training mean.
    '''
    train = load_cifar(train_paths, class_count)
    test = load_cifar(test_paths, class_count, channel_mean=train.channel_mean)
    return train, test
