from conftest import synthetic_digits
from core.dataset_parser import (
    IDX_IMAGES_MAGIC, IDX_LABELS_MAGIC, LabeledImageSet, load_cifar, load_cifar_splits, load_mnist,
    read_cifar_records, read_idx, write_cifar_records, write_idx
)
from core.errors import ConfigError, DataFormatError
import numpy as np
import pytest
import struct

def write_mnist(directory, count, suffix=''):
    images, labels = synthetic_digits(count, seed=count)
    image_path = write_idx(str(directory / f'images-idx3-ubyte{suffix}'), images)
    label_path = write_idx(str(directory / f'labels-idx1-ubyte{suffix}'), labels)
    return image_path, label_path, images, labels

def test_mnist_split(tmp_path):
    image_path, label_path, images, labels = write_mnist(tmp_path, 12)
    dataset = load_mnist(image_path, label_path)
    assert len(dataset) == 12
    assert dataset.image_shape == (1, 28, 28)
    assert dataset.class_count == 10
    assert 0.0 <= dataset.images.min() and dataset.images.max() <= 1.0
    np.testing.assert_allclose(dataset.images[:, 0], images / 255.0)
    np.testing.assert_array_equal(dataset.labels, labels)

def test_gzip_files_read_the_same(tmp_path):
    plain = load_mnist(*write_mnist(tmp_path, 5)[:2])
    packed = load_mnist(*write_mnist(tmp_path, 5, '.gz')[:2])
    np.testing.assert_array_equal(plain.images, packed.images)

def test_idx_header_layout(tmp_path):
    path = write_idx(str(tmp_path / 'labels'), np.arange(3, dtype=np.uint8))
    data = open(path, 'rb').read()
    assert struct.unpack('>II', data[:8]) == (IDX_LABELS_MAGIC, 3)
    assert data[8:] == bytes([0, 1, 2])

def test_bad_idx_magic(tmp_path):
    _, label_path, _, _ = write_mnist(tmp_path, 4)
    with pytest.raises(DataFormatError, match='magic'):
        read_idx(label_path, IDX_IMAGES_MAGIC)

def test_truncated_idx_payload(tmp_path):
    image_path, _, _, _ = write_mnist(tmp_path, 4)
    data = open(image_path, 'rb').read()
    open(image_path, 'wb').write(data[:-10])
    with pytest.raises(DataFormatError, match='truncated'):
        read_idx(image_path, IDX_IMAGES_MAGIC)

def test_image_label_count_mismatch(tmp_path):
    image_path, _, _, _ = write_mnist(tmp_path, 6)
    label_path = write_idx(str(tmp_path / 'short-labels'), np.zeros(5, dtype=np.uint8))
    with pytest.raises(DataFormatError, match='5 labels'):
        load_mnist(image_path, label_path)

def test_missing_file(tmp_path):
    with pytest.raises(DataFormatError, match='not found'):
        read_idx(str(tmp_path / 'nothing'))

def cifar_pixels(count, seed=0):
    return np.random.default_rng(seed).integers(0, 256, size=(count, 3, 32, 32), dtype=np.uint8)

def test_cifar10_records(tmp_path):
    pixels = cifar_pixels(4)
    path = write_cifar_records(str(tmp_path / 'data_batch_1.bin'), pixels, [3, 1, 4, 1])
    read_pixels, labels = read_cifar_records(path, 10)
    np.testing.assert_array_equal(read_pixels, pixels)
    assert labels.tolist() == [3, 1, 4, 1]

def test_cifar100_keeps_the_fine_label(tmp_path):
    path = write_cifar_records(str(tmp_path / 'train.bin'), cifar_pixels(3), [55, 0, 99], 100, coarse_labels=[7, 8, 9])
    _, labels = read_cifar_records(path, 100)
    assert labels.tolist() == [55, 0, 99]

def test_cifar_record_size_mismatch(tmp_path):
    path = write_cifar_records(str(tmp_path / 'batch.bin'), cifar_pixels(2), [0, 1])
    data = open(path, 'rb').read()
    open(path, 'wb').write(data[:-1])
    with pytest.raises(DataFormatError, match='records'):
        read_cifar_records(path, 10)

def test_cifar_label_out_of_range(tmp_path):
    path = write_cifar_records(str(tmp_path / 'batch.bin'), cifar_pixels(2), [0, 12])
    with pytest.raises(DataFormatError, match='class count'):
        read_cifar_records(path, 10)

def test_cifar_test_split_reuses_the_training_mean(tmp_path):
    train_paths = [
        write_cifar_records(str(tmp_path / f'data_batch_{index}.bin'), cifar_pixels(5, index), np.arange(5))
        for index in (1, 2)
    ]
    test_path = write_cifar_records(str(tmp_path / 'test_batch.bin'), cifar_pixels(5, 9), np.arange(5))
    train, test = load_cifar_splits(train_paths, [test_path], 10)
    assert len(train) == 10 and train.image_shape == (3, 32, 32)
    np.testing.assert_allclose(train.images.mean(axis=(0, 2, 3)), 0.0, atol=1e-12)
    np.testing.assert_array_equal(test.channel_mean, train.channel_mean)
    raw = cifar_pixels(5, 9).astype(np.float64) / 255.0
    np.testing.assert_allclose(test.images, raw - train.channel_mean[np.newaxis, :, np.newaxis, np.newaxis])

def test_cifar_class_count_must_be_known(tmp_path):
    with pytest.raises(ConfigError):
        load_cifar([str(tmp_path / 'x.bin')], 20)

def test_labeled_set_validation():
    with pytest.raises(DataFormatError):
        LabeledImageSet(np.zeros((2, 28, 28)), np.zeros(2, dtype=np.int64), 10)
    with pytest.raises(DataFormatError):
        LabeledImageSet(np.zeros((2, 1, 28, 28)), np.zeros(3, dtype=np.int64), 10)
    with pytest.raises(DataFormatError):
        LabeledImageSet(np.zeros((2, 1, 28, 28)), np.array([0, 10]), 10)

def test_subset_takes_the_first_examples():
    dataset = LabeledImageSet(np.arange(5.0).reshape(5, 1, 1, 1), np.arange(5), 10, 'digits')
    subset = dataset.subset(3)
    assert subset.labels.tolist() == [0, 1, 2]
    assert dataset.subset(None) is dataset
    with pytest.raises(ConfigError):
        dataset.subset(6)
    with pytest.raises(ConfigError):
        dataset.subset(0)
    assert dataset.astype(np.float32).images.dtype == np.float32

def test_full_intensity_byte_scales_to_one(tmp_path):
    images = np.zeros((1, 28, 28), dtype=np.uint8)
    images[0, 3, 4] = 255
    dataset = load_mnist(write_idx(str(tmp_path / 'images'), images), write_idx(str(tmp_path / 'labels'), np.array([7], dtype=np.uint8)))
    assert dataset.images[0, 0, 3, 4] == 1.0
    assert dataset.images.max() == 1.0

def test_blank_images_load_as_zeros(tmp_path):
    image_path = write_idx(str(tmp_path / 'images'), np.zeros((3, 28, 28), dtype=np.uint8))
    label_path = write_idx(str(tmp_path / 'labels'), np.array([4, 0, 9], dtype=np.uint8))
    dataset = load_mnist(image_path, label_path)
    assert dataset.images.shape == (3, 1, 28, 28)
    assert not dataset.images.any()
    assert dataset.labels.tolist() == [4, 0, 9]

def test_constant_channels_center_to_zero(tmp_path):
    pixels = np.empty((1, 3, 32, 32), dtype=np.uint8)
    for channel, value in enumerate((17, 128, 255)):
        pixels[0, channel] = value
    dataset = load_cifar([write_cifar_records(str(tmp_path / 'one.bin'), pixels, [2])], 10)
    np.testing.assert_allclose(dataset.images, 0.0, atol=1e-15)
    np.testing.assert_allclose(dataset.channel_mean, np.array([17, 128, 255]) / 255.0)

def test_loading_twice_gives_identical_tensors(tmp_path):
    image_path, label_path, _, _ = write_mnist(tmp_path, 8)
    first = load_mnist(image_path, label_path)
    second = load_mnist(image_path, label_path)
    np.testing.assert_array_equal(first.images, second.images)
    np.testing.assert_array_equal(first.labels, second.labels)
    cifar_path = write_cifar_records(str(tmp_path / 'batch.bin'), cifar_pixels(3), [0, 1, 2])
    np.testing.assert_array_equal(load_cifar([cifar_path], 10).images, load_cifar([cifar_path], 10).images)
