from core.dataset_parser import write_idx
from core.random_stream import RandomStream
import numpy as np
import pytest
import yaml
import os

os.environ.setdefault('MPLBACKEND', 'Agg')

TINY_MNIST_ARCH = '1x28x28-4C5-4P4-10N'

def synthetic_digits(count: int, seed: int = 0):
    '''
    28x28 uint8 images whose class is the position of a bright 6x6 block,
    on a faint noisy background. Labels cycle through 0..9.
    '''
    generator = np.random.default_rng(seed)
    labels = (np.arange(count) % 10).astype(np.uint8)
    images = generator.integers(0, 25, size=(count, 28, 28), dtype=np.uint8)
    for index, label in enumerate(labels):
        row = 2 + 12 * (label // 5)
        col = 1 + 5 * (label % 5)
        images[index, row:row + 6, col:col + 6] = 230
    return images, labels

@pytest.fixture
def stream():
    return RandomStream(1234)

@pytest.fixture
def rng():
    return np.random.default_rng(2024)

@pytest.fixture
def mnist_dir(tmp_path):
    '''
    A directory laid out like the official MNIST download, with 60 training
    and 30 test examples.
    '''
    directory = tmp_path / 'mnist'
    directory.mkdir()
    train_images, train_labels = synthetic_digits(60, seed=1)
    test_images, test_labels = synthetic_digits(30, seed=2)
    write_idx(str(directory / 'train-images-idx3-ubyte'), train_images)
    write_idx(str(directory / 'train-labels-idx1-ubyte'), train_labels)
    write_idx(str(directory / 't10k-images-idx3-ubyte'), test_images)
    write_idx(str(directory / 't10k-labels-idx1-ubyte'), test_labels)
    return directory

@pytest.fixture
def experiment_yaml(tmp_path, mnist_dir):
    '''
    Factory writing a small MNIST experiment file; keyword arguments are
    merged into the top-level sections.
    '''
    def write(name: str = 'tiny', **sections) -> str:
        config = {
            'experiment': {'name': name},
            'architecture': TINY_MNIST_ARCH,
            'dataset': {'name': 'mnist', 'directory': str(mnist_dir)},
            'training': {'epochs': 2, 'batch_size': 10, 'learning_rate': 0.01, 'momentum': 0.9, 'seed': 7},
            'pooling': {'train_mode': 'max', 'test_modes': ['max']}
        }
        for section, values in sections.items():
            if isinstance(values, dict) and isinstance(config.get(section), dict):
                config[section] = {**config[section], **values}
            else:
                config[section] = values
        path = tmp_path / f'{name}.yml'
        with open(path, 'w') as file:
            yaml.safe_dump(config, file)
        return str(path)
    return write
