'''
Download MNIST, CIFAR-10 and CIFAR-100 into the directories the shipped
configurations point at:

    data/mnist/                  IDX files (gzip-compressed, read as-is)
    data/cifar-10-batches-bin/   data_batch_1..5.bin, test_batch.bin
    data/cifar-100-binary/       train.bin, test.bin

Usage:
    python toolchain/fetch_datasets.py mnist cifar10 --data-dir data
'''
from tqdm import tqdm
import argparse
import requests
import tarfile
import sys
import os

MNIST_URL = 'https://ossci-datasets.s3.amazonaws.com/mnist'
MNIST_FILES = (
    'train-images-idx3-ubyte.gz',
    'train-labels-idx1-ubyte.gz',
    't10k-images-idx3-ubyte.gz',
    't10k-labels-idx1-ubyte.gz'
)
CIFAR_ARCHIVES = {
    'cifar10': ('https://www.cs.toronto.edu/~kriz/cifar-10-binary.tar.gz', 'cifar-10-batches-bin'),
    'cifar100': ('https://www.cs.toronto.edu/~kriz/cifar-100-binary.tar.gz', 'cifar-100-binary')
}
CHUNK_SIZE = 1 << 16

def download(url: str, destination: str) -> str:
    '''
    Stream `url` into `destination`, skipping files that already exist.

    Raises:
        RuntimeError: If the server does not answer with 200.
    '''
    if os.path.isfile(destination):
        print(f'{destination} already present, skipping.')
        return destination
    response = requests.get(url, stream=True, timeout=60)
    if response.status_code != 200:
        raise RuntimeError(f'Download of {url} failed with HTTP {response.status_code}')
    total = int(response.headers.get('content-length', 0)) or None
    partial = f'{destination}.part'
    with open(partial, 'wb') as file, tqdm(total=total, unit='B', unit_scale=True, desc=os.path.basename(destination)) as progress:
        for chunk in response.iter_content(CHUNK_SIZE):
            file.write(chunk)
            progress.update(len(chunk))
    os.replace(partial, destination)
    return destination

def fetch_mnist(data_dir: str):
    target = os.path.join(data_dir, 'mnist')
    os.makedirs(target, exist_ok=True)
    for name in MNIST_FILES:
        download(f'{MNIST_URL}/{name}', os.path.join(target, name))
    print(f'MNIST ready in {target}')

def fetch_cifar(name: str, data_dir: str):
    url, folder = CIFAR_ARCHIVES[name]
    os.makedirs(data_dir, exist_ok=True)
    archive = download(url, os.path.join(data_dir, os.path.basename(url)))
    if not os.path.isdir(os.path.join(data_dir, folder)):
        with tarfile.open(archive, 'r:gz') as tar:
            if hasattr(tarfile, 'data_filter'):
                tar.extractall(data_dir, filter='data')
            else:
                tar.extractall(data_dir)
    print(f'{name.upper()} ready in {os.path.join(data_dir, folder)}')

def main():
    parser = argparse.ArgumentParser(description='Fetch the datasets used by pooldrop experiments.')
    parser.add_argument('datasets', nargs='+', choices=['mnist', 'cifar10', 'cifar100'])
    parser.add_argument('--data-dir', default='data', help='Root folder for the downloads. Default: data/')
    args = parser.parse_args()
    try:
        for name in args.datasets:
            if name == 'mnist':
                fetch_mnist(args.data_dir)
            else:
                fetch_cifar(name, args.data_dir)
    except (RuntimeError, OSError, requests.RequestException, tarfile.TarError) as e:
        sys.exit(f'Error: {e}')

if __name__ == '__main__':
    main()
