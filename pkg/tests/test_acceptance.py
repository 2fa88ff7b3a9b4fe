'''
Desk-scale MNIST runs. They need the official MNIST files in
$POOLDROP_MNIST_DIR (see toolchain/fetch_datasets.py) and take minutes each:

    POOLDROP_MNIST_DIR=data/mnist poetry run pytest -m slow
'''
from analyzers.oracle_analyzer import OracleAnalyzer
from core.experiment_runner import ExperimentRunner, run_training
from core.yaml_config import YamlConfig
import numpy as np
import pytest
import yaml
import os

MNIST_DIR = os.environ.get('POOLDROP_MNIST_DIR')
DESK_ARCH = '1x28x28-6C5-2P2-12C5-2P2-100N-10N'

needs_mnist = pytest.mark.skipif(not MNIST_DIR, reason='POOLDROP_MNIST_DIR is not set')

def desk_experiment(tmp_path, name, seed=0, **sections):
    config = {
        'experiment': {'name': name},
        'architecture': DESK_ARCH,
        'dataset': {'name': 'mnist', 'directory': MNIST_DIR, 'subset': 10000},
        'training': {'epochs': 30, 'batch_size': 100, 'learning_rate': 0.1, 'momentum': 0.95, 'seed': seed},
        **sections
    }
    path = tmp_path / f'{name}_{seed}.yml'
    path.write_text(yaml.safe_dump(config))
    yaml_config = YamlConfig(str(path))
    assert yaml_config.load_config()
    return yaml_config.build_experiment()

@pytest.fixture(scope='module')
def mnist_splits(tmp_path_factory):
    experiment = desk_experiment(tmp_path_factory.mktemp('desk'), 'loading')
    return ExperimentRunner().load_datasets(experiment)

def final_errors(experiment, splits):
    records, _ = run_training(experiment, *splits)
    return records[-1].test_errors

MAXPOOL_DROPOUT = {
    'dropout': {'pool_input': 0.5},
    'pooling': {'train_mode': 'max_dropout', 'test_modes': ['prob_weighted', 'scaled_max', 'max']}
}

@pytest.mark.slow
def test_oracle_suites_at_full_size():
    results = OracleAnalyzer(seed=0).run_suites()
    assert all(result.passed for result in results), [result.detail for result in results if not result.passed]

@pytest.mark.slow
@needs_mnist
def test_maxpool_dropout_does_not_hurt_the_baseline(tmp_path, mnist_splits):
    baseline = final_errors(desk_experiment(tmp_path, 'baseline', pooling={'train_mode': 'max', 'test_modes': ['max']}), mnist_splits)
    assert baseline['max'] <= 0.03
    dropout = final_errors(desk_experiment(tmp_path, 'maxpool_dropout', **MAXPOOL_DROPOUT), mnist_splits)
    assert dropout['prob_weighted'] <= baseline['max'] + 0.005

@pytest.mark.slow
@needs_mnist
@pytest.mark.xfail(strict=False, reason='the pooling-mode ordering may not show after only 30 epochs')
def test_pooling_mode_ordering_across_seeds(tmp_path, mnist_splits):
    errors = [final_errors(desk_experiment(tmp_path, 'ordering', seed, **MAXPOOL_DROPOUT), mnist_splits) for seed in range(5)]
    medians = {mode: np.median([run[mode] for run in errors]) for mode in ('prob_weighted', 'scaled_max', 'max')}
    assert medians['prob_weighted'] <= medians['scaled_max'] <= medians['max']
