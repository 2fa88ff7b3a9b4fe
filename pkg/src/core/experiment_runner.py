from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Tuple
from core.dataset_parser import LabeledImageSet, load_mnist, load_cifar_splits
from core.dropout import DropoutPlacement
from core.errors import ConfigError
from core.helpers import setup_logger, init_worker
from core.random_stream import RandomStream
from core.yaml_config import ExperimentConfig, YamlConfig, placement_flags
from network.arch_spec import parse_arch
from network.checkpoint import save_checkpoint, restore_network
from network.network import build_network
from network.trainer import Trainer, evaluate
from utilities.metrics_io import MetricsRecord, write_metrics_csv, write_table_csv
import pandas as pd
import numpy as np
import logging
import os
import time

SWEEP_TEST_MODES = ('max', 'scaled_max', 'prob_weighted')

def run_training(experiment: ExperimentConfig, train_set: LabeledImageSet, test_set: LabeledImageSet, show_progress: bool = False) -> Tuple[List[MetricsRecord], object]:
    '''
    Train one network from the experiment seed and evaluate every
    requested test-pooling mode after each epoch.

    Returns:
        (metrics records, trained network).
    '''
    cfg = experiment.training
    spec = parse_arch(experiment.arch)
    stream = RandomStream(cfg.seed)
    network = build_network(spec, cfg, stream)
    trainer = Trainer(network, cfg, stream, show_progress)
    dtype = cfg.np_dtype
    records = trainer.fit(
        train_set.astype(dtype),
        test_set.astype(dtype),
        experiment.test_modes,
        experiment.train_modes,
        timing=experiment.timing
    )
    return records, network

def _training_job(experiment: ExperimentConfig, train_set: LabeledImageSet, test_set: LabeledImageSet) -> List[MetricsRecord]:
    records, _ = run_training(experiment, train_set, test_set)
    return records

class ExperimentRunner:
    '''
    Front-end behind the train, sweep, placement and evaluate subcommands.
    Every training run of a sweep or placement matrix is independent, so
    they may execute sequentially or in a process pool with identical results.
    '''

    def __init__(self, yaml_config: Optional[YamlConfig] = None, parallel: bool = False, max_workers: int = 0, show_progress: bool = False):
        self.logger = setup_logger('ExperimentRunner')
        self.yaml_config = yaml_config or YamlConfig()
        self.parallel_execution = parallel
        self.max_workers = max_workers or os.cpu_count() or 1
        self.show_progress = show_progress

    def load_datasets(self, experiment: ExperimentConfig) -> Tuple[LabeledImageSet, LabeledImageSet]:
        '''
        Load both splits and cut them to the configured subset sizes.
        '''
        if experiment.dataset == 'mnist':
            if len(experiment.train_paths) != 2 or len(experiment.test_paths) != 2:
                raise ConfigError('MNIST needs [images, labels] paths for both the train and the test split')
            train_set = load_mnist(*experiment.train_paths)
            test_set = load_mnist(*experiment.test_paths)
        else:
            classes = 100 if experiment.dataset == 'cifar100' else 10
            train_set, test_set = load_cifar_splits(experiment.train_paths, experiment.test_paths, classes)
        return train_set.subset(experiment.subset), test_set.subset(experiment.test_subset)

    def _prepare_output(self, experiment: ExperimentConfig) -> str:
        output_path = self.yaml_config.create_output_path(experiment)
        self.yaml_config.save_config_backup(experiment, output_path)
        return output_path

    def run(self, experiment: ExperimentConfig, datasets: Optional[Tuple[LabeledImageSet, LabeledImageSet]] = None) -> str:
        '''
        Train once and write metrics.csv (one row per epoch), the resolved
        configuration, an optional checkpoint and the run report.

        Returns:
            Path of the metrics CSV.
        '''
        start_time = time.time()
        train_set, test_set = datasets or self.load_datasets(experiment)
        output_path = self._prepare_output(experiment)
        records, network = run_training(experiment, train_set, test_set, self.show_progress)
        csv_path = write_metrics_csv(records, os.path.join(output_path, 'metrics.csv'), experiment.test_modes, experiment.train_modes)
        self.logger.info(f'Metrics written to {csv_path}')
        checkpoint_path = None
        if experiment.save_checkpoint:
            checkpoint_path = save_checkpoint(os.path.join(output_path, 'final.pdck'), network, experiment.training.epochs, experiment.training.seed)
        elapsed = time.time() - start_time
        final = records[-1]
        self.yaml_config.render_report({
            'title': f'Training run "{experiment.name}"',
            'experiment': experiment.to_dict(),
            'parameter_count': network.parameter_count,
            'train_count': len(train_set),
            'test_count': len(test_set),
            'final': {
                'epoch': final.epoch,
                'train_error': final.train_error,
                'test_errors': final.test_errors
            },
            'tables': [],
            'artifacts': [path for path in (csv_path, checkpoint_path) if path],
            'elapsed_seconds': elapsed
        }, output_path)
        self.logger.info(f'Run completed in {elapsed:.2f} seconds')
        return csv_path

    def _train_many(self, jobs: List[Tuple[str, ExperimentConfig]], train_set: LabeledImageSet, test_set: LabeledImageSet) -> Dict[str, List[MetricsRecord]]:
        if self.parallel_execution and len(jobs) > 1:
            max_workers = min(len(jobs), self.max_workers)
            self.logger.info(f'Running {len(jobs)} trainings in parallel with {max_workers} workers')
            level = logging.getLogger('ExperimentRunner').level
            with ProcessPoolExecutor(max_workers=max_workers, initializer=init_worker, initargs=(level,)) as executor:
                futures = {label: executor.submit(_training_job, job, train_set, test_set) for label, job in jobs}
                return {label: futures[label].result() for label, _ in jobs}
        results = {}
        for label, job in jobs:
            self.logger.info(f'Starting training "{label}"...')
            results[label] = _training_job(job, train_set, test_set)
        return results

    def sweep_jobs(self, experiment: ExperimentConfig, retain_ps: Sequence[float], include_stochastic: bool) -> List[Tuple[str, ExperimentConfig]]:
        jobs = []
        for p in retain_ps:
            if not 0.0 < p <= 1.0:
                raise ConfigError(f'Retain probabilities must lie in (0, 1], got {p}')
            training = experiment.training.with_overrides(
                pool_train_mode='max_dropout',
                pool_test_mode='prob_weighted',
                dropout=replace(experiment.training.dropout, pool_input=float(p))
            )
            jobs.append((f'p={p:g}', replace(experiment, training=training, test_modes=SWEEP_TEST_MODES, train_modes=())))
        if include_stochastic:
            training = experiment.training.with_overrides(
                pool_train_mode='stochastic',
                pool_test_mode='stochastic_weighted',
                dropout=replace(experiment.training.dropout, pool_input=1.0)
            )
            jobs.append(('stochastic', replace(experiment, training=training, test_modes=('stochastic_weighted',), train_modes=())))
        return jobs

    def sweep(self, experiment: ExperimentConfig, retain_ps: Optional[Sequence[float]] = None, include_stochastic: Optional[bool] = None, datasets=None) -> str:
        '''
        One max-pooling dropout run per retain probability, each evaluated
        with max, scaled max and probabilistic weighted pooling, plus an
        optional stochastic-pooling reference run.

        Returns:
            Path of sweep_summary.csv with one row per (p, mode).
        '''
        retain_ps = tuple(retain_ps if retain_ps is not None else experiment.retain_ps)
        include_stochastic = experiment.include_stochastic if include_stochastic is None else include_stochastic
        jobs = self.sweep_jobs(experiment, retain_ps, include_stochastic)
        train_set, test_set = datasets or self.load_datasets(experiment)
        output_path = self._prepare_output(experiment)
        results = self._train_many(jobs, train_set, test_set)

        rows = []
        for label, job in jobs:
            records = results[label]
            write_metrics_csv(records, os.path.join(output_path, f'metrics_{label.replace("=", "_")}.csv'), job.test_modes)
            retain_p = job.training.dropout.pool_input if job.training.pool_train_mode == 'max_dropout' else float('nan')
            for mode in job.test_modes:
                rows.append({
                    'train_mode': job.training.pool_train_mode,
                    'retain_p': retain_p,
                    'test_mode': mode,
                    'final_train_error': records[-1].train_error,
                    'final_test_error': records[-1].test_errors[mode]
                })
        summary = pd.DataFrame(rows, columns=['train_mode', 'retain_p', 'test_mode', 'final_train_error', 'final_test_error'])
        csv_path = write_table_csv(summary, os.path.join(output_path, 'sweep_summary.csv'))
        self._render_table_report(experiment, output_path, 'Retain-probability sweep', summary, csv_path)
        return csv_path

    def placement_jobs(self, experiment: ExperimentConfig, placements: Sequence[str]) -> List[Tuple[str, ExperimentConfig]]:
        jobs = []
        p = experiment.placement_retain_p
        for placement in placements:
            conv, pool, fc = placement_flags(placement)
            dropout = DropoutPlacement.from_flags(conv, pool, fc, retain_p=p, input_image=experiment.training.dropout.input_image)
            test_mode = 'prob_weighted' if pool else 'max'
            training = experiment.training.with_overrides(
                dropout=dropout,
                pool_train_mode='max_dropout' if pool else 'max',
                pool_test_mode=test_mode
            )
            jobs.append((placement, replace(experiment, training=training, test_modes=(test_mode,), train_modes=(test_mode,))))
        return jobs

    def placement(self, experiment: ExperimentConfig, placements: Optional[Sequence[str]] = None, datasets=None) -> str:
        '''
        The dropout-placement matrix: one run per placement, max-pooling
        dropout runs evaluated with probabilistic weighted pooling.

        Returns:
            Path of placement_summary.csv with one row per placement.
        '''
        jobs = self.placement_jobs(experiment, tuple(placements or experiment.placements))
        train_set, test_set = datasets or self.load_datasets(experiment)
        output_path = self._prepare_output(experiment)
        results = self._train_many(jobs, train_set, test_set)
        rows = []
        for label, job in jobs:
            records = results[label]
            mode = job.test_modes[0]
            write_metrics_csv(records, os.path.join(output_path, f'metrics_{label.replace("+", "_")}.csv'), job.test_modes, job.train_modes)
            rows.append({
                'placement': label,
                'test_mode': mode,
                'final_train_error': records[-1].train_errors[mode],
                'final_test_error': records[-1].test_errors[mode]
            })
        summary = pd.DataFrame(rows, columns=['placement', 'test_mode', 'final_train_error', 'final_test_error'])
        csv_path = write_table_csv(summary, os.path.join(output_path, 'placement_summary.csv'))
        self._render_table_report(experiment, output_path, 'Dropout placement matrix', summary, csv_path)
        return csv_path

    def evaluate_checkpoint(self, checkpoint_path: str, experiment: ExperimentConfig, test_set: Optional[LabeledImageSet] = None) -> pd.DataFrame:
        '''
        Evaluate saved parameters under every requested test-pooling mode.
        '''
        if test_set is None:
            _, test_set = self.load_datasets(experiment)
        network = restore_network(checkpoint_path, experiment.training)
        if network.spec.input_shape != test_set.image_shape:
            raise ConfigError(f'Checkpoint input {network.spec.input_shape} does not match the data {test_set.image_shape}')
        data = test_set.astype(experiment.training.np_dtype)
        rows = []
        for mode in experiment.test_modes:
            error = evaluate(network, data, mode)
            self.logger.info(f'{checkpoint_path}: test error under {mode} pooling = {error:.4f}')
            rows.append({'test_mode': mode, 'test_error': error})
        return pd.DataFrame(rows, columns=['test_mode', 'test_error'])

    def _render_table_report(self, experiment: ExperimentConfig, output_path: str, title: str, summary: pd.DataFrame, csv_path: str):
        self.yaml_config.render_report({
            'title': f'{title} "{experiment.name}"',
            'experiment': experiment.to_dict(),
            'parameter_count': None,
            'final': None,
            'tables': [{'name': title, 'markdown': _markdown_table(summary)}],
            'artifacts': [csv_path],
            'elapsed_seconds': None
        }, output_path)

def _markdown_table(frame: pd.DataFrame) -> str:
    header = '| ' + ' | '.join(frame.columns) + ' |'
    rule = '|' + '|'.join(' --- ' for _ in frame.columns) + '|'
    lines = [header, rule]
    for row in frame.itertuples(index=False):
        cells = [f'{value:.4f}' if isinstance(value, (float, np.floating)) else str(value) for value in row]
        lines.append('| ' + ' | '.join(cells) + ' |')
    return '\n'.join(lines)
