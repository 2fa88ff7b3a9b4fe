from core.yaml_config import YamlConfig
from core.experiment_runner import ExperimentRunner
from core.helpers import set_log_level, setup_logger
from core.errors import DivergenceError, NonFiniteError
from analyzers.model_count_analyzer import ModelCountAnalyzer
from analyzers.oracle_analyzer import OracleAnalyzer
from pooling.pool_spec import TEST_MODES
from utilities.metrics_io import write_table_csv

import argparse
import logging
import numpy as np
import os
import sys

def _common_arguments() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument(
        '--config',
        help='Experiment configuration in YAML format'
    )
    parent.add_argument(
        '--arch',
        help='Architecture string, e.g. 1x28x28-6C5-2P2-12C5-2P2-100N-10N'
    )
    parent.add_argument(
        '--seed',
        type=int,
        help='Experiment seed; every random draw derives from it.'
    )
    parent.add_argument(
        '--epochs',
        type=int,
        help='Number of training epochs (learning-rate drops move to 50%% and 75%% of the run).'
    )
    parent.add_argument(
        '--subset',
        type=int,
        help='Train on the first N training examples only.'
    )
    parent.add_argument(
        '--test-modes',
        type=lambda text: [mode.strip() for mode in text.split(',') if mode.strip()],
        help=f'Comma-separated test-pooling modes. Options: {", ".join(TEST_MODES)}'
    )
    parent.add_argument(
        '--out',
        help='Output directory. Default: experiment_results/<name>/<timestamp>/'
    )
    parent.add_argument(
        '--log-level',
        default='INFO',
        choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
        help='Level of every component logger.'
    )
    return parent

def parse_args(argv=None):
    parser = argparse.ArgumentParser(
        description='Train convolutional networks with max-pooling dropout, probabilistic weighted pooling and stochastic pooling.'
    )
    common = _common_arguments()
    commands = parser.add_subparsers(dest='command', required=True)

    train = commands.add_parser('train', parents=[common], help='Train once and evaluate every test-pooling mode each epoch.')
    train.add_argument('--progress', action='store_true', help='Show a progress bar over mini-batches.')

    for name, description in (
        ('sweep', 'One max-pooling dropout run per retaining probability.'),
        ('placement', 'Dropout placement matrix (none, fc, conv, pool, conv+pool, conv+fc, pool+fc).')
    ):
        command = commands.add_parser(name, parents=[common], help=description)
        command.add_argument(
            '--parallel',
            action='store_true',
            help='Run the independent trainings in a process pool; results are identical.'
        )
        command.add_argument(
            '--max-workers',
            type=int,
            default=0,
            help='Maximum number of parallel workers. Default: number of CPU cores.'
        )
    commands.choices['sweep'].add_argument(
        '--retain-ps',
        type=lambda text: [float(p) for p in text.split(',') if p.strip()],
        help='Comma-separated retaining probabilities, e.g. 0.3,0.5,0.7'
    )
    commands.choices['sweep'].add_argument(
        '--no-stochastic',
        action='store_true',
        help='Skip the stochastic-pooling reference run.'
    )
    commands.choices['placement'].add_argument(
        '--placements',
        type=lambda text: [p.strip() for p in text.split(',') if p.strip()],
        help='Comma-separated placements, e.g. none,pool,pool+fc'
    )

    count = commands.add_parser('count', parents=[common], help='Model-count tables: bases b(t), log counts and their ratio.')
    count.add_argument('--r', type=int, default=96, help='Feature maps.')
    count.add_argument('--s', type=int, default=1024, help='Units per feature map.')
    count.add_argument('--t', type=int, default=4, help='Pooling region size in units.')
    count.add_argument('--t-max', type=int, default=64, help='Largest region size in the base table.')
    count.add_argument('--filter-side', type=int, help='Also count conv-dropout configurations for this filter side.')
    count.add_argument('--map-side', type=int, default=32, help='Feature map side for the conv-dropout count.')

    gradcheck = commands.add_parser('gradcheck', parents=[common], help='Run the oracle suites.')
    gradcheck.add_argument(
        '--suite',
        action='append',
        help='Suite to run (repeatable). Options: multinomial, expectation, stochastic, counting, gradients, parser'
    )
    gradcheck.add_argument('--parallel', action='store_true', help='Run suites in a process pool.')
    gradcheck.add_argument('--max-workers', type=int, default=0)

    commands.add_parser('inspect-data', parents=[common], help='Counts, shape, value range, class histogram and channel means.')

    evaluate = commands.add_parser('evaluate', parents=[common], help='Evaluate a saved checkpoint under test-pooling modes.')
    evaluate.add_argument('--checkpoint', required=True, help='Checkpoint written by `train` (save_checkpoint: true).')

    plot = commands.add_parser('plot', parents=[common], help='Render metrics, sweep and model-count figures.')
    plot.add_argument('--metrics', help='metrics.csv of a training run.')
    plot.add_argument('--sweep-summary', help='sweep_summary.csv of a sweep.')
    plot.add_argument('--bases', action='store_true', help='Plot b(t) for both pooling flavors.')
    return parser.parse_args(argv)

def load_experiment(args):
    config = YamlConfig(args.config)
    if not config.load_config():
        sys.exit('Error: failed to load YAML configuration.')
    config.apply_overrides(
        arch=args.arch,
        seed=args.seed,
        epochs=args.epochs,
        subset=args.subset,
        test_modes=args.test_modes,
        out=args.out
    )
    return config, config.build_experiment()

def run_count(args):
    analyzer = ModelCountAnalyzer()
    bases = analyzer.get_base_table(args.t_max)
    summary = analyzer.get_count_summary(args.r, args.s, args.t)
    print(bases.to_string(index=False, float_format=lambda value: f'{value:.6f}'))
    print(f'\nstochastic base peaks at t = {analyzer.get_stochastic_peak(args.t_max)}\n')
    print(f'r={args.r}, s={args.s}, t={args.t}')
    print(summary.to_string(index=False, float_format=lambda value: f'{value:.4f}'))
    if args.filter_side:
        conv = analyzer.get_conv_summary(args.r, args.map_side, args.filter_side)
        print(conv.to_string(index=False, float_format=lambda value: f'{value:.4f}'))
    if args.out:
        write_table_csv(bases, os.path.join(args.out, 'count_bases.csv'))
        write_table_csv(summary, os.path.join(args.out, 'count_summary.csv'))
        print(f'\nTables written to {args.out}')

def run_gradcheck(args):
    analyzer = OracleAnalyzer(seed=args.seed or 0, parallel=args.parallel, max_workers=args.max_workers)
    results = analyzer.run_suites(args.suite)
    failed = [result.name for result in results if not result.passed]
    if failed:
        sys.exit(f'Error: oracle suite(s) failed: {", ".join(failed)}')
    print(f'All {len(results)} oracle suites passed.')

def run_inspect(args):
    _, experiment = load_experiment(args)
    runner = ExperimentRunner()
    train_set, test_set = runner.load_datasets(experiment)
    for split, dataset in (('train', train_set), ('test', test_set)):
        histogram = np.bincount(dataset.labels, minlength=dataset.class_count)
        print(f'[{split}] {len(dataset)} examples of shape {dataset.image_shape}, {dataset.class_count} classes')
        print(f'  value range: [{dataset.images.min():.4f}, {dataset.images.max():.4f}]')
        print(f'  per-channel mean after preprocessing: {np.round(dataset.images.mean(axis=(0, 2, 3)), 6).tolist()}')
        if dataset.channel_mean is not None:
            print(f'  subtracted channel mean: {np.round(dataset.channel_mean, 6).tolist()}')
        print(f'  examples per class: {histogram.tolist()}')

def run_evaluate(args):
    _, experiment = load_experiment(args)
    runner = ExperimentRunner()
    table = runner.evaluate_checkpoint(args.checkpoint, experiment)
    print(table.to_string(index=False, float_format=lambda value: f'{value:.4f}'))
    if args.out:
        write_table_csv(table, os.path.join(args.out, 'checkpoint_evaluation.csv'))

def run_plot(args):
    from visualizers import MetricsVisualizer, SweepVisualizer, CountVisualizer
    output_dir = args.out or '.'
    written = []
    if args.metrics:
        written.append(MetricsVisualizer(args.metrics).plot_error_curves(output_dir))
    if args.sweep_summary:
        written.append(SweepVisualizer(args.sweep_summary).plot_retain_sweep(output_dir))
    if args.bases:
        written.append(CountVisualizer().plot_bases(output_dir))
    if not written:
        sys.exit('Error: nothing to plot; pass --metrics, --sweep-summary or --bases.')
    for path in written:
        print(f'Figure saved to {path}')

def main(argv=None):
    args = parse_args(argv)
    set_log_level(getattr(logging, args.log_level))
    logger = setup_logger('Main')

    try:
        if args.command == 'count':
            run_count(args)
        elif args.command == 'gradcheck':
            run_gradcheck(args)
        elif args.command == 'inspect-data':
            run_inspect(args)
        elif args.command == 'evaluate':
            run_evaluate(args)
        elif args.command == 'plot':
            run_plot(args)
        else:
            config, experiment = load_experiment(args)
            if args.command == 'train':
                runner = ExperimentRunner(config, show_progress=args.progress)
                path = runner.run(experiment)
            elif args.command == 'sweep':
                runner = ExperimentRunner(config, parallel=args.parallel, max_workers=args.max_workers)
                path = runner.sweep(experiment, args.retain_ps, False if args.no_stochastic else None)
            else:
                runner = ExperimentRunner(config, parallel=args.parallel, max_workers=args.max_workers)
                path = runner.placement(experiment, args.placements)
            print(f'\nResults available at: {os.path.dirname(path)}')
    except (ValueError, DivergenceError, NonFiniteError, OSError) as e:
        logger.error(str(e))
        sys.exit(f'Error: {e}')
    sys.exit(0)

if __name__ == '__main__':
    main()
