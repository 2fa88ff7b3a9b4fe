from dataclasses import dataclass, field, asdict
from jinja2 import Environment, FileSystemLoader
from typing import Any, Dict, List, Optional, Sequence, Tuple
from core.dropout import DropoutPlacement
from core.errors import ConfigError
from core.helpers import setup_logger
from network.arch_spec import parse_arch
from network.train_config import TrainConfig
from pooling.pool_spec import TEST_MODES
import os
import yaml
import datetime

SCRIPT_DIR = os.path.dirname(os.path.abspath(__file__))
TEMPLATES_DIR = os.path.join(SCRIPT_DIR, '..', 'templates')
REPORT_TEMPLATE = os.path.join(TEMPLATES_DIR, 'base', 'report.md.j2')
PROJECT_ROOT = os.path.dirname(os.path.dirname(SCRIPT_DIR))
RESULTS_DIR = os.path.join(PROJECT_ROOT, 'experiment_results')

DATASETS = ('mnist', 'cifar10', 'cifar100')
DEFAULT_ARCH = '1x28x28-6C5-2P2-12C5-2P2-100N-10N'

# File names inside `dataset.directory` when explicit paths are not given.
DEFAULT_FILES = {
    'mnist': {
        'train': ['train-images-idx3-ubyte', 'train-labels-idx1-ubyte'],
        'test': ['t10k-images-idx3-ubyte', 't10k-labels-idx1-ubyte']
    },
    'cifar10': {
        'train': [f'data_batch_{index}.bin' for index in range(1, 6)],
        'test': ['test_batch.bin']
    },
    'cifar100': {
        'train': ['train.bin'],
        'test': ['test.bin']
    }
}

KNOWN_SECTIONS = {
    'experiment': ('name', 'output', 'save_checkpoint'),
    'architecture': None,
    'dataset': ('name', 'directory', 'train', 'test', 'subset', 'test_subset'),
    'training': ('batch_size', 'momentum', 'learning_rate', 'epochs', 'lr_drop_epochs', 'seed', 'dtype', 'init_std'),
    'dropout': ('conv_input', 'pool_input', 'fc_input', 'first_fc_input', 'input_image'),
    'pooling': ('train_mode', 'multinomial_path', 'test_modes'),
    'report': ('timing', 'evaluate_train_modes'),
    'sweep': ('retain_ps', 'include_stochastic'),
    'placement': ('placements', 'retain_p')
}

@dataclass
class ExperimentConfig:
    '''
    Everything one experiment needs, validated before any training starts.

    Attributes:
        name: Experiment name, used for the output folder.
        arch: Architecture string.
        dataset: 'mnist', 'cifar10' or 'cifar100'.
        train_paths: Files of the training split (MNIST: images, labels).
        test_paths: Files of the test split.
        subset: Use only the first `subset` training examples.
        test_subset: Use only the first `test_subset` test examples.
        training: Optimizer, schedule, dropout and pooling configuration.
        test_modes: Test-pooling modes evaluated on the test set each epoch.
        train_modes: Test-pooling modes also evaluated on the training set.
        timing: Record wall-clock seconds per epoch in the CSV.
        output: Output directory; a timestamped folder when omitted.
        save_checkpoint: Write the final parameters next to the metrics.
        retain_ps: Retain probabilities of the `sweep` subcommand.
        include_stochastic: Add a stochastic-pooling run to the sweep.
        placements: Dropout placements of the `placement` subcommand.
        placement_retain_p: Retain probability used by placement runs.
    '''
    name: str = 'experiment'
    arch: str = DEFAULT_ARCH
    dataset: str = 'mnist'
    train_paths: List[str] = field(default_factory=list)
    test_paths: List[str] = field(default_factory=list)
    subset: Optional[int] = None
    test_subset: Optional[int] = None
    training: TrainConfig = field(default_factory=TrainConfig)
    test_modes: Tuple[str, ...] = ('max',)
    train_modes: Tuple[str, ...] = ()
    timing: bool = False
    output: Optional[str] = None
    save_checkpoint: bool = False
    retain_ps: Tuple[float, ...] = (0.1, 0.3, 0.5, 0.7, 0.9, 1.0)
    include_stochastic: bool = True
    placements: Tuple[str, ...] = ('none', 'fc', 'conv', 'pool', 'conv+pool', 'conv+fc', 'pool+fc')
    placement_retain_p: float = 0.5

    def validate(self):
        '''
        Raises:
            ConfigError: For unknown datasets or modes, bad subset sizes,
                retain probabilities outside (0, 1] or an architecture
                whose input does not match the dataset.
            ArchitectureError: For a malformed architecture string.
        '''
        spec = parse_arch(self.arch)
        if self.dataset not in DATASETS:
            raise ConfigError(f'Unknown dataset "{self.dataset}". Options: {", ".join(DATASETS)}')
        expected_input = (1, 28, 28) if self.dataset == 'mnist' else (3, 32, 32)
        if spec.input_shape != expected_input:
            raise ConfigError(f'Architecture input {spec.input_shape} does not match {self.dataset} images {expected_input}')
        classes = 100 if self.dataset == 'cifar100' else 10
        if spec.class_count != classes:
            raise ConfigError(f'Classifier has {spec.class_count} units but {self.dataset} has {classes} classes')
        for name in ('subset', 'test_subset'):
            value = getattr(self, name)
            if value is not None and (not isinstance(value, int) or value < 1):
                raise ConfigError(f'"{name}" must be a positive integer, got {value!r}')
        if not self.test_modes:
            raise ConfigError('At least one test-pooling mode is required')
        for mode in (*self.test_modes, *self.train_modes):
            if mode not in TEST_MODES:
                raise ConfigError(f'Unknown test-pooling mode "{mode}". Options: {", ".join(TEST_MODES)}')
        for p in (*self.retain_ps, self.placement_retain_p):
            if not 0.0 < p <= 1.0:
                raise ConfigError(f'Retain probabilities must lie in (0, 1], got {p}')
        for placement in self.placements:
            placement_flags(placement)
        return self

    def to_dict(self) -> Dict[str, Any]:
        training = asdict(self.training)
        dropout = training.pop('dropout')
        return {
            'experiment': {'name': self.name, 'output': self.output, 'save_checkpoint': self.save_checkpoint},
            'architecture': self.arch,
            'dataset': {
                'name': self.dataset,
                'train': list(self.train_paths),
                'test': list(self.test_paths),
                'subset': self.subset,
                'test_subset': self.test_subset
            },
            'training': {
                'batch_size': training['batch_size'],
                'momentum': training['momentum'],
                'learning_rate': training['learning_rate'],
                'epochs': training['epochs'],
                'lr_drop_epochs': list(training['lr_drop_epochs']),
                'seed': training['seed'],
                'dtype': training['dtype'],
                'init_std': training['init_std']
            },
            'dropout': dropout,
            'pooling': {
                'train_mode': training['pool_train_mode'],
                'multinomial_path': training['multinomial_path'],
                'test_modes': list(self.test_modes)
            },
            'report': {'timing': self.timing, 'evaluate_train_modes': list(self.train_modes)},
            'sweep': {'retain_ps': list(self.retain_ps), 'include_stochastic': self.include_stochastic},
            'placement': {'placements': list(self.placements), 'retain_p': self.placement_retain_p}
        }

def placement_flags(placement: str) -> Tuple[bool, bool, bool]:
    '''
    'none', or '+'-joined sites among conv, pool and fc, e.g. 'conv+fc'.

    Returns:
        (conv, pool, fc) flags.
    '''
    if placement == 'none':
        return False, False, False
    sites = placement.split('+')
    unknown = [site for site in sites if site not in ('conv', 'pool', 'fc')]
    if unknown or len(set(sites)) != len(sites):
        raise ConfigError(f'Unknown dropout placement "{placement}". Use "none" or sites among conv, pool, fc joined by "+"')
    return 'conv' in sites, 'pool' in sites, 'fc' in sites

def _resolve(directory: Optional[str], names: Sequence[str]) -> List[str]:
    paths = []
    for name in names:
        path = os.path.join(directory, name) if directory and not os.path.isabs(name) else name
        if not os.path.exists(path) and os.path.exists(f'{path}.gz'):
            path = f'{path}.gz'
        paths.append(path)
    return paths

class YamlConfig:
    '''
    YamlConfig loads a YAML experiment file, applies command-line overrides,
    builds the validated ExperimentConfig, creates the output folder, backs
    the resolved configuration up next to the results and renders the
    markdown run report through Jinja2.
    '''

    def __init__(self, yaml_file: Optional[str] = None, output_directory: Optional[str] = None):
        '''
        Args:
            yaml_file: Path to the YAML configuration, or None for defaults.
            output_directory: Fixed output directory; overrides the file.
        '''
        self.logger = setup_logger('YamlConfig')
        self.yaml_file = yaml_file
        self.output_directory = output_directory
        self.config: Dict[str, Any] = {}
        self.output_path: Optional[str] = None

    def load_config(self) -> bool:
        '''
        Load the YAML configuration into memory.

        Returns:
            True if loading succeeds (or no file was given), False otherwise.
        '''
        if self.yaml_file is None:
            self.config = {}
            return True
        if not os.path.exists(self.yaml_file):
            self.logger.error(f'YAML configuration file not found: {self.yaml_file}')
            return False
        try:
            with open(self.yaml_file, 'r') as file:
                self.config = yaml.safe_load(file) or {}
        except yaml.YAMLError as e:
            self.logger.error(f'Error loading YAML file {self.yaml_file}: {e}')
            return False
        if not isinstance(self.config, dict):
            self.logger.error(f'{self.yaml_file} must hold a mapping of sections')
            return False
        self.logger.info(f'YAML file loaded successfully: {self.yaml_file}')
        return True

    def _section(self, name: str) -> Dict[str, Any]:
        section = self.config.get(name) or {}
        allowed = KNOWN_SECTIONS.get(name)
        if not isinstance(section, dict):
            raise ConfigError(f'Section "{name}" must be a mapping')
        unknown = sorted(set(section) - set(allowed or ()))
        if unknown:
            raise ConfigError(f'Unknown keys in section "{name}": {", ".join(unknown)}')
        return section

    def apply_overrides(self, arch: Optional[str] = None, seed: Optional[int] = None, epochs: Optional[int] = None, subset: Optional[int] = None, test_modes: Optional[Sequence[str]] = None, out: Optional[str] = None):
        '''
        Command-line flags win over the file.
        '''
        if arch is not None:
            self.config['architecture'] = arch
        if seed is not None:
            self.config.setdefault('training', {})['seed'] = seed
        if epochs is not None:
            training = self.config.setdefault('training', {})
            training['epochs'] = epochs
            training.pop('lr_drop_epochs', None)
        if subset is not None:
            self.config.setdefault('dataset', {})['subset'] = subset
        if test_modes is not None:
            self.config.setdefault('pooling', {})['test_modes'] = list(test_modes)
        if out is not None:
            self.output_directory = out

    def build_experiment(self) -> ExperimentConfig:
        '''
        Turn the loaded mapping into a validated ExperimentConfig.

        Raises:
            ConfigError: For unknown sections or keys and invalid values.
            ArchitectureError: For a malformed architecture string.
        '''
        unknown = sorted(set(self.config) - set(KNOWN_SECTIONS))
        if unknown:
            raise ConfigError(f'Unknown configuration sections: {", ".join(unknown)}')
        experiment = self._section('experiment')
        dataset = self._section('dataset')
        training = self._section('training')
        dropout = self._section('dropout')
        pooling = self._section('pooling')
        report = self._section('report')
        sweep = self._section('sweep')
        placement = self._section('placement')
        arch = self.config.get('architecture', DEFAULT_ARCH)
        if not isinstance(arch, str):
            raise ConfigError(f'"architecture" must be a string, got {arch!r}')

        dataset_name = dataset.get('name', 'mnist')
        defaults = DEFAULT_FILES.get(dataset_name, {'train': [], 'test': []})
        directory = dataset.get('directory')
        train_paths = _resolve(directory, dataset.get('train') or defaults['train'])
        test_paths = _resolve(directory, dataset.get('test') or defaults['test'])

        try:
            train_config = TrainConfig(
                epochs=training.get('epochs', 30),
                batch_size=training.get('batch_size', 100),
                momentum=float(training.get('momentum', 0.95)),
                learning_rate=float(training.get('learning_rate', 0.1)),
                lr_drop_epochs=training.get('lr_drop_epochs'),
                seed=training.get('seed', 0),
                dtype=training.get('dtype', 'float64'),
                init_std=float(training.get('init_std', 0.1)),
                dropout=DropoutPlacement(
                    conv_input=float(dropout.get('conv_input', 1.0)),
                    pool_input=float(dropout.get('pool_input', 1.0)),
                    fc_input=float(dropout.get('fc_input', 1.0)),
                    first_fc_input=float(dropout.get('first_fc_input', 1.0)),
                    input_image=bool(dropout.get('input_image', False))
                ),
                pool_train_mode=pooling.get('train_mode', 'max'),
                pool_test_mode=(pooling.get('test_modes') or ['max'])[0],
                multinomial_path=bool(pooling.get('multinomial_path', False))
            )
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(f'Invalid training configuration: {e}') from e

        config = ExperimentConfig(
            name=experiment.get('name', 'experiment'),
            arch=arch,
            dataset=dataset_name,
            train_paths=train_paths,
            test_paths=test_paths,
            subset=dataset.get('subset'),
            test_subset=dataset.get('test_subset'),
            training=train_config,
            test_modes=tuple(pooling.get('test_modes') or ['max']),
            train_modes=tuple(report.get('evaluate_train_modes') or ()),
            timing=bool(report.get('timing', False)),
            output=self.output_directory or experiment.get('output'),
            save_checkpoint=bool(experiment.get('save_checkpoint', False)),
            retain_ps=tuple(float(p) for p in sweep.get('retain_ps', ExperimentConfig.retain_ps)),
            include_stochastic=bool(sweep.get('include_stochastic', True)),
            placements=tuple(placement.get('placements', ExperimentConfig.placements)),
            placement_retain_p=float(placement.get('retain_p', 0.5))
        )
        return config.validate()

    def create_output_path(self, experiment: ExperimentConfig) -> str:
        '''
        Use the configured output directory, or create
        /project_root/experiment_results/[name]/[timestamp]/.
        '''
        if experiment.output:
            path = experiment.output
        else:
            name = ''.join(c for c in experiment.name.lower().replace(' ', '_') if c.isalnum() or c in ['_', '-'])
            timestamp = datetime.datetime.now().strftime('%Y-%m-%d_%H-%M-%S')
            path = os.path.join(RESULTS_DIR, name or 'experiment', timestamp)
        os.makedirs(path, exist_ok=True)
        self.output_path = path
        return path

    def save_config_backup(self, experiment: ExperimentConfig, output_path: str) -> str:
        config_backup_path = os.path.join(output_path, 'experiment_config.yml')
        with open(config_backup_path, 'w') as file:
            yaml.safe_dump(experiment.to_dict(), file, default_flow_style=False, sort_keys=False)
        self.logger.info(f'Configuration saved to: {config_backup_path}')
        return config_backup_path

    def render_report(self, context: Dict[str, Any], output_path: str, template_file: str = REPORT_TEMPLATE) -> str:
        '''
        Render the run report template with the given context.

        Returns:
            Path of the written report.
        '''
        environ = Environment(
            loader=FileSystemLoader(os.path.dirname(template_file)),
            trim_blocks=True,
            lstrip_blocks=True,
            keep_trailing_newline=True
        )
        template = environ.get_template(os.path.basename(template_file))
        report_path = os.path.join(output_path, 'report.md')
        with open(report_path, 'w') as file:
            file.write(template.render(**context))
        self.logger.info(f'Report written to: {report_path}')
        return report_path
