from dataclasses import dataclass, field
from typing import Dict, List, Sequence
from core.errors import ConfigError
import pandas as pd
import os

# Enough digits for a float64 to parse back to the same value.
FLOAT_FORMAT = '%.17g'

BASE_COLUMNS = ('epoch', 'learning_rate', 'train_loss', 'train_error')

@dataclass
class MetricsRecord:
    '''
    One row of a training run: the state after `epoch` (1-based) finished.

    Attributes:
        epoch: Completed epoch count.
        learning_rate: Rate used during the epoch.
        train_loss: Mean cross-entropy over the epoch's training examples.
        train_error: Train-mode error rate accumulated during the epoch.
        test_errors: Test error per test-pooling mode.
        train_errors: Optional training-set error per test-pooling mode.
        wall_seconds: Epoch duration when timing is enabled, else 0.
    '''
    epoch: int
    learning_rate: float
    train_loss: float
    train_error: float
    test_errors: Dict[str, float] = field(default_factory=dict)
    train_errors: Dict[str, float] = field(default_factory=dict)
    wall_seconds: float = 0.0

    def __post_init__(self):
        rates = [self.train_error, *self.test_errors.values(), *self.train_errors.values()]
        for rate in rates:
            if not 0.0 <= rate <= 1.0:
                raise ConfigError(f'Error rates must lie in [0, 1], got {rate} at epoch {self.epoch}')

    def to_row(self, modes: Sequence[str], train_modes: Sequence[str] = ()) -> Dict[str, float]:
        row = {
            'epoch': self.epoch,
            'learning_rate': self.learning_rate,
            'train_loss': self.train_loss,
            'train_error': self.train_error
        }
        for mode in modes:
            row[f'test_error_{mode}'] = self.test_errors[mode]
        for mode in train_modes:
            row[f'train_error_{mode}'] = self.train_errors[mode]
        row['wall_seconds'] = self.wall_seconds
        return row

def metrics_columns(modes: Sequence[str], train_modes: Sequence[str] = ()) -> List[str]:
    return (
        list(BASE_COLUMNS)
        + [f'test_error_{mode}' for mode in modes]
        + [f'train_error_{mode}' for mode in train_modes]
        + ['wall_seconds']
    )

def metrics_frame(records: Sequence[MetricsRecord], modes: Sequence[str], train_modes: Sequence[str] = ()) -> pd.DataFrame:
    rows = [record.to_row(modes, train_modes) for record in records]
    return pd.DataFrame(rows, columns=metrics_columns(modes, train_modes))

def write_metrics_csv(records: Sequence[MetricsRecord], path: str, modes: Sequence[str], train_modes: Sequence[str] = ()) -> str:
    '''
    Write one header row and one row per epoch, columns in fixed order:
    epoch, learning_rate, train_loss, train_error, test_error_<mode>...,
    train_error_<mode>..., wall_seconds.
    '''
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    metrics_frame(records, modes, train_modes).to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return path

def read_metrics_csv(path: str) -> List[MetricsRecord]:
    '''
    Parse a metrics CSV back into MetricsRecord rows.
    '''
    frame = pd.read_csv(path, float_precision='round_trip')
    missing = [column for column in (*BASE_COLUMNS, 'wall_seconds') if column not in frame.columns]
    if missing:
        raise ConfigError(f'{path} is not a metrics CSV; missing columns: {", ".join(missing)}')
    test_modes = [column[len('test_error_'):] for column in frame.columns if column.startswith('test_error_')]
    train_modes = [column[len('train_error_'):] for column in frame.columns if column.startswith('train_error_')]
    records = []
    for values in frame.to_dict('records'):
        records.append(MetricsRecord(
            epoch=int(values['epoch']),
            learning_rate=float(values['learning_rate']),
            train_loss=float(values['train_loss']),
            train_error=float(values['train_error']),
            test_errors={mode: float(values[f'test_error_{mode}']) for mode in test_modes},
            train_errors={mode: float(values[f'train_error_{mode}']) for mode in train_modes},
            wall_seconds=float(values['wall_seconds'])
        ))
    return records

def write_table_csv(frame: pd.DataFrame, path: str) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return path
