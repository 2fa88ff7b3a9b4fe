from core.errors import ConfigError
from utilities.metrics_io import MetricsRecord, metrics_columns, read_metrics_csv, write_metrics_csv, write_table_csv
import pandas as pd
import pytest

def records():
    return [
        MetricsRecord(1, 0.1, 2.302585092994046, 0.9, {'max': 0.5, 'prob_weighted': 0.4375}, {'max': 0.48}),
        MetricsRecord(2, 0.01, 1.0 / 3.0, 0.25, {'max': 0.125, 'prob_weighted': 0.1}, {'max': 0.2})
    ]

def test_column_order():
    assert metrics_columns(['max', 'scaled_max'], ['max']) == [
        'epoch', 'learning_rate', 'train_loss', 'train_error',
        'test_error_max', 'test_error_scaled_max', 'train_error_max', 'wall_seconds'
    ]

def test_written_csv_reads_back(tmp_path):
    path = write_metrics_csv(records(), str(tmp_path / 'out' / 'metrics.csv'), ['max', 'prob_weighted'], ['max'])
    with open(path) as handle:
        header = handle.readline().strip()
    assert header == 'epoch,learning_rate,train_loss,train_error,test_error_max,test_error_prob_weighted,train_error_max,wall_seconds'
    assert read_metrics_csv(path) == records()

def test_error_rates_must_be_fractions():
    with pytest.raises(ConfigError):
        MetricsRecord(1, 0.1, 1.0, 1.5)
    with pytest.raises(ConfigError):
        MetricsRecord(1, 0.1, 1.0, 0.5, {'max': -0.1})

def test_reading_a_foreign_csv(tmp_path):
    path = write_table_csv(pd.DataFrame({'t': [1, 2]}), str(tmp_path / 'bases.csv'))
    with pytest.raises(ConfigError, match='not a metrics CSV'):
        read_metrics_csv(path)
