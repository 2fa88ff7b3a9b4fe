from main import main
import pandas as pd
import pytest
import os

def run(argv):
    with pytest.raises(SystemExit) as exit_info:
        main(argv + ['--log-level', 'ERROR'])
    return exit_info.value.code

def test_count_tables(capsys, tmp_path):
    assert run(['count', '--r', '96', '--s', '1024', '--t', '4', '--t-max', '16', '--out', str(tmp_path)]) == 0
    output = capsys.readouterr().out
    assert 'stochastic base peaks at t = 3' in output
    assert 'ln epsilon' in output
    bases = pd.read_csv(tmp_path / 'count_bases.csv')
    assert len(bases) == 16
    assert bases.loc[bases['t'] == 1, 'b_maxpool_dropout'].iloc[0] == 2.0
    assert os.path.exists(tmp_path / 'count_summary.csv')

def test_count_with_conv_dropout(capsys):
    assert run(['count', '--r', '1', '--s', '4', '--t', '4', '--filter-side', '2', '--map-side', '3']) == 0
    assert 'ln C conv_dropout' in capsys.readouterr().out

def test_count_rejects_non_tiling_regions():
    assert str(run(['count', '--r', '1', '--s', '5', '--t', '4'])).startswith('Error:')

def test_gradcheck_selected_suites(capsys):
    assert run(['gradcheck', '--suite', 'parser', '--suite', 'counting']) == 0
    assert 'All 2 oracle suites passed.' in capsys.readouterr().out

def test_gradcheck_unknown_suite():
    assert 'Unknown oracle suite' in str(run(['gradcheck', '--suite', 'fuzzing']))

def test_malformed_architecture_exits_with_an_error(experiment_yaml):
    code = run(['train', '--config', experiment_yaml(), '--arch', '1x28x28-0C5-10N'])
    assert str(code).startswith('Error:')
    assert 'position 8' in str(code)

def test_missing_config_file(tmp_path):
    assert str(run(['train', '--config', str(tmp_path / 'missing.yml')])).startswith('Error:')

def test_missing_subcommand():
    with pytest.raises(SystemExit) as exit_info:
        main([])
    assert exit_info.value.code == 2

def test_inspect_data(capsys, experiment_yaml):
    assert run(['inspect-data', '--config', experiment_yaml()]) == 0
    output = capsys.readouterr().out
    assert '[train] 60 examples of shape (1, 28, 28), 10 classes' in output
    assert '[test] 30 examples' in output
    assert 'examples per class: [6, 6, 6, 6, 6, 6, 6, 6, 6, 6]' in output

def test_train_then_evaluate_then_plot(capsys, experiment_yaml, tmp_path):
    config = experiment_yaml(experiment={'name': 'tiny', 'save_checkpoint': True})
    out = tmp_path / 'run'
    assert run(['train', '--config', config, '--out', str(out), '--epochs', '1', '--test-modes', 'max,scaled_max']) == 0
    assert f'Results available at: {out}' in capsys.readouterr().out
    metrics = pd.read_csv(out / 'metrics.csv')
    assert list(metrics['epoch']) == [1]
    assert 'test_error_scaled_max' in metrics.columns

    assert run(['evaluate', '--config', config, '--checkpoint', str(out / 'final.pdck'), '--out', str(tmp_path / 'eval')]) == 0
    assert 'max' in capsys.readouterr().out
    assert os.path.exists(tmp_path / 'eval' / 'checkpoint_evaluation.csv')

    figures = tmp_path / 'figures'
    assert run(['plot', '--metrics', str(out / 'metrics.csv'), '--bases', '--out', str(figures)]) == 0
    assert os.path.exists(figures / 'error_curves.png')
    assert os.path.exists(figures / 'model_count_bases.png')

def test_sweep_then_plot(experiment_yaml, tmp_path):
    out = tmp_path / 'sweep'
    assert run(['sweep', '--config', experiment_yaml(), '--out', str(out), '--epochs', '1', '--retain-ps', '0.5,1.0']) == 0
    summary = pd.read_csv(out / 'sweep_summary.csv')
    assert set(summary['train_mode']) == {'max_dropout', 'stochastic'}
    assert run(['plot', '--sweep-summary', str(out / 'sweep_summary.csv'), '--out', str(tmp_path / 'figures')]) == 0
    assert os.path.exists(tmp_path / 'figures' / 'retain_sweep.png')

def test_placement_subcommand(experiment_yaml, tmp_path):
    out = tmp_path / 'placement'
    assert run(['placement', '--config', experiment_yaml(), '--out', str(out), '--epochs', '1', '--placements', 'none,fc']) == 0
    summary = pd.read_csv(out / 'placement_summary.csv')
    assert list(summary['placement']) == ['none', 'fc']

def test_plot_needs_an_input():
    assert str(run(['plot'])).startswith('Error:')
