import json

import pandas as pd
import pytest

import criteria
from main import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, build_parser, config_overrides, experiment_kwargs, main


@pytest.fixture(autouse=True)
def in_tmp_path(tmp_path, monkeypatch):
    """Keep the log file and default results directory out of the repository."""
    monkeypatch.chdir(tmp_path)
    return tmp_path


def write_config(path, sections):
    path.write_text(json.dumps(sections), encoding='utf-8')
    return str(path)


def test_bound(tmp_path):
    assert main(['bound', '--r2', '0.2355', '--format', 'csv', '--format', 'json', '--out', 'out']) == EXIT_OK

    table = pd.read_csv(tmp_path / 'out' / 'bound.csv')
    assert table.loc[0, 'bound'] == pytest.approx(0.0277, abs=5e-4)
    summary = json.loads((tmp_path / 'out' / 'bound_summary.json').read_text(encoding='utf-8'))
    assert summary['experiment'] == 'bound'
    assert (tmp_path / 'rm_toolbox.log').exists()


def test_estimate_moments_ghzw(tmp_path):
    code = main(['estimate-moments', '--state', 'ghzw', '--param', '0.5', '--unitaries', '50',
                 '--shots', '20', '--seed', '3', '--format', 'json'])
    assert code == EXIT_OK
    summary = json.loads((tmp_path / 'results' / 'estimate-moments_summary.json').read_text(encoding='utf-8'))
    assert summary['seed'] == 3
    assert summary['rows'] == 7


def test_missing_config_file():
    assert main(['bound', '--config', 'absent.json']) == EXIT_CONFIG


@pytest.mark.parametrize("flags", [['--unitaries', '0'], ['--shots', '1'], ['--workers', '0']])
def test_invalid_budget(flags):
    assert main(['bound', '--r2', '0.1'] + flags) == EXIT_CONFIG


def test_literal_moment_form_fails_self_check(tmp_path):
    config_path = write_config(tmp_path / 'literal.json', {
        'oracle': {'form': 'literal', 'samples': 5000},
        'protocol': {'num_unitaries': 20, 'shots_per_unitary': 10},
    })
    assert main(['estimate-moments', '--config', config_path, '--format', 'csv']) == EXIT_NUMERICAL


def test_unknown_format_rejected_by_parser():
    with pytest.raises(SystemExit):
        main(['bound', '--format', 'pdf'])


def test_solver_failure_maps_to_numerical_exit(monkeypatch):
    def no_feasible_point(*args, **kwargs):
        raise RuntimeError("Numeric fourth-moment solver found no feasible point")

    monkeypatch.setattr(criteria, "_numeric_solver", no_feasible_point)
    assert main(['bound', '--r2', '0.2', '--format', 'csv']) == EXIT_NUMERICAL


def test_save_config_writes_effective_settings(tmp_path):
    code = main(['bound', '--r2', '0.2', '--no-cross-check', '--seed', '11', '--format', 'csv',
                 '--save-config', 'saved/effective.json'])
    assert code == EXIT_OK
    saved = json.loads((tmp_path / 'saved' / 'effective.json').read_text(encoding='utf-8'))
    assert saved['protocol']['seed'] == 11
    assert saved['tomography']['method'] == 'apg'


def test_estimate_moments_writes_svg(tmp_path):
    code = main(['estimate-moments', '--state', 'ghzw', '--param', '0.5', '--unitaries', '30',
                 '--shots', '10', '--format', 'svg'])
    assert code == EXIT_OK
    assert (tmp_path / 'results' / 'estimate-moments.svg').exists()


class TestArguments:
    def test_overrides(self):
        args = build_parser().parse_args(['chessboard-sweep', '--grid', 'measured', '--seed', '5',
                                          '--format', 'csv', '--format', 'svg'])
        overrides = config_overrides(args)
        assert overrides['chessboard_sweep.grid'] == 'measured'
        assert overrides['protocol.seed'] == 5
        assert overrides['export.formats'] == ['csv', 'svg']
        assert overrides['protocol.num_unitaries'] is None
        assert overrides['ghzw_sweep.g_step'] is None

    def test_mle_method_flag(self):
        args = build_parser().parse_args(['tomography-roundtrip', '--mle-method', 'rhr'])
        assert config_overrides(args)['tomography.method'] == 'rhr'
        with pytest.raises(SystemExit):
            build_parser().parse_args(['tomography-roundtrip', '--mle-method', 'newton'])

    def test_kwargs(self):
        parser = build_parser()
        assert experiment_kwargs(parser.parse_args(['ghzw-sweep', '--no-estimate'])) == {'estimate': False}
        assert experiment_kwargs(parser.parse_args(['ghzw-sweep'])) == {'estimate': None}
        assert experiment_kwargs(parser.parse_args(['tomography-roundtrip', '--replicas', '5'])) == \
               {'p': 0.1291, 'replicas': 5}
        assert experiment_kwargs(parser.parse_args(['bound', '--r2', '0.1', '0.2', '--no-cross-check'])) == \
               {'r2_values': [0.1, 0.2], 'cross_check': False}

    def test_experiment_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])
