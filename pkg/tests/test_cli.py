import csv
import json

import numpy as np
from pytest import raises

from ncwno.cli import (RunConfig, parse_config, build_config, apply_env_overrides, with_seed, build_parser,
                       error_category, main, load_task)
from ncwno.exceptions import ConfigError, NumericalError, StabilityError

TINY = '''
seed: 3
model:
  n_blocks: 1
  n_experts: 2
  width: 4
  level: 2
  max_tasks: 3
  gate_hidden: [8]
  projection_width: 8
train:
  epochs: 2
  batch_size: 8
transfer:
  epochs: 1
  batch_size: 8
evaluate:
  horizon: 2
tasks:
  - {name: heat, recipe: heat_1d, label: 0, n_samples: 4, n_test: 2, shape: [32], window: 2, horizon: 3}
  - {name: advection, recipe: advection_1d, label: 1, n_samples: 4, n_test: 2, shape: [32], window: 2, horizon: 3}
  - {name: burgers, recipe: burgers_1d, label: 2, role: transfer, n_samples: 4, n_test: 2, shape: [32], window: 2,
     horizon: 3}
'''


def _write(directory, text=TINY):
    directory.mkdir(parents=True, exist_ok=True)
    path = directory / 'run.yaml'
    path.write_text(text, encoding='utf-8')
    return path


def _read_csv(path):
    with open(path, newline='') as f:
        return list(csv.DictReader(f))


class TestConfig:
    def test_defaults(self, tmp_path):
        config = parse_config(_write(tmp_path, ''), environ={})
        assert isinstance(config, RunConfig)
        assert config.seed == 0
        assert config.model.n_experts == 10
        assert config.train.epochs == 150
        assert config.transfer.train.epochs == 50
        assert config.transfer.train.phase == 'transfer'
        assert config.tasks == []
        assert config.path('data') == tmp_path / 'data'
        assert config.path('log') is None

    def test_tiny(self, tmp_path):
        config = parse_config(_write(tmp_path), command='generate', environ={})
        assert config.command == 'generate'
        assert config.seed == 3
        assert config.model.grid_shape == (32,)
        assert config.model.in_channels == 2
        assert [t.name for t in config.tasks_with_role('foundation')] == ['heat', 'advection']
        assert config.tasks[2].overrides == {'shape': [32], 'window': 2, 'horizon': 3}
        assert config.tasks[2].build_recipe().pde.n_records == 5

    def test_two_dimensional_epochs(self):
        config = build_config({'tasks': [{'name': 'heat_2d', 'label': 0}]})
        assert config.model.rank == 2
        assert config.model.grid_shape == (64, 64)
        assert config.train.epochs == 100

    def test_duplicates(self):
        with raises(ConfigError):
            build_config({'tasks': [{'name': 'heat_1d', 'label': 0}, {'name': 'burgers_1d', 'label': 0}]})
        with raises(ConfigError):
            build_config({'tasks': [{'name': 'heat_1d', 'label': 0}, {'name': 'heat_1d', 'label': 1}]})

    def test_unknown_keys(self):
        with raises(ConfigError) as e:
            build_config({'model': {'experts_per_blok': 3}})
        assert 'model.experts_per_blok' in str(e.value)
        with raises(ConfigError):
            build_config({'optimizer': {}})
        with raises(ConfigError):
            build_config({'tasks': [{'name': 'heat_1d', 'label': 0, 'viscosity': 1.}]})
        with raises(ConfigError):
            build_config({'tasks': [{'name': 'heat_1d'}]})
        with raises(ConfigError):
            build_config({'train': {'phase': 'transfer'}})

    def test_invalid_values(self, tmp_path):
        with raises(ConfigError):
            build_config({'seed': -1})
        with raises(ConfigError):
            build_config({'seed': 'seven'})
        with raises(ConfigError):
            build_config({'model': {'max_tasks': 2}, 'tasks': [{'name': 'heat_1d', 'label': 2}]})
        with raises(ConfigError):
            build_config({'train': {'loss': 'l1'}})
        with raises(ConfigError):
            build_config({'tasks': [{'name': 'ext', 'label': 0, 'path': 'missing'}]}, root=tmp_path)
        with raises(ConfigError):
            build_config({}, command='serve')

    def test_yaml_error(self, tmp_path):
        with raises(ConfigError) as e:
            parse_config(_write(tmp_path, 'model:\n  width: [1, 2\nseed: 1\n'), environ={})
        assert 'line' in str(e.value)
        with raises(ConfigError):
            parse_config(_write(tmp_path, '- 1\n- 2\n'), environ={})

    def test_env_overrides(self, tmp_path):
        environ = {'NCWNO_TRAIN__EPOCHS': '7', 'NCWNO_SEED': '9', 'HOME': '/root'}
        config = parse_config(_write(tmp_path), environ=environ)
        assert config.train.epochs == 7
        assert config.train.batch_size == 8
        assert config.seed == 9
        assert apply_env_overrides({}, {'NCWNO_MODEL__GATE_HIDDEN': '[4, 2]'}) == {'model': {'gate_hidden': [4, 2]}}
        with raises(ConfigError):
            apply_env_overrides({}, {'NCWNO_BOGUS__X': '1'})
        with raises(ConfigError):
            apply_env_overrides({}, {'NCWNO_TRAIN': '1'})

    def test_digest(self, tmp_path):
        config = parse_config(_write(tmp_path), environ={})
        again = parse_config(_write(tmp_path), command='evaluate', environ={})
        assert config.digest() == again.digest()
        assert with_seed(config, 4).digest() != config.digest()
        assert with_seed(config, 4).seed == 4
        with raises(ConfigError):
            with_seed(config, -1)


class TestParser:
    def test_subcommands(self):
        args = build_parser().parse_args(['evaluate', '--config', 'run.yaml', '--task', 'a', '--task', 'b', '-v'])
        assert args.command == 'evaluate'
        assert args.task == ['a', 'b']
        assert args.verbose
        args = build_parser().parse_args(['train-foundation', '--config', 'run.yaml', '--seed', '5'])
        assert args.seed == 5
        with raises(ConfigError):
            build_parser().parse_args(['train', '--config', 'run.yaml'])
        with raises(ConfigError):
            build_parser().parse_args(['generate'])

    def test_error_category(self):
        assert error_category(NumericalError('x')) == (2, 'numerical')
        assert error_category(StabilityError('x')) == (2, 'numerical')
        assert error_category(ConfigError('x')) == (1, 'config')
        assert error_category(KeyError('x')) == (1, 'config')
        assert error_category(FileNotFoundError('x')) == (3, 'io')


class TestMain:
    def test_usage_error(self, capsys):
        assert main(['generate']) == 1
        assert capsys.readouterr().err.startswith('error category=config message=')

    def test_unknown_key(self, tmp_path, capsys):
        path = _write(tmp_path, 'model:\n  experts_per_blok: 3\n')
        assert main(['generate', '--config', str(path)]) == 1
        err = capsys.readouterr().err
        assert err.startswith('error category=config')
        assert 'model.experts_per_blok' in err
        assert len(err.strip().splitlines()) == 1

    def test_missing_files(self, tmp_path, capsys):
        assert main(['generate', '--config', str(tmp_path / 'absent.yaml')]) == 3
        assert capsys.readouterr().err.startswith('error category=io')
        assert main(['transfer', '--config', str(_write(tmp_path))]) == 3

    def test_unstable(self, tmp_path, capsys):
        text = 'tasks:\n  - {name: heat_1d, label: 0, n_samples: 2, n_test: 1, alpha: 100.}\n'
        assert main(['generate', '--config', str(_write(tmp_path, text))]) == 2
        assert capsys.readouterr().err.startswith('error category=numerical')

    def test_generate_reproducible(self, tmp_path):
        for name in ('a', 'b'):
            assert main(['generate', '--config', str(_write(tmp_path / name))]) == 0
        for task in ('heat', 'advection', 'burgers'):
            for blob in ('manifest', 'inputs.bin', 'outputs.bin', 'grid.bin'):
                assert ((tmp_path / 'a' / 'data' / task / blob).read_bytes()
                        == (tmp_path / 'b' / 'data' / task / blob).read_bytes())
        assert main(['generate', '--config', str(_write(tmp_path / 'c')), '--seed', '4']) == 0
        assert ((tmp_path / 'a' / 'data' / 'heat' / 'inputs.bin').read_bytes()
                != (tmp_path / 'c' / 'data' / 'heat' / 'inputs.bin').read_bytes())

    def test_end_to_end(self, tmp_path):
        path = str(_write(tmp_path))
        reports = tmp_path / 'reports'
        assert main(['generate', '--config', path]) == 0
        config = parse_config(path, environ={})
        train, test = load_task(config, config.tasks[0])
        assert (train.n_samples, test.n_samples) == (2, 2)

        assert main(['train-foundation', '--config', path]) == 0
        assert (tmp_path / 'checkpoints' / 'ncwno.json').exists()
        log = _read_csv(reports / 'train.log')
        assert [row['phase'] for row in log] == ['foundation', 'foundation']

        assert main(['transfer', '--config', path]) == 0
        log = _read_csv(reports / 'train.log')
        assert [row['task'] for row in log[2:]] == ['burgers']

        out = tmp_path / 'eval'
        assert main(['evaluate', '--config', path, '--out', str(out)]) == 0
        rows = _read_csv(out / 'metrics.csv')
        assert [(r['task'], r['step']) for r in rows] == [(t, s) for t in ('heat', 'advection', 'burgers')
                                                          for s in ('1', '2')]
        for row in rows:
            low, mean, high = float(row['ci95_low']), float(row['mean_acc']), float(row['ci95_high'])
            assert low <= mean <= high
            assert mean <= 1
        similarity = _read_csv(out / 'similarity.csv')
        assert [r['task'] for r in similarity] == ['heat', 'advection', 'burgers']
        assert np.isclose(float(similarity[0]['heat']), 1)
        assert (out / 'plot_metrics.py').exists()
        stamp = json.loads((out / 'stamp.json').read_text())
        assert stamp['command'] == 'evaluate'
        assert stamp['seed'] == 3
        assert stamp['config_sha256'] == config.digest()
        assert 'numpy' in stamp['versions']

        assert main(['evaluate', '--config', path, '--out', str(out), '--task', 'heat']) == 0
        assert {r['task'] for r in _read_csv(out / 'metrics.csv')} == {'heat'}
        assert main(['evaluate', '--config', path, '--task', 'navier_stokes']) == 1

    def test_ablation(self, tmp_path):
        text = TINY.replace('\ntasks:', '\nablation:\n  n_experts: [1, 2]\n  seeds: [0]\ntasks:')
        path = str(_write(tmp_path, text))
        assert main(['generate', '--config', path]) == 0
        assert main(['ablate-experts', '--config', path]) == 0
        rows = _read_csv(tmp_path / 'reports' / 'ablation.csv')
        assert len(rows) == 2 * 3
        assert {r['phase'] for r in rows} == {'foundation', 'transfer'}
        assert all(float(r['rel_l2']) >= 0 for r in rows)
