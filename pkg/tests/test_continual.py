import csv
from dataclasses import replace

import numpy as np
from pytest import raises, approx, fixture, mark

from ncwno.continual import (relative_l2, accuracy_metric, cosine_similarity, similarity_matrix, confidence_interval,
                             SemanticMemory, TrainConfig, make_training_pairs, relative_l2_loss, mse_loss,
                             train_foundation, combinatorial_transfer, activate_task, RolloutSpec, rollout,
                             rollout_batch, evaluate_rollout, one_step_accuracy, save_checkpoint, load_checkpoint,
                             RunLog, accuracy_rows, write_metrics_csv)
from ncwno.exceptions import NumericalError
from ncwno.model import ModelConfig, init_state, make_grid, predict, count_parameters
from ncwno.pde import TaskDataset, recipe, split_dataset
from ncwno.tensor import Tensor, check_gradients, save_tensors

tiny = ModelConfig(grid_shape=(32,), in_channels=2, n_blocks=1, n_experts=2, width=4, level=2, max_tasks=3,
                   gate_hidden=(8,), projection_width=8, dtype='float64')
grid = make_grid((32,))
x = grid[..., 0]


def _shift_task(label, n=6, window=2, horizon=3, shift=1, seed=0, name=None):
    """Sine waves moving ``shift`` cells per frame."""
    rng = np.random.default_rng(seed)
    frames = []
    for _ in range(n):
        k = rng.integers(1, 3)
        u0 = np.sin(2 * np.pi * (k * x + rng.random())) + 0.5
        frames.append([np.roll(u0, shift * t) for t in range(window + horizon)])
    trajectories = np.array(frames)
    return TaskDataset(name or 'shift_%d' % label, label, grid, np.moveaxis(trajectories[:, :window], 1, -1),
                       trajectories[:, window:])


def _static_task(label, n=4):
    rng = np.random.default_rng(label)
    u0 = rng.standard_normal((n, 32))
    return TaskDataset('static_%d' % label, label, grid, u0[..., None], 2 * u0[:, None], time_dependent=False)


def _roll_model(a, grid, label):
    return np.roll(a[..., -1], 1, axis=1)


class TestMetrics:
    def test_relative_l2(self):
        assert relative_l2([3., 4.], [3., 0.]) == approx(0.8)
        assert accuracy_metric([3., 4.], [3., 0.]) == approx(0.2)
        u = np.arange(1., 7.).reshape(2, 3)
        assert accuracy_metric(u, 2 * u) == approx(0)
        assert accuracy_metric(u, u) == 1
        with raises(ValueError):
            relative_l2(np.zeros(3), np.ones(3))
        with raises(ValueError):
            relative_l2(np.ones(3), np.ones(4))

    def test_cosine(self):
        u = np.arange(1., 7.).reshape(2, 3)
        assert cosine_similarity(u, 3 * u) == approx(1)
        assert cosine_similarity(u, -u) == approx(-1)
        assert cosine_similarity([1., 0.], [0., 2.]) == approx(0)
        with raises(ValueError):
            cosine_similarity(np.zeros(2), np.ones(2))

    def test_similarity_matrix(self):
        rng = np.random.default_rng(0)
        arrays = [rng.standard_normal((4, 5, 8)), rng.standard_normal((3, 6, 8)), rng.standard_normal((4, 5, 8))]
        matrix = similarity_matrix(arrays)
        assert matrix.shape == (3, 3)
        assert np.allclose(np.diag(matrix), 1)
        assert np.allclose(matrix, matrix.T)
        assert matrix[0, 1] == approx(cosine_similarity(arrays[0][:3, :5], arrays[1][:3, :5]))
        with raises(ValueError):
            similarity_matrix([np.ones((2, 2, 3)), np.ones((2, 2, 4))])

    def test_confidence_interval(self):
        mean, low, high = confidence_interval([0.9, 0.8, 0.85, 0.95])
        assert mean == approx(0.875)
        assert low < mean < high
        assert high - mean == approx(mean - low)
        assert confidence_interval([0.5]) == (0.5, 0.5, 0.5)
        with raises(ValueError):
            confidence_interval([])


class TestMemory:
    def test_store_copies(self):
        memory = SemanticMemory()
        w = np.ones(3)
        snapshot = memory.store(0, {'gates.0.dense.0.weight': w, 'encoder.0.bias': Tensor(np.zeros(2))})
        w[0] = 5.
        assert np.array_equal(memory[0]['gates.0.dense.0.weight'], np.ones(3))
        with raises(ValueError):
            snapshot['gates.0.dense.0.weight'][0] = 1.
        with raises(TypeError):
            snapshot['encoder.0.bias'] = np.ones(2)
        assert memory.labels == [0]
        assert len(memory) == 1

    def test_labels(self):
        memory = SemanticMemory()
        memory.store(2, {'w': np.ones(1)})
        with raises(ValueError):
            memory.store(2, {'w': np.zeros(1)})
        memory.store(2, {'w': np.zeros(1)}, overwrite=True)
        assert memory[2]['w'][0] == 0
        with raises(KeyError):
            memory[1]
        with raises(TypeError):
            memory.store('a', {'w': np.ones(1)})
        assert 'a' not in memory
        assert np.int64(2) in memory
        assert list(memory) == [2]


class TestPairs:
    def test_time_dependent(self):
        task = _shift_task(0, n=3)
        inputs, targets = make_training_pairs(task)
        assert inputs.shape == (9, 32, 2)
        assert targets.shape == (9, 32, 1)
        assert np.array_equal(inputs[0], task.inputs[0])
        assert np.array_equal(targets[0, :, 0], task.outputs[0, 0])
        assert np.array_equal(inputs[1, :, 1], task.outputs[0, 0])
        assert np.array_equal(targets[3, :, 0], task.outputs[1, 0])

    def test_subsampled(self):
        task = _shift_task(0, n=3)
        inputs, targets = make_training_pairs(task, pairs_per_sample=2)
        assert inputs.shape == (6, 32, 2)
        assert np.array_equal(targets[1, :, 0], task.outputs[0, 2])
        assert make_training_pairs(task, window=1)[0].shape == (12, 32, 1)
        with raises(ValueError):
            make_training_pairs(task, window=5)

    def test_static(self):
        task = _static_task(0)
        inputs, targets = make_training_pairs(task)
        assert inputs is task.inputs
        assert targets.shape == (4, 32, 1)
        assert np.array_equal(targets[..., 0], task.outputs[:, 0])


class TestLoss:
    target = np.random.default_rng(1).standard_normal((3, 32, 1))

    def test_values(self):
        assert relative_l2_loss(Tensor(self.target), self.target).item() == approx(0, abs=1e-8)
        assert relative_l2_loss(Tensor(2 * self.target), self.target).item() == approx(1)
        assert mse_loss(Tensor(self.target + 1), self.target).item() == approx(1)
        with raises(ValueError):
            relative_l2_loss(Tensor(self.target), np.zeros_like(self.target))
        with raises(ValueError):
            relative_l2_loss(Tensor(self.target[:2]), self.target)

    def test_gradients(self):
        prediction = self.target + np.random.default_rng(2).standard_normal(self.target.shape)
        assert check_gradients(lambda p: relative_l2_loss(p, self.target), [prediction]) < 1e-6


class TestConfig:
    def test_defaults(self):
        assert TrainConfig().epochs == 150
        assert TrainConfig(phase='transfer').epochs == 50
        assert TrainConfig().batch_size == 20
        with raises(ValueError):
            TrainConfig(phase='finetune')
        with raises(ValueError):
            TrainConfig(loss='l1')
        with raises(AssertionError):
            TrainConfig(gamma=0)

    def test_trainable_names(self):
        state = init_state(tiny)
        assert TrainConfig().trainable_names(state) == list(state.params)
        assert TrainConfig(phase='transfer').trainable_names(state) == state.gate_parameter_names


class TestFoundation:
    tasks = [_shift_task(0, seed=0), _shift_task(1, shift=-1, seed=1)]

    def test_zero_epochs(self):
        state = init_state(tiny)
        before = state.snapshot()
        state, memory, history = train_foundation(self.tasks, state, TrainConfig(epochs=0))
        assert history == []
        assert memory.labels == [0, 1]
        for name, value in before.items():
            assert np.array_equal(state.params[name].data, value)

    def test_loss_decreases(self):
        cfg = TrainConfig(epochs=30, batch_size=4, base_lr=1e-2, step_size=100)
        state, memory, history = train_foundation(self.tasks, init_state(tiny), cfg)
        assert len(history) == 30
        assert history[-1] < 0.7 * history[0]
        for name in state.gate_parameter_names:
            assert np.array_equal(memory[0][name], state.params[name].data)
            assert np.array_equal(memory[1][name], state.params[name].data)

    def test_deterministic(self):
        cfg = TrainConfig(epochs=2, batch_size=4)
        first, _, h1 = train_foundation(self.tasks, init_state(tiny, 5), cfg)
        second, _, h2 = train_foundation(self.tasks, init_state(tiny, 5), cfg)
        assert h1 == h2
        for name, p in first.params.items():
            assert np.array_equal(p.data, second.params[name].data)

    def test_run_log(self, tmp_path):
        log = RunLog(tmp_path / 'run.csv')
        train_foundation(self.tasks, init_state(tiny), TrainConfig(epochs=2, batch_size=6), run_log=log)
        lines = (tmp_path / 'run.csv').read_text().splitlines()
        assert lines[0] == 'epoch,phase,task,loss,lr,wall_ms'
        assert len(lines) == 3
        assert lines[1].startswith('0,foundation,shift_0+shift_1,')

    def test_invalid_tasks(self):
        with raises(ValueError):
            train_foundation([], init_state(tiny), TrainConfig(epochs=1))
        with raises(ValueError):
            train_foundation([self.tasks[0], _shift_task(0, seed=3)], init_state(tiny), TrainConfig(epochs=1))
        small = ModelConfig(**{**tiny.to_dict(), 'grid_shape': (16,)})
        with raises(ValueError):
            train_foundation(self.tasks, init_state(small), TrainConfig(epochs=1))
        memory = SemanticMemory()
        memory.store(0, {})
        with raises(ValueError):
            train_foundation(self.tasks, init_state(tiny), TrainConfig(epochs=1), memory=memory)

    def test_non_finite_loss(self):
        task = _shift_task(0)
        task.inputs[0, 0, 0] = np.nan
        with raises(NumericalError):
            train_foundation([task], init_state(tiny), TrainConfig(epochs=1, batch_size=6))


class TestTransfer:
    def _foundation(self):
        tasks = [_shift_task(0, seed=0), _shift_task(1, shift=-1, seed=1)]
        state, memory, _ = train_foundation(tasks, init_state(tiny), TrainConfig(epochs=2, batch_size=4))
        return state, memory

    def test_foundation_frozen(self):
        state, memory = self._foundation()
        frozen = state.snapshot(state.foundation_parameter_names)
        gates = state.snapshot(state.gate_parameter_names)
        a = _shift_task(0, seed=7).inputs
        before = predict(state, a, grid, 0)

        new_task = _shift_task(2, shift=2, seed=2)
        cfg = TrainConfig(phase='transfer', epochs=3, batch_size=4, base_lr=1e-2)
        snapshot, history = combinatorial_transfer(state, memory, new_task, cfg)
        assert len(history) == 3
        for name, value in frozen.items():
            assert np.array_equal(state.params[name].data, value)
            assert state.params[name].requires_grad
        assert any(not np.array_equal(state.params[n].data, gates[n]) for n in gates)
        assert memory.labels == [0, 1, 2]
        for name, value in snapshot.items():
            assert np.array_equal(value, state.params[name].data)

        activate_task(state, memory, 0)
        assert np.array_equal(predict(state, a, grid, 0), before)

    def test_base_label(self):
        state, memory = self._foundation()
        for name in state.gate_parameter_names:
            state.params[name].data = np.zeros_like(state.params[name].data)
        cfg = TrainConfig(phase='transfer', epochs=0)
        snapshot, _ = combinatorial_transfer(state, memory, _shift_task(2), cfg, base_label=0)
        for name, value in snapshot.items():
            assert np.array_equal(value, memory[0][name])

    def test_existing_label(self):
        state, memory = self._foundation()
        with raises(ValueError):
            combinatorial_transfer(state, memory, _shift_task(1), TrainConfig(phase='transfer', epochs=1))
        combinatorial_transfer(state, memory, _shift_task(1), TrainConfig(phase='transfer', epochs=0, overwrite=True))

    def test_activate(self):
        state, memory = self._foundation()
        a = _shift_task(0, seed=7).inputs
        activate_task(state, memory, 1)
        once = predict(state, a, grid, 1)
        activate_task(state, memory, 1)
        assert np.array_equal(predict(state, a, grid, 1), once)
        before = state.snapshot()
        with raises(KeyError):
            activate_task(state, memory, 2)
        memory.store(2, {'gates.0.dense.0.weight': np.zeros(3)})
        with raises(ValueError):
            activate_task(state, memory, 2)
        for name, value in before.items():
            assert np.array_equal(state.params[name].data, value)


class TestRollout:
    task = _shift_task(0, n=4, window=2, horizon=3)

    def test_unit_shift(self):
        window = np.moveaxis(self.task.inputs[0], -1, 0)
        frames = rollout(_roll_model, 0, window, grid, RolloutSpec(window=2, horizon=3))
        assert frames.shape == (3, 32)
        assert np.allclose(frames, self.task.outputs[0])

    def test_last_frame(self):
        windows = np.moveaxis(self.task.inputs, -1, 1)
        frames = rollout_batch(lambda a, g, label: a[..., -1:], 0, windows, grid, RolloutSpec(2, 4))
        assert frames.shape == (4, 4, 32)
        assert np.array_equal(frames, np.broadcast_to(windows[:, -1:], frames.shape))

    def test_invalid(self):
        with raises(ValueError):
            RolloutSpec(window=0)
        with raises(ValueError):
            RolloutSpec(stride=2)
        windows = np.moveaxis(self.task.inputs, -1, 1)
        with raises(ValueError):
            rollout_batch(_roll_model, 0, windows, grid, RolloutSpec(window=3))
        with raises(ValueError):
            rollout_batch(lambda a, g, label: a, 0, windows, grid, RolloutSpec(2, 1))
        with raises(TypeError):
            rollout_batch(None, 0, windows, grid, RolloutSpec(2, 1))

    def test_evaluate(self):
        accuracies = evaluate_rollout(_roll_model, self.task)
        assert accuracies.shape == (4, 3)
        assert np.allclose(accuracies, 1)
        assert evaluate_rollout(_roll_model, self.task, RolloutSpec(1, 2)).shape == (4, 2)
        with raises(ValueError):
            evaluate_rollout(_roll_model, self.task, RolloutSpec(2, 4))

    def test_evaluate_model(self):
        state = init_state(tiny)
        serial = evaluate_rollout(state, self.task, batch_size=3)
        threaded = evaluate_rollout(state, self.task, n_jobs=2, batch_size=1)
        assert serial.shape == (4, 3)
        assert np.all(serial <= 1)
        assert np.allclose(serial, threaded)

    def test_static(self):
        task = _static_task(0)
        accuracies = evaluate_rollout(lambda a, g, label: 2 * a, task)
        assert accuracies.shape == (4, 1)
        assert np.allclose(accuracies, 1)
        assert np.allclose(one_step_accuracy(lambda a, g, label: a, task), 0.5)


class TestCheckpoint:
    def test_round_trip(self, tmp_path):
        tasks = [_shift_task(0), _shift_task(1, shift=-1)]
        state, memory, _ = train_foundation(tasks, init_state(tiny), TrainConfig(epochs=1, batch_size=6))
        save_checkpoint(state, memory, tmp_path / 'ckpt' / 'model', metadata={'command': 'train-foundation'})
        loaded, loaded_memory, extra = load_checkpoint(tmp_path / 'ckpt' / 'model')
        assert extra == {'command': 'train-foundation'}
        assert loaded.config == state.config
        for name, p in state.params.items():
            assert np.array_equal(loaded.params[name].data, p.data)
            assert loaded.params[name].requires_grad
        assert loaded_memory.labels == [0, 1]
        for name, value in memory[1].items():
            assert np.array_equal(loaded_memory[1][name], value)
        a = tasks[0].inputs
        assert np.array_equal(predict(loaded, a, grid, 1), predict(state, a, grid, 1))

    def test_read_only(self, tmp_path):
        state = init_state(tiny)
        save_checkpoint(state, None, tmp_path / 'model')
        loaded, memory, _ = load_checkpoint(tmp_path / 'model', read_only=True)
        assert len(memory) == 0
        with raises(ValueError):
            loaded.params['lift.weight'].data[0, 0] = 1.

    def test_layout(self, tmp_path):
        state = init_state(tiny)
        save_checkpoint(state, None, tmp_path / 'model')
        blobs = {p.name for p in (tmp_path / 'model.tensors').iterdir()}
        assert blobs == {name + '.bin' for name in state.params}
        state.params['lift.bias'].data[0] = np.nan
        with raises(NumericalError):
            save_checkpoint(state, None, tmp_path / 'broken')
        assert not (tmp_path / 'broken.json').exists()

    def test_not_a_checkpoint(self, tmp_path):
        save_tensors(tmp_path / 'other', {'a': np.ones(2)})
        with raises(ValueError):
            load_checkpoint(tmp_path / 'other')


class TestReport:
    def test_run_log_appends(self, tmp_path):
        path = tmp_path / 'logs' / 'run.csv'
        RunLog(path).write(0, 'foundation', 'heat_1d', 0.5, 1e-3, 12.4)
        RunLog(path).write(1, 'foundation', 'heat_1d', 0.25, 1e-3, 11.6)
        assert path.read_text().splitlines() == ['epoch,phase,task,loss,lr,wall_ms',
                                                 '0,foundation,heat_1d,0.5,0.001,12',
                                                 '1,foundation,heat_1d,0.25,0.001,12']

    def test_metrics_csv(self, tmp_path):
        rng = np.random.default_rng(3)
        curves = {'heat_1d': 1 - 0.1 * rng.random((5, 3)), 'burgers_1d': 1 - 0.1 * rng.random(5)}
        write_metrics_csv(tmp_path / 'metrics.csv', curves)
        with open(tmp_path / 'metrics.csv', newline='') as f:
            rows = list(csv.DictReader(f))
        assert [(r['task'], r['step']) for r in rows] == [('heat_1d', '1'), ('heat_1d', '2'), ('heat_1d', '3'),
                                                          ('burgers_1d', '1')]
        for row in rows:
            assert float(row['ci95_low']) <= float(row['mean_acc']) <= float(row['ci95_high'])
            assert 0.9 <= float(row['mean_acc']) <= 1
        assert accuracy_rows('t', np.ones(4)) == [('t', 1, 1., 1., 1.)]


desk = ModelConfig(grid_shape=(64,), in_channels=10, n_blocks=2, n_experts=3, width=16, max_tasks=3)


def _desk_task(name, label, n_train, seed):
    dataset = recipe(name, shape=(64,), window=10, horizon=1).build(n_train + 20, base_seed=seed, label=label)
    return split_dataset(dataset, 20)


def _mean_accuracy(state, memory, test):
    activate_task(state, memory, test.label)
    return float(np.mean(one_step_accuracy(state, test)))


@fixture(scope='module')
def desk_tasks():
    return {'nagumo': _desk_task('nagumo_1d', 0, 200, 1), 'burgers': _desk_task('burgers_1d', 1, 200, 2),
            'heat': _desk_task('heat_1d', 2, 100, 3)}


@fixture(scope='module')
def desk_run(desk_tasks, tmp_path_factory):
    log_path = tmp_path_factory.mktemp('desk') / 'run.csv'
    log = RunLog(log_path)
    foundation = [desk_tasks['nagumo'][0], desk_tasks['burgers'][0]]
    state, memory, _ = train_foundation(foundation, init_state(desk, 0), TrainConfig(epochs=50), run_log=log)
    accuracy = {name: _mean_accuracy(state, memory, desk_tasks[name][1]) for name in ('nagumo', 'burgers')}
    old = desk_tasks['nagumo'][1]
    before = predict(state, old.inputs, old.grid, old.label)
    combinatorial_transfer(state, memory, desk_tasks['heat'][0], TrainConfig(phase='transfer', epochs=25),
                           base_label=0, run_log=log)
    with open(log_path, newline='') as f:
        rows = list(csv.DictReader(f))
    return {'state': state, 'memory': memory, 'accuracy': accuracy, 'before': before, 'log': rows}


@mark.slow
class TestDeskScale:
    def test_identity_task(self):
        config = ModelConfig(grid_shape=(64,), in_channels=1, n_blocks=2, n_experts=3, width=16, max_tasks=1)
        rng = np.random.default_rng(0)
        x64 = make_grid((64,))[..., 0]
        u0 = np.array([np.sin(2 * np.pi * (rng.integers(1, 4) * x64 + rng.random())) for _ in range(100)])
        task = TaskDataset('identity', 0, make_grid((64,)), u0[..., None], u0[:, None], time_dependent=False)
        _, _, history = train_foundation([task], init_state(config, 0), TrainConfig(epochs=50, batch_size=10))
        assert history[-1] < 1e-2
        moving = np.convolve(history, np.ones(10) / 10, mode='valid')
        assert np.all(np.diff(moving) <= 1e-3)

    def test_foundation_accuracy(self, desk_run):
        for name, accuracy in desk_run['accuracy'].items():
            assert accuracy > 0.9, name

    def test_transfer_accuracy(self, desk_run, desk_tasks):
        state, memory = desk_run['state'], desk_run['memory']
        assert _mean_accuracy(state, memory, desk_tasks['heat'][1]) > 0.85
        old = desk_tasks['nagumo'][1]
        activate_task(state, memory, old.label)
        assert np.array_equal(predict(state, old.inputs, old.grid, old.label), desk_run['before'])

    def test_transfer_cost(self, desk_run):
        config = ModelConfig()
        assert count_parameters(config, gate_only=True) < 0.5 * count_parameters(config)
        wall = {phase: np.mean([float(r['wall_ms']) for r in desk_run['log'] if r['phase'] == phase])
                for phase in ('foundation', 'transfer')}
        assert wall['transfer'] <= wall['foundation']

    def test_expert_count(self, desk_tasks):
        errors = {}
        foundation = [desk_tasks['nagumo'][0], desk_tasks['burgers'][0]]
        heat_train, heat_test = desk_tasks['heat']
        for n_experts in (3, 6):
            config = replace(desk, n_experts=n_experts, bases=None)
            errors[n_experts] = []
            for seed in range(3):
                state, memory, _ = train_foundation(foundation, init_state(config, seed),
                                                    TrainConfig(epochs=50, seed=seed))
                combinatorial_transfer(state, memory, heat_train, TrainConfig(phase='transfer', epochs=25, seed=seed),
                                       base_label=0)
                errors[n_experts].append(1 - _mean_accuracy(state, memory, heat_test))
        assert np.mean(errors[3]) >= np.mean(errors[6])
