import logging
import time
from dataclasses import dataclass, replace

import numpy as np

from ncwno.continual._memory import SemanticMemory
from ncwno.exceptions import NumericalError
from ncwno.model import ncwno_forward
from ncwno.tensor import Adam, backward, sqrt, step_lr_schedule, tensor_sum

logger = logging.getLogger(__name__)

PHASES = ('foundation', 'transfer')
LOSSES = ('relative_l2', 'mse')
DEFAULT_EPOCHS = {'foundation': 150, 'transfer': 50}
NORM_FLOOR = 1e-20


@dataclass
class TrainConfig:
    """Optimization settings of one training phase.

    Parameters
    ----------
    epochs : int, optional
        Defaults to 150 for the foundation phase and 50 for transfer.
    batch_size : int, default 20
    base_lr : float, default 1e-3
    weight_decay : float, default 1e-6
    step_size : int, default 20
        Epochs between learning-rate decays.
    gamma : float, default 0.5
        Learning-rate decay factor.
    loss : {'relative_l2', 'mse'}
    seed : int, default 0
        Seed of the batch shuffling.
    phase : {'foundation', 'transfer'}
        The transfer phase trains the gates and the label encoder only.
    pairs_per_sample : int, optional
        Number of evenly spaced one-step windows drawn per trajectory; all windows by default.
    clip_norm : float, optional
        Global gradient-norm clipping threshold.
    overwrite : bool, default False
        Allow replacing a stored gate snapshot.
    verbose : bool, default False
        Log per-epoch progress at INFO instead of DEBUG.
    """
    epochs: int = None
    batch_size: int = 20
    base_lr: float = 1e-3
    weight_decay: float = 1e-6
    step_size: int = 20
    gamma: float = 0.5
    loss: str = 'relative_l2'
    seed: int = 0
    phase: str = 'foundation'
    pairs_per_sample: int = None
    clip_norm: float = None
    overwrite: bool = False
    verbose: bool = False

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ValueError('`%s` is not implemented.' % self.phase)
        if self.loss not in LOSSES:
            raise ValueError('`%s` is not implemented.' % self.loss)
        if self.epochs is None:
            self.epochs = DEFAULT_EPOCHS[self.phase]
        assert self.epochs >= 0, '`epochs` must be non-negative.'
        assert self.batch_size >= 1, '`batch_size` must be positive.'
        assert self.base_lr > 0, '`base_lr` must be positive.'
        assert self.weight_decay >= 0, '`weight_decay` must be non-negative.'
        assert self.step_size >= 1, '`step_size` must be positive.'
        assert 0 < self.gamma <= 1, '`gamma` must lie in (0, 1].'
        assert self.pairs_per_sample is None or self.pairs_per_sample >= 1, '`pairs_per_sample` must be positive.'
        assert self.clip_norm is None or self.clip_norm > 0, '`clip_norm` must be positive.'

    def trainable_names(self, state):
        if self.phase == 'transfer':
            return state.gate_parameter_names
        return list(state.params)


def _window_starts(n_starts, pairs_per_sample):
    if pairs_per_sample is None or pairs_per_sample >= n_starts:
        return np.arange(n_starts)
    return np.unique(np.round(np.linspace(0, n_starts - 1, pairs_per_sample)).astype(int))


def make_training_pairs(dataset, window=None, pairs_per_sample=None):
    """One-step training pairs of a task, with ground-truth input windows.

    For a time-dependent task every ``window`` consecutive frames of each trajectory predict the next one; static
    tasks pair each input with its single output frame.

    Parameters
    ----------
    dataset : TaskDataset
    window : int, optional
        Defaults to the dataset window.
    pairs_per_sample : int, optional
        Keep this many evenly spaced windows per trajectory.

    Returns
    -------
    inputs : array, shape (n_pairs, *grid, window)
    targets : array, shape (n_pairs, *grid, 1)
    """
    if not dataset.time_dependent:
        return dataset.inputs, np.moveaxis(dataset.outputs, 1, -1)
    window = dataset.window if window is None else window
    trajectories = dataset.trajectories()
    n_frames = trajectories.shape[1]
    if not 1 <= window < n_frames:
        raise ValueError('A window of %d does not fit %d frames.' % (window, n_frames))
    starts = _window_starts(n_frames - window, pairs_per_sample)
    inputs = np.stack([np.moveaxis(trajectories[:, s:s + window], 1, -1) for s in starts], axis=1)
    targets = np.stack([trajectories[:, s + window] for s in starts], axis=1)[..., None]
    return inputs.reshape((-1,) + inputs.shape[2:]), targets.reshape((-1,) + targets.shape[2:])


def relative_l2_loss(prediction, target):
    """Mean over the batch of per-sample relative L2 errors, differentiable in ``prediction``."""
    target = np.asarray(target, dtype=prediction.dtype)
    if prediction.shape != target.shape:
        raise ValueError('Prediction of shape %s does not match target %s.' % (prediction.shape, target.shape))
    axes = tuple(range(1, target.ndim))
    norms = np.sqrt(np.sum(np.square(target), axis=axes))
    if np.any(norms == 0):
        raise ValueError('Relative loss is undefined for zero-norm targets.')
    diff = prediction - target
    errors = sqrt(tensor_sum(diff * diff, axis=axes) + NORM_FLOOR) / norms
    return errors.mean()


def mse_loss(prediction, target):
    diff = prediction - np.asarray(target, dtype=prediction.dtype)
    return (diff * diff).mean()


_LOSSES = {'relative_l2': relative_l2_loss, 'mse': mse_loss}


def _fit(state, inputs, targets, labels, grids, cfg, task, run_log=None, frozen=()):
    names = cfg.trainable_names(state)
    optimizer = Adam({name: state.params[name] for name in names}, lr=cfg.base_lr, weight_decay=cfg.weight_decay,
                     clip_norm=cfg.clip_norm)
    loss_fn = _LOSSES[cfg.loss]
    rng = np.random.default_rng(cfg.seed)
    n_pairs = inputs.shape[0]
    level = logging.INFO if cfg.verbose else logging.DEBUG
    history = []
    for epoch in range(cfg.epochs):
        optimizer.lr = step_lr_schedule(epoch, cfg.base_lr, cfg.step_size, cfg.gamma)
        start = time.perf_counter()
        total = 0.
        order = rng.permutation(n_pairs)
        for b in range(0, n_pairs, cfg.batch_size):
            index = order[b:b + cfg.batch_size]
            optimizer.zero_grad()
            prediction = ncwno_forward(inputs[index], grids[index], labels[index], state)
            loss = loss_fn(prediction, targets[index])
            value = loss.item()
            if not np.isfinite(value):
                raise NumericalError('%s loss is %r at epoch %d, batch %d of task `%s` (lr %g).'
                                     % (cfg.phase, value, epoch, b // cfg.batch_size, task, optimizer.lr))
            backward(loss)
            for name in frozen:
                assert state.params[name].grad is None, 'Gradient reached frozen parameter `%s`.' % name
            optimizer.step()
            total += value * len(index)
        mean_loss = total / n_pairs
        wall_ms = 1e3 * (time.perf_counter() - start)
        history.append(mean_loss)
        logger.log(level, '%s epoch %d/%d: loss=%.6g lr=%.3g (%.0f ms)', cfg.phase, epoch + 1, cfg.epochs,
                   mean_loss, optimizer.lr, wall_ms)
        if run_log is not None:
            run_log.write(epoch, cfg.phase, task, mean_loss, optimizer.lr, wall_ms)
    return history


def _check_task(dataset, state):
    config = state.config
    if dataset.grid_shape != config.grid_shape:
        raise ValueError('Task `%s` lives on grid %s, the model on %s.' % (dataset.name, dataset.grid_shape,
                                                                          config.grid_shape))
    if dataset.n_samples == 0:
        raise ValueError('Task `%s` holds no samples.' % dataset.name)
    if not 0 <= dataset.label < config.max_tasks:
        raise ValueError('Task `%s` has label %d outside [0, %d).' % (dataset.name, dataset.label, config.max_tasks))


def _task_pairs(dataset, state, cfg):
    inputs, targets = make_training_pairs(dataset, state.config.in_channels, cfg.pairs_per_sample)
    if inputs.shape[-1] != state.config.in_channels:
        raise ValueError('Task `%s` provides %d input channels, the model expects %d.'
                         % (dataset.name, inputs.shape[-1], state.config.in_channels))
    return inputs, targets


def train_foundation(tasks, state, cfg, memory=None, run_log=None):
    """Train every parameter jointly on a set of tasks.

    Each epoch shuffles the union of all tasks' one-step pairs, so batches mix tasks. At the end the gate and
    label-encoder parameters are stored in the semantic memory under every foundation label.

    Parameters
    ----------
    tasks : list of TaskDataset
        Tasks with distinct labels on the model grid.
    state : ModelState
        Trained in place.
    cfg : TrainConfig
    memory : SemanticMemory, optional
        Pool receiving the gate snapshots; a new one is created if None.
    run_log : RunLog, optional

    Returns
    -------
    state : ModelState
    memory : SemanticMemory
    history : list of float
        Mean training loss per epoch.
    """
    if not tasks:
        raise ValueError('Foundation training needs at least one task.')
    cfg = replace(cfg, phase='foundation') if cfg.phase != 'foundation' else cfg
    memory = SemanticMemory() if memory is None else memory
    labels = [task.label for task in tasks]
    if len(set(labels)) != len(labels):
        raise ValueError('Foundation tasks must have distinct labels, got %s.' % labels)
    for task in tasks:
        _check_task(task, state)
    for label in labels:
        if label in memory and not cfg.overwrite:
            raise ValueError('Task %d already has a gate snapshot; set `overwrite` to retrain it.' % label)

    inputs, targets, pair_labels, pair_tasks = [], [], [], []
    for k, task in enumerate(tasks):
        x, y = _task_pairs(task, state, cfg)
        inputs.append(x)
        targets.append(y)
        pair_labels.append(np.full(len(x), task.label))
        pair_tasks.append(np.full(len(x), k))
    task_index = np.concatenate(pair_tasks)
    task_grids = np.stack([task.grid for task in tasks])
    logger.info('Foundation training on %s: %d pairs, %d epochs.', ', '.join(t.name for t in tasks),
                len(task_index), cfg.epochs)
    history = _fit(state, np.concatenate(inputs), np.concatenate(targets), np.concatenate(pair_labels),
                   _GridIndex(task_grids, task_index), cfg, '+'.join(t.name for t in tasks), run_log)

    snapshot = state.snapshot(state.gate_parameter_names)
    for label in labels:
        memory.store(label, snapshot, overwrite=cfg.overwrite)
    return state, memory, history


class _GridIndex:
    """Per-pair coordinate grids, looked up through the pair's task."""

    def __init__(self, grids, task_index):
        self.grids = grids
        self.task_index = task_index

    def __getitem__(self, index):
        return self.grids[self.task_index[index]]


def activate_task(state, memory, label):
    """Load the gate snapshot of ``label`` into ``state``; foundation parameters are left untouched."""
    snapshot = memory[label]
    names = set(state.gate_parameter_names)
    if set(snapshot) != names:
        raise ValueError('Snapshot of task %d does not match the gate parameters of the model.' % label)
    for name, value in snapshot.items():
        param = state.params[name]
        if value.shape != param.shape:
            raise ValueError('Snapshot of `%s` has shape %s, expected %s.' % (name, value.shape, param.shape))
    for name, value in snapshot.items():
        param = state.params[name]
        param.data = np.array(value, dtype=param.dtype)
        param.grad = None
    return state


def combinatorial_transfer(state, memory, new_task, cfg, base_label=None, run_log=None):
    """Fit a new task by training the gates and label encoder only, with the experts, lifting, projection and
    skip paths frozen.

    Parameters
    ----------
    state : ModelState
        Model holding a trained foundation; its gate parameters are updated in place.
    memory : SemanticMemory
        Receives the new gate snapshot under ``new_task.label``.
    new_task : TaskDataset
    cfg : TrainConfig
        A fresh optimizer is created for the phase.
    base_label : int, optional
        Start from the gate snapshot of this stored task instead of the current gates.
    run_log : RunLog, optional

    Returns
    -------
    snapshot : mapping of str to array
        Read-only gate parameters stored for the new task.
    history : list of float
    """
    cfg = replace(cfg, phase='transfer') if cfg.phase != 'transfer' else cfg
    label = new_task.label
    if label in memory and not cfg.overwrite:
        raise ValueError('Task %d already has a gate snapshot; set `overwrite` to retrain it.' % label)
    _check_task(new_task, state)
    if base_label is not None:
        activate_task(state, memory, base_label)

    frozen = state.foundation_parameter_names
    for name in frozen:
        state.params[name].requires_grad = False
        state.params[name].grad = None
    inputs, targets = _task_pairs(new_task, state, cfg)
    logger.info('Transfer to `%s` (label %d): %d pairs, %d of %d parameters trainable.', new_task.name, label,
                len(inputs), state.count(state.gate_parameter_names), state.count())
    try:
        history = _fit(state, inputs, targets, np.full(len(inputs), label),
                       np.broadcast_to(new_task.grid, (len(inputs),) + new_task.grid.shape), cfg, new_task.name,
                       run_log, frozen=frozen)
    finally:
        for name in frozen:
            state.params[name].requires_grad = True
    snapshot = memory.store(label, state.snapshot(state.gate_parameter_names), overwrite=cfg.overwrite)
    return snapshot, history
