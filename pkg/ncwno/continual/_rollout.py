from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ncwno.continual._metrics import accuracy_metric
from ncwno.model import ModelState, predict


@dataclass
class RolloutSpec:
    """Autoregressive forecast: ``window`` past frames as channels, ``horizon`` predicted frames."""
    window: int = 10
    horizon: int = 30
    stride: int = 1

    def __post_init__(self):
        if self.window < 1 or self.horizon < 1:
            raise ValueError('`window` and `horizon` must be positive, got %d and %d.' % (self.window, self.horizon))
        if self.stride != 1:
            raise ValueError('`stride` %r is not implemented.' % self.stride)


def _one_step(model):
    if isinstance(model, ModelState):
        return lambda a, grid, label: predict(model, a, grid, label)
    if callable(model):
        return model
    raise TypeError('`model` must be a ModelState or a callable, got %r.' % type(model).__name__)


def rollout_batch(model, label, windows, grid, spec):
    """Time-march a batch of windows.

    Parameters
    ----------
    model : ModelState or callable
        A callable gets ``(a, grid, label)`` with ``a`` of shape ``(batch, *grid, window)`` and returns the next frame
        with shape ``(batch, *grid)`` or ``(batch, *grid, 1)``.
    label : int or array-like of int
    windows : array-like, shape (batch, window, *grid)
    grid : array-like, shape (*grid, rank)
    spec : RolloutSpec

    Returns
    -------
    frames : array, shape (batch, horizon, *grid)
    """
    step = _one_step(model)
    windows = np.asarray(windows)
    if windows.ndim < 3 or windows.shape[1] != spec.window:
        raise ValueError('Windows of shape %s do not hold %d frames.' % (windows.shape, spec.window))
    current = np.moveaxis(windows, 1, -1)
    frames = []
    for _ in range(spec.horizon):
        nxt = np.asarray(step(current, grid, label))
        if nxt.shape == current.shape[:-1] + (1,):
            nxt = nxt[..., 0]
        elif nxt.shape != current.shape[:-1]:
            raise ValueError('One-step prediction of shape %s does not match %s.' % (nxt.shape, current.shape[:-1]))
        frames.append(nxt)
        current = np.concatenate([current[..., 1:], nxt[..., None].astype(current.dtype)], axis=-1)
    return np.stack(frames, axis=1)


def rollout(model, label, window, grid, spec):
    """Forecast ``spec.horizon`` frames from one ``(window, *grid)`` history by sliding the window one frame at a
    time over the model's own predictions."""
    window = np.asarray(window)
    return rollout_batch(model, label, window[None], grid, spec)[0]


def _chunks(n, size):
    return [np.arange(i, min(i + size, n)) for i in range(0, n, size)]


def evaluate_rollout(state, dataset, spec=None, n_jobs=1, batch_size=20):
    """Accuracy of free-running forecasts against the stored outputs.

    Static tasks are scored on their single output frame.

    Parameters
    ----------
    state : ModelState or callable
        Read only; chunks of samples are rolled out in ``n_jobs`` threads.
    dataset : TaskDataset
    spec : RolloutSpec, optional
        Defaults to the dataset window and horizon.
    n_jobs : int, default 1
    batch_size : int, default 20

    Returns
    -------
    accuracies : array, shape (n_samples, horizon)
        ``1 - relative L2 error`` per sample and forecast step.
    """
    assert n_jobs >= 1, '`n_jobs` must be positive.'
    if not dataset.time_dependent:
        return one_step_accuracy(state, dataset, batch_size)[:, None]
    spec = RolloutSpec(dataset.window, dataset.horizon) if spec is None else spec
    if spec.horizon > dataset.horizon or spec.window > dataset.window:
        raise ValueError('Rollout %s exceeds the stored window %d and horizon %d.'
                         % (spec, dataset.window, dataset.horizon))
    windows = np.moveaxis(dataset.inputs[..., dataset.window - spec.window:], -1, 1)

    def run(index):
        frames = rollout_batch(state, dataset.label, windows[index], dataset.grid, spec)
        return [[accuracy_metric(dataset.outputs[i, t], frames[k, t]) for t in range(spec.horizon)]
                for k, i in enumerate(index)]

    with ThreadPoolExecutor(max_workers=n_jobs) as executor:
        chunks = list(executor.map(run, _chunks(dataset.n_samples, batch_size)))
    return np.array([row for chunk in chunks for row in chunk]).reshape(dataset.n_samples, spec.horizon)


def one_step_accuracy(state, dataset, batch_size=20):
    """Accuracy of the first output frame predicted from the stored input window, per sample."""
    step = _one_step(state)
    accuracies = []
    for index in _chunks(dataset.n_samples, batch_size):
        nxt = np.asarray(step(dataset.inputs[index], dataset.grid, dataset.label))
        nxt = nxt.reshape(dataset.outputs[index, 0].shape)
        accuracies.extend(accuracy_metric(dataset.outputs[i, 0], nxt[k]) for k, i in enumerate(index))
    return np.array(accuracies)
