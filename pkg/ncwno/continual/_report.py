import csv
from pathlib import Path

import numpy as np

from ncwno.continual._metrics import confidence_interval

RUN_LOG_COLUMNS = ('epoch', 'phase', 'task', 'loss', 'lr', 'wall_ms')
METRICS_COLUMNS = ('task', 'step', 'mean_acc', 'ci95_low', 'ci95_high')


def _number(value):
    return '%.10g' % value


class RunLog:
    """Append-only CSV of per-epoch training records.

    The header is written when the file is created; later runs append below it.
    """

    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if not self.path.exists() or self.path.stat().st_size == 0:
            with open(self.path, 'w', encoding='utf-8', newline='') as f:
                f.write(','.join(RUN_LOG_COLUMNS) + '\n')

    def write(self, epoch, phase, task, loss, lr, wall_ms):
        with open(self.path, 'a', encoding='utf-8', newline='') as f:
            f.write('%d,%s,%s,%s,%s,%d\n' % (epoch, phase, task, _number(loss), _number(lr), round(wall_ms)))


def accuracy_rows(task, accuracies):
    """Rows of :data:`METRICS_COLUMNS` for an ``(n_samples, n_steps)`` accuracy array, steps counted from 1."""
    accuracies = np.asarray(accuracies, dtype=np.float64)
    if accuracies.ndim == 1:
        accuracies = accuracies[:, None]
    rows = []
    for step in range(accuracies.shape[1]):
        mean, low, high = confidence_interval(accuracies[:, step])
        rows.append((task, step + 1, mean, low, high))
    return rows


def write_metrics_csv(path, curves):
    """Write per-task accuracy curves.

    Parameters
    ----------
    path : str or Path
    curves : dict of str to array, shape (n_samples, n_steps)
        Accuracies keyed by task name, written in insertion order.
    """
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(METRICS_COLUMNS)
        for task, accuracies in curves.items():
            for task_name, step, mean, low, high in accuracy_rows(task, accuracies):
                writer.writerow([task_name, step, _number(mean), _number(low), _number(high)])


def write_similarity_csv(path, names, matrix):
    with open(path, 'w', encoding='utf-8', newline='') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(['task'] + list(names))
        for name, row in zip(names, np.asarray(matrix)):
            writer.writerow([name] + [_number(v) for v in row])
