from collections import OrderedDict
from types import MappingProxyType

import numpy as np

from ncwno.tensor import Tensor


def _task_label(label):
    if isinstance(label, (bool, np.bool_)) or not isinstance(label, (int, np.integer)):
        raise TypeError('Task labels must be integers, got %r.' % (label,))
    return int(label)


class SemanticMemory:
    """Pool of gate-parameter snapshots keyed by task label.

    Stored snapshots are read-only copies; storing under an existing label needs ``overwrite=True``.
    """

    def __init__(self):
        self._snapshots = OrderedDict()

    def store(self, label, params, overwrite=False):
        """Copy ``params`` (name to array or Tensor) into the pool under ``label`` and return the stored view."""
        label = _task_label(label)
        if label in self._snapshots and not overwrite:
            raise ValueError('Task %d already has a gate snapshot; pass `overwrite=True` to replace it.' % label)
        snapshot = {}
        for name, value in params.items():
            array = np.array(value.data if isinstance(value, Tensor) else value, copy=True)
            array.flags.writeable = False
            snapshot[name] = array
        self._snapshots[label] = MappingProxyType(snapshot)
        return self._snapshots[label]

    def __getitem__(self, label):
        label = _task_label(label)
        if label not in self._snapshots:
            raise KeyError('No gate snapshot for task %d.' % label)
        return self._snapshots[label]

    def __contains__(self, label):
        try:
            return _task_label(label) in self._snapshots
        except TypeError:
            return False

    def __iter__(self):
        return iter(self._snapshots)

    def __len__(self):
        return len(self._snapshots)

    def __repr__(self):
        return 'SemanticMemory(labels=%s)' % list(self._snapshots)

    @property
    def labels(self):
        return list(self._snapshots)

    def items(self):
        return self._snapshots.items()
