import logging
from pathlib import Path

import numpy as np

from ncwno.continual._memory import SemanticMemory
from ncwno.model import ModelConfig, ModelState, parameter_shapes
from ncwno.tensor import Tensor, load_tensors, save_tensors
from ncwno.wavelet import filter_bank

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = 'ncwno-checkpoint'
MEMORY_PREFIX = 'memory.'


def save_checkpoint(state, memory, stem, metadata=None):
    """Write model parameters and every stored gate snapshot to ``<stem>.json`` and ``<stem>.tensors/``.

    Snapshots are stored as ``memory.<label>.<parameter>`` tensors after the model parameters.
    """
    memory = SemanticMemory() if memory is None else memory
    Path(str(stem)).parent.mkdir(parents=True, exist_ok=True)
    tensors = {name: p.data for name, p in state.params.items()}
    for label, snapshot in memory.items():
        for name, value in snapshot.items():
            tensors['%s%d.%s' % (MEMORY_PREFIX, label, name)] = value
    document = {'format': CHECKPOINT_FORMAT, 'config': state.config.to_dict(), 'memory_labels': memory.labels,
                'extra': metadata or {}}
    save_tensors(stem, tensors, document)
    logger.info('Saved checkpoint %s with %d stored tasks.', stem, len(memory))


def load_checkpoint(stem, read_only=False):
    """Read a checkpoint written by :func:`save_checkpoint`.

    Parameters
    ----------
    stem : str or Path
    read_only : bool, default False
        Keep parameter arrays as read-only views of the file buffer.

    Returns
    -------
    state : ModelState
    memory : SemanticMemory
    metadata : dict
        The ``metadata`` passed to :func:`save_checkpoint`.
    """
    tensors, document = load_tensors(stem, read_only=read_only)
    if document.get('format') != CHECKPOINT_FORMAT:
        raise ValueError('%s is not a model checkpoint.' % stem)
    config = ModelConfig.from_dict(document['config'])
    params = {}
    for name, shape in parameter_shapes(config).items():
        if name not in tensors:
            raise ValueError('Checkpoint %s lacks parameter `%s`.' % (stem, name))
        if tensors[name].shape != tuple(shape):
            raise ValueError('Parameter `%s` has shape %s, expected %s.' % (name, tensors[name].shape, shape))
        params[name] = Tensor(tensors[name], requires_grad=True, dtype=np.dtype(config.dtype))
    state = ModelState(config=config, params=params, banks=tuple(filter_bank(name) for name in config.bases))

    memory = SemanticMemory()
    gate_names = state.gate_parameter_names
    for label in document['memory_labels']:
        prefix = '%s%d.' % (MEMORY_PREFIX, label)
        memory.store(label, {name: tensors[prefix + name] for name in gate_names})
    return state, memory, document.get('extra', {})
