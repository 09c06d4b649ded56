import json
from pathlib import Path

import numpy as np

from ncwno.exceptions import NumericalError
from ncwno.tensor._tensor import Tensor

BLOB_SUFFIX = '.bin'


def _paths(stem):
    stem = str(stem)
    return Path(stem + '.json'), Path(stem + '.tensors')


def save_tensors(stem, tensors, metadata=None):
    """Write named arrays as ``<stem>.json`` (layout and metadata) and one little-endian row-major blob per array
    under ``<stem>.tensors/``.

    Parameters
    ----------
    stem : str or Path
        Path without suffix.
    tensors : dict of str to array-like
        Arrays in the order they are listed in the layout.
    metadata : dict or None
        JSON-serializable document stored next to the layout.

    Raises
    ------
    NumericalError
        If a floating-point array holds NaN or Inf. Nothing is written in that case.
    """
    meta_path, blob_dir = _paths(stem)
    arrays = {}
    for name, array in tensors.items():
        if isinstance(array, Tensor):
            array = array.data
        array = np.asarray(array)
        if array.dtype.kind in 'fc' and not np.all(np.isfinite(array)):
            raise NumericalError('Tensor `%s` is not finite.' % name)
        assert '/' not in name and '\\' not in name, '`%s` cannot be used as a tensor name.' % name
        array = np.ascontiguousarray(array).reshape(array.shape)
        arrays[name] = array.astype(array.dtype.newbyteorder('<'), copy=False)

    blob_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, array in arrays.items():
        with open(blob_dir / (name + BLOB_SUFFIX), 'wb') as f:
            f.write(array.tobytes(order='C'))
        entries.append({'name': name, 'file': name + BLOB_SUFFIX, 'shape': list(array.shape),
                        'dtype': array.dtype.str, 'offset': 0, 'nbytes': array.nbytes})
    document = {'tensors': entries, 'metadata': metadata or {}}
    with open(meta_path, 'w', encoding='utf-8') as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write('\n')


def load_tensors(stem, read_only=True):
    """Read arrays written by :func:`save_tensors`.

    Returns
    -------
    tensors : dict of str to array
        Arrays in layout order; read-only views of the file contents unless ``read_only`` is False.
    metadata : dict
    """
    meta_path, blob_dir = _paths(stem)
    with open(meta_path, encoding='utf-8') as f:
        document = json.load(f)
    tensors = {}
    for entry in document['tensors']:
        blob_path = blob_dir / entry['file']
        with open(blob_path, 'rb') as f:
            blob = f.read()
        dtype = np.dtype(entry['dtype'])
        count = int(np.prod(entry['shape'], dtype=np.int64))
        if entry['offset'] + count * dtype.itemsize > len(blob):
            raise ValueError('Tensor `%s` runs past the end of %s.' % (entry['name'], blob_path))
        array = np.frombuffer(blob, dtype=dtype, count=count, offset=entry['offset']).reshape(entry['shape'])
        tensors[entry['name']] = array if read_only else array.astype(dtype.newbyteorder('='))
    return tensors, document['metadata']
