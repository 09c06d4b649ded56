import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from sklearn.utils.validation import check_array

from ncwno.exceptions import NumericalError, StabilityError
from ncwno.model import make_grid
from ncwno.pde._grf import GrfSpec, SquareWaveSpec, sample_initial_condition
from ncwno.pde._solvers import solve
from ncwno.pde._spec import PdeSpec

logger = logging.getLogger(__name__)

MASK64 = (1 << 64) - 1
STORAGE_DTYPE = '<f4'
FORMAT_VERSION = 1


def splitmix64(seed, index):
    """Per-sample seed derived from a base seed and a sample index."""
    z = (int(seed) + (int(index) + 1) * 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@dataclass
class TaskDataset:
    """Input/output pairs of one task.

    Time-dependent tasks hold the first ``window`` frames of each trajectory as input channels and the following
    ``horizon`` frames as outputs; static tasks map the initial condition to a single output frame.

    Attributes
    ----------
    name : str
    label : int
    grid : array, shape (*grid, rank)
        Normalized coordinates.
    inputs : array, shape (n_samples, *grid, window)
    outputs : array, shape (n_samples, horizon, *grid)
    provenance : dict
        Generator parameters and per-sample seeds.
    time_dependent : bool
    """
    name: str
    label: int
    grid: np.ndarray
    inputs: np.ndarray
    outputs: np.ndarray
    provenance: dict = field(default_factory=dict)
    time_dependent: bool = True

    def __post_init__(self):
        spatial = self.grid.shape[:-1]
        if self.grid.shape[-1] != len(spatial):
            raise ValueError('Grid of shape %s must end with its rank.' % (self.grid.shape,))
        if self.inputs.shape[1:-1] != spatial or self.outputs.shape[2:] != spatial:
            raise ValueError('Inputs %s and outputs %s do not match grid %s.'
                             % (self.inputs.shape, self.outputs.shape, spatial))
        if self.inputs.shape[0] != self.outputs.shape[0]:
            raise ValueError('Got %d inputs but %d outputs.' % (self.inputs.shape[0], self.outputs.shape[0]))

    @property
    def n_samples(self):
        return self.inputs.shape[0]

    @property
    def window(self):
        return self.inputs.shape[-1]

    @property
    def horizon(self):
        return self.outputs.shape[1]

    @property
    def grid_shape(self):
        return self.grid.shape[:-1]

    def trajectories(self):
        """Full trajectories, shape ``(n_samples, window + horizon, *grid)``."""
        if not self.time_dependent:
            raise ValueError('`%s` is a static task and holds no trajectories.' % self.name)
        return np.concatenate([np.moveaxis(self.inputs, -1, 1), self.outputs], axis=1)

    def subset(self, index):
        """Samples selected by an integer array, a boolean mask or a slice."""
        idx = np.arange(self.n_samples)[index]
        provenance = dict(self.provenance)
        if 'seeds' in provenance:
            provenance['seeds'] = [provenance['seeds'][i] for i in idx]
        return TaskDataset(self.name, self.label, self.grid, self.inputs[idx], self.outputs[idx], provenance,
                           self.time_dependent)


def _sample(pde, ic, window, horizon, time_dependent, seed, index):
    rng = np.random.default_rng(seed)
    u0 = sample_initial_condition(ic, rng)
    try:
        trajectory = solve(pde, u0)
    except (NumericalError, StabilityError) as e:
        raise type(e)('sample %d (seed %d): %s' % (index, seed, e)) from e
    if time_dependent:
        return np.moveaxis(trajectory[:window], 0, -1), trajectory[window:window + horizon]
    return u0[..., None], trajectory[-1:]


def build_dataset(pde, ic, n_samples, base_seed=0, window=10, horizon=30, label=0, name=None, time_dependent=True,
                  n_jobs=1):
    """Sample initial conditions, integrate them and cut trajectories into input/output pairs.

    Parameters
    ----------
    pde : PdeSpec
    ic : GrfSpec or SquareWaveSpec
    n_samples : int
    base_seed : int, default 0
        Sample ``i`` draws from ``splitmix64(base_seed, i)``, so results do not depend on ``n_jobs``.
    window, horizon : int
        Input and output frame counts of time-dependent tasks.
    label : int, default 0
    name : str, optional
    time_dependent : bool, default True
        If False, pairs map the initial condition to the last recorded frame.
    n_jobs : int, default 1
        Worker threads.

    Returns
    -------
    dataset : TaskDataset
    """
    assert n_samples >= 0, '`n_samples` must be non-negative.'
    assert n_jobs >= 1, '`n_jobs` must be positive.'
    if tuple(ic.shape) != pde.shape:
        raise ValueError('Initial condition grid %s does not match solver grid %s.' % (ic.shape, pde.shape))
    if time_dependent and pde.n_records < window + horizon:
        raise ValueError('%d recorded frames cannot cover a window of %d and a horizon of %d.'
                         % (pde.n_records, window, horizon))
    if not time_dependent:
        window, horizon = 1, 1
    seeds = [splitmix64(base_seed, i) for i in range(n_samples)]
    name = name or pde.family
    logger.info('Generating %d samples of `%s` on %s.', n_samples, name, pde.shape)

    def run(i):
        return _sample(pde, ic, window, horizon, time_dependent, seeds[i], i)

    with ThreadPoolExecutor(max_workers=n_jobs) as executor:
        pairs = list(executor.map(run, range(n_samples)))
    inputs = np.empty((n_samples,) + pde.shape + (window,), dtype=np.float32)
    outputs = np.empty((n_samples, horizon) + pde.shape, dtype=np.float32)
    for i, (x, y) in enumerate(pairs):
        inputs[i], outputs[i] = x, y

    provenance = {'pde': asdict(pde), 'ic': {'type': type(ic).__name__, **asdict(ic)}, 'base_seed': int(base_seed),
                  'seeds': seeds}
    grid = make_grid(pde.shape, endpoint=pde.endpoint)
    return TaskDataset(name, int(label), grid, inputs, outputs, provenance, time_dependent)


def split_dataset(dataset, n_test):
    """Split into the first ``n_samples - n_test`` samples and the last ``n_test``."""
    if not 0 <= n_test <= dataset.n_samples:
        raise ValueError('Cannot hold out %d of %d samples.' % (n_test, dataset.n_samples))
    n_train = dataset.n_samples - n_test
    return dataset.subset(slice(0, n_train)), dataset.subset(slice(n_train, None))


def _json_default(value):
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    if isinstance(value, (np.ndarray, tuple)):
        return list(value)
    raise TypeError('Cannot serialize %r.' % (value,))


def save_dataset(dataset, directory):
    """Write ``manifest``, ``inputs.bin``, ``outputs.bin`` and ``grid.bin`` (little-endian float32) to
    ``directory``. Output is byte-identical for equal datasets."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        'format_version': FORMAT_VERSION,
        'name': dataset.name,
        'label': int(dataset.label),
        'time_dependent': bool(dataset.time_dependent),
        'dtype': STORAGE_DTYPE,
        'shapes': {'inputs': list(dataset.inputs.shape), 'outputs': list(dataset.outputs.shape),
                   'grid': list(dataset.grid.shape)},
        'provenance': dataset.provenance,
    }
    for name in ('inputs', 'outputs', 'grid'):
        np.ascontiguousarray(getattr(dataset, name), dtype=STORAGE_DTYPE).tofile(str(directory / (name + '.bin')))
    with open(directory / 'manifest', 'w', encoding='utf-8') as f:
        json.dump(manifest, f, sort_keys=True, indent=2, default=_json_default)
    logger.info('Saved `%s` (%d samples) to %s.', dataset.name, dataset.n_samples, directory)


def load_dataset(directory):
    """Read a container written by :func:`save_dataset`, or supplied externally in the same layout."""
    directory = Path(directory)
    try:
        with open(directory / 'manifest', encoding='utf-8') as f:
            manifest = json.load(f)
    except FileNotFoundError as e:
        raise FileNotFoundError('No dataset manifest in %s.' % directory) from e
    if manifest.get('format_version', FORMAT_VERSION) != FORMAT_VERSION:
        raise ValueError('Unsupported dataset format %r.' % manifest['format_version'])
    dtype = np.dtype(manifest.get('dtype', STORAGE_DTYPE))
    arrays = {}
    for name, shape in manifest['shapes'].items():
        data = np.fromfile(str(directory / (name + '.bin')), dtype=dtype)
        if data.size != int(np.prod(shape)):
            raise ValueError('`%s.bin` holds %d values, expected shape %s.' % (name, data.size, shape))
        arrays[name] = check_array(data.reshape(shape), dtype=np.float32, ensure_2d=False, allow_nd=True,
                                   ensure_min_samples=0)
    return TaskDataset(manifest['name'], int(manifest['label']), arrays['grid'], arrays['inputs'], arrays['outputs'],
                       manifest.get('provenance', {}), bool(manifest.get('time_dependent', True)))


def pde_spec_from_provenance(provenance):
    return PdeSpec(**provenance['pde'])


def ic_spec_from_provenance(provenance):
    ic = dict(provenance['ic'])
    kind = ic.pop('type')
    return {'GrfSpec': GrfSpec, 'SquareWaveSpec': SquareWaveSpec}[kind](**ic)
