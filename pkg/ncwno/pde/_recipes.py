from dataclasses import dataclass, fields, replace

import numpy as np

from ncwno.pde._dataset import build_dataset
from ncwno.pde._grf import GrfSpec, SquareWaveSpec
from ncwno.pde._spec import PdeSpec


@dataclass
class Recipe:
    """Named generator: a solver spec, an initial-condition distribution and the frame split."""
    name: str
    pde: PdeSpec
    ic: object
    window: int = 10
    horizon: int = 30
    time_dependent: bool = True

    def build(self, n_samples, base_seed=0, label=0, n_jobs=1):
        return build_dataset(self.pde, self.ic, n_samples, base_seed=base_seed, window=self.window,
                             horizon=self.horizon, label=label, name=self.name, time_dependent=self.time_dependent,
                             n_jobs=n_jobs)


def _rbf(shape, sigma, length_scale, endpoint=False):
    return GrfSpec(kind='rbf', shape=shape, variance=sigma ** 2, length_scale=length_scale, endpoint=endpoint)


def _recipe(name, pde, ic, window=10, horizon=30):
    pde = replace(pde, n_records=window + horizon)
    return Recipe(name, pde, ic, window, horizon)


RECIPES = {
    'burgers_1d': _recipe('burgers_1d', PdeSpec('burgers', (256,), nu=1e-3), _rbf((256,), 0.1, 0.1)),
    'burgers_2d': _recipe('burgers_2d', PdeSpec('burgers', (64, 64), nu=1e-3), _rbf((64, 64), 0.1, 0.3), horizon=10),
    'wave_1d': _recipe('wave_1d', PdeSpec('wave', (256,), nu=0.1, boundary='reflective'),
                       _rbf((256,), 0.1, 0.1, endpoint=True)),
    'advection_1d': _recipe('advection_1d', PdeSpec('advection', (256,), alpha=0.01), _rbf((256,), 0.1, 0.25)),
    'advection_2d': _recipe('advection_2d', PdeSpec('advection', (64, 64), alpha=0.05), _rbf((64, 64), 0.1, 0.3),
                            horizon=10),
    'heat_1d': _recipe('heat_1d', PdeSpec('heat', (256,), alpha=1e-3), _rbf((256,), 0.1, 0.1)),
    'heat_2d': _recipe('heat_2d', PdeSpec('heat', (64, 64), alpha=1e-3, record_interval=0.1),
                       _rbf((64, 64), 0.1, 0.25), horizon=10),
    'allen_cahn_1d': _recipe('allen_cahn_1d', PdeSpec('reaction_diffusion', (256,), epsilon=1e-3,
                                                      reaction='allen_cahn'), _rbf((256,), 0.1, 0.1)),
    'allen_cahn_2d': _recipe('allen_cahn_2d', PdeSpec('reaction_diffusion', (64, 64), epsilon=1e-3,
                                                      reaction='allen_cahn'), _rbf((64, 64), 0.1, 0.1), horizon=10),
    'nagumo_1d': _recipe('nagumo_1d', PdeSpec('reaction_diffusion', (256,), nu=1e-3, alpha=0.3, reaction='nagumo'),
                         _rbf((256,), np.sqrt(0.1), 0.1)),
    'nagumo_2d': _recipe('nagumo_2d', PdeSpec('reaction_diffusion', (64, 64), nu=1e-3, alpha=0.3, reaction='nagumo'),
                         _rbf((64, 64), np.sqrt(0.1), 0.3), horizon=10),
    'nagumo_2d_matern': _recipe('nagumo_2d_matern',
                                PdeSpec('reaction_diffusion', (64, 64), nu=1e-3, alpha=0.3, reaction='nagumo',
                                        record_interval=0.1),
                                GrfSpec(kind='matern', shape=(64, 64), variance=0.1, length_scale=0.3,
                                        smoothness=10.), horizon=10),
    'navier_stokes_2d': _recipe('navier_stokes_2d',
                                PdeSpec('navier_stokes', (64, 64), nu=1e-3, forcing_amplitude=0.1, dt=1e-4,
                                        record_interval=1.),
                                GrfSpec(kind='spectral_power', shape=(64, 64), amplitude=7 ** 1.5, shift=49.,
                                        exponent=2.5), horizon=10),
    'kuramoto_sivashinsky_1d': _recipe('kuramoto_sivashinsky_1d',
                                       PdeSpec('kuramoto_sivashinsky', (257,), length=22 * np.pi, nu=1., dt=0.01,
                                               record_interval=0.01),
                                       _rbf((257,), 0.1, 0.1)),
    'wave_advection_1d': Recipe('wave_advection_1d',
                                PdeSpec('advection', (40,), alpha=1., dt=0.025, record_interval=1., n_records=2),
                                SquareWaveSpec(shape=(40,)), window=1, horizon=1, time_dependent=False),
}

# one-dimensional and two-dimensional task sequences, in label order
SEQUENCE_1D = ('burgers_1d', 'wave_1d', 'advection_1d', 'heat_1d', 'allen_cahn_1d', 'nagumo_1d')
SEQUENCE_2D = ('burgers_2d', 'advection_2d', 'heat_2d', 'allen_cahn_2d', 'navier_stokes_2d', 'nagumo_2d')


def recipe(name, **overrides):
    """Look up a named recipe and apply overrides.

    Keyword arguments may name ``window``, ``horizon``, ``shape`` (applied to both the solver and the initial
    condition) or any field of the recipe's :class:`PdeSpec` or initial-condition spec.

    Examples
    --------
    >>> r = recipe('heat_1d', shape=(64,), horizon=5)
    >>> r.pde.shape, r.pde.n_records
    ((64,), 15)
    """
    if name not in RECIPES:
        raise ValueError('`%s` is not implemented.' % name)
    base = RECIPES[name]
    window = overrides.pop('window', base.window)
    horizon = overrides.pop('horizon', base.horizon)
    pde_fields = {f.name for f in fields(PdeSpec)}
    ic_fields = {f.name for f in fields(type(base.ic))}
    unknown = set(overrides) - pde_fields - ic_fields
    if unknown:
        raise ValueError('Unknown recipe override(s): %s.' % ', '.join(sorted(unknown)))
    pde_overrides = {k: v for k, v in overrides.items() if k in pde_fields}
    ic_overrides = {k: v for k, v in overrides.items() if k in ic_fields}
    if base.time_dependent:
        pde_overrides.setdefault('n_records', window + horizon)
    pde = replace(base.pde, **pde_overrides)
    ic = replace(base.ic, **ic_overrides)
    return Recipe(base.name, pde, ic, window, horizon, base.time_dependent)
