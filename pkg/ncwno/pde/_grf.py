from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import LinAlgError, cholesky
from sklearn.gaussian_process.kernels import Matern, RBF

GRF_KINDS = ('rbf', 'matern', 'spectral_power')
JITTER = 1e-10


@dataclass
class GrfSpec:
    """Gaussian random field on a regular grid of the unit box.

    Parameters
    ----------
    kind : {'rbf', 'matern', 'spectral_power'}
        Covariance family. ``rbf`` and ``matern`` use ``variance * k(x, x')`` with the scikit-learn kernels;
        ``spectral_power`` is the periodic field with covariance ``amplitude * (-Laplacian + shift)**(-exponent)``.
    shape : tuple of int
        Grid extents.
    variance : float
        Pointwise variance ``sigma**2`` of the ``rbf`` and ``matern`` kinds.
    length_scale : float
        Correlation length, in units of the box side.
    smoothness : float
        Matern order (``nu`` in scikit-learn).
    amplitude, shift, exponent : float
        Parameters of the ``spectral_power`` kind.
    zero_mean : bool
        If True, the constant Fourier mode of ``spectral_power`` draws is removed.
    endpoint : bool
        If True, grid points include both ends of ``[0, 1]``; otherwise they cover ``[0, 1)``.
    seed : int or None
        Seed used when :func:`sample_grf` gets no ``random_state``.
    """
    kind: str = 'rbf'
    shape: tuple = (256,)
    variance: float = 0.01
    length_scale: float = 0.1
    smoothness: float = 10.
    amplitude: float = 7 ** 1.5
    shift: float = 49.
    exponent: float = 2.5
    zero_mean: bool = True
    endpoint: bool = False
    seed: int = None

    def __post_init__(self):
        self.shape = tuple(int(n) for n in np.atleast_1d(self.shape))
        if self.kind not in GRF_KINDS:
            raise ValueError('`%s` is not implemented.' % self.kind)
        for name in ('variance', 'length_scale', 'smoothness', 'amplitude', 'shift', 'exponent'):
            if not getattr(self, name) > 0:
                raise ValueError('`%s` must be positive, got %r.' % (name, getattr(self, name)))
        if not self.shape or min(self.shape) < 1:
            raise ValueError('`shape` must hold positive extents, got %s.' % (self.shape,))


def grid_points(shape, endpoint=False):
    axes = [np.linspace(0, 1, n, endpoint=endpoint) for n in shape]
    return np.stack(np.meshgrid(*axes, indexing='ij'), axis=-1).reshape(-1, len(shape))


def covariance_matrix(spec):
    points = grid_points(spec.shape, spec.endpoint)
    if spec.kind == 'rbf':
        kernel = RBF(length_scale=spec.length_scale)
    else:
        kernel = Matern(length_scale=spec.length_scale, nu=spec.smoothness)
    return spec.variance * kernel(points)


@lru_cache(maxsize=16)
def _cholesky_factor(kind, shape, variance, length_scale, smoothness, endpoint):
    spec = GrfSpec(kind=kind, shape=shape, variance=variance, length_scale=length_scale, smoothness=smoothness,
                   endpoint=endpoint)
    cov = covariance_matrix(spec)
    cov[np.diag_indices_from(cov)] += JITTER
    try:
        factor = cholesky(cov, lower=True, check_finite=False)
    except LinAlgError as e:
        raise ValueError('Covariance of %s is not positive definite after jitter.' % (spec,)) from e
    factor.flags.writeable = False
    return factor


def _spectral_field(spec, rng):
    shape = spec.shape
    k2 = sum(k ** 2 for k in np.meshgrid(*[np.fft.fftfreq(n, d=1. / n) for n in shape], indexing='ij'))
    sqrt_eig = np.sqrt(spec.amplitude * (4 * np.pi ** 2 * k2 + spec.shift) ** (-spec.exponent))
    if spec.zero_mean:
        sqrt_eig.flat[0] = 0.
    noise = np.fft.fftn(rng.standard_normal(shape))
    return np.real(np.fft.ifftn(sqrt_eig * noise)) * np.sqrt(np.prod(shape))


def sample_grf(spec, random_state=None):
    """Draw one zero-mean Gaussian random field.

    ``rbf`` and ``matern`` fields are ``L @ z`` with ``L`` the Cholesky factor of the covariance plus a ``1e-10``
    diagonal jitter; ``spectral_power`` fields scale the Fourier transform of white noise by the square root of
    the covariance eigenvalues ``amplitude * (4 pi**2 |k|**2 + shift)**(-exponent)``, which keeps Hermitian symmetry.

    Parameters
    ----------
    spec : GrfSpec
    random_state : int, numpy.random.Generator or None
        Source of randomness; ``spec.seed`` is used if None.

    Returns
    -------
    field : array, shape spec.shape
    """
    rng = np.random.default_rng(spec.seed if random_state is None else random_state)
    if spec.kind == 'spectral_power':
        return _spectral_field(spec, rng)
    factor = _cholesky_factor(spec.kind, spec.shape, spec.variance, spec.length_scale, spec.smoothness,
                              spec.endpoint)
    return (factor @ rng.standard_normal(factor.shape[0])).reshape(spec.shape)


@dataclass
class SquareWaveSpec:
    """Square wave plus half ellipse on ``[0, 1]`` with uniformly drawn center, width and height."""
    shape: tuple = (40,)
    center_range: tuple = (0.3, 0.7)
    width_range: tuple = (0.3, 0.6)
    height_range: tuple = (1., 2.)
    endpoint: bool = False

    def __post_init__(self):
        self.shape = tuple(int(n) for n in np.atleast_1d(self.shape))
        if len(self.shape) != 1:
            raise ValueError('Square waves are one-dimensional, got shape %s.' % (self.shape,))
        for name in ('center_range', 'width_range', 'height_range'):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError('`%s` must be an ordered pair, got %r.' % (name, getattr(self, name)))
            setattr(self, name, (float(lo), float(hi)))
        if self.width_range[0] <= 0 or self.height_range[0] <= 0:
            raise ValueError('Widths and heights must be positive.')


def square_wave_ic(center, width, height, x):
    """``height * 1[|x - center| <= width / 2] + sqrt(max(height**2 - (a * (x - center))**2, 0))`` with
    ``a = 2 * height / width``, so the half ellipse closes exactly at the edges of the square wave."""
    x = np.asarray(x, dtype=np.float64)
    a = 2 * height / width
    box = height * (np.abs(x - center) <= width / 2)
    return box + np.sqrt(np.maximum(height ** 2 - (a * (x - center)) ** 2, 0))


def sample_square_wave(spec, random_state=None):
    rng = np.random.default_rng(random_state)
    center = rng.uniform(*spec.center_range)
    width = rng.uniform(*spec.width_range)
    height = rng.uniform(*spec.height_range)
    x = np.linspace(0, 1, spec.shape[0], endpoint=spec.endpoint)
    return square_wave_ic(center, width, height, x)


def sample_initial_condition(spec, random_state=None):
    if isinstance(spec, GrfSpec):
        return sample_grf(spec, random_state)
    if isinstance(spec, SquareWaveSpec):
        return sample_square_wave(spec, random_state)
    raise TypeError('Unsupported initial condition spec %r.' % (spec,))
