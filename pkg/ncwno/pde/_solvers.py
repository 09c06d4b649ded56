import logging

import numpy as np

from ncwno.exceptions import NumericalError, StabilityError

logger = logging.getLogger(__name__)

CONTOUR_POINTS = 32


def _check_initial(spec, u0, family):
    if spec.family != family:
        raise ValueError('Expected a `%s` spec, got `%s`.' % (family, spec.family))
    u0 = np.array(u0, dtype=np.float64)
    if u0.shape != spec.shape:
        raise ValueError('Initial condition of shape %s does not match grid %s.' % (u0.shape, spec.shape))
    if not np.all(np.isfinite(u0)):
        raise NumericalError('Initial condition of `%s` is not finite.' % family)
    return u0


def _require_periodic(spec):
    if spec.boundary != 'periodic':
        raise ValueError('`%s` is only implemented with periodic boundaries.' % spec.family)


def _march(spec, state, step, field=None):
    """Advance ``state`` and record ``n_records`` frames, the first one at ``t = 0``."""
    field = field or (lambda s: s)
    logger.debug('Solving %s on %s: %d frames, %d steps per frame.', spec.family, spec.shape, spec.n_records,
                 spec.steps_per_record)
    frames = [field(state).copy()]
    for k in range(1, spec.n_records):
        for _ in range(spec.steps_per_record):
            state = step(state)
        u = field(state)
        peak = np.max(np.abs(u))
        if not np.isfinite(peak) or peak > spec.blowup:
            raise NumericalError('`%s` blew up at t=%g (max |u| = %g).' % (spec.family, k * spec.record_interval, peak))
        frames.append(u.copy())
    return np.stack(frames)


def _wavenumbers(shape, length, derivative=False):
    """Angular wavenumbers on the real-FFT layout; ``derivative=True`` zeroes the Nyquist modes."""
    axes = []
    for axis, n in enumerate(shape):
        spacing = length / n
        if axis == len(shape) - 1:
            k = 2 * np.pi * np.fft.rfftfreq(n, d=spacing)
        else:
            k = 2 * np.pi * np.fft.fftfreq(n, d=spacing)
        if derivative and n % 2 == 0:
            k[n // 2 if axis < len(shape) - 1 else -1] = 0.
        axes.append(k)
    return np.meshgrid(*axes, indexing='ij')


def _laplacian(u, spacing, periodic=True):
    out = np.zeros_like(u)
    for axis, h in enumerate(spacing):
        if periodic:
            forward, backward = np.roll(u, -1, axis=axis), np.roll(u, 1, axis=axis)
        else:
            width = [(1, 1) if a == axis else (0, 0) for a in range(u.ndim)]
            padded = np.pad(u, width, mode='reflect')
            n = u.shape[axis]
            forward = np.take(padded, np.arange(2, n + 2), axis=axis)
            backward = np.take(padded, np.arange(n), axis=axis)
        out += (forward - 2 * u + backward) / h ** 2
    return out


def solve_advection(spec, u0):
    """Linear advection along the first axis with the Beam-Warming scheme, stable for ``|alpha| dt / dx <= 1``.

    The update is an explicit one-step march with second-order upwind differences. Unlike a plain forward Euler
    step on the same stencil, it carries the ``c**2 / 2`` second-difference correction, without which the
    scheme is unstable for every Courant number ``c``. At ``c = 1`` a step is an exact shift by one cell.
    """
    u = _check_initial(spec, u0, 'advection')
    _require_periodic(spec)
    courant = spec.alpha * spec.dt / spec.spacing[0]
    if abs(courant) > 1 + 1e-12:
        raise StabilityError('Advection Courant number %g exceeds 1.' % abs(courant))
    c, shift = abs(courant), (1 if courant >= 0 else -1)

    def step(u):
        u1 = np.roll(u, shift, axis=0)
        u2 = np.roll(u, 2 * shift, axis=0)
        return u - 0.5 * c * (3 * u - 4 * u1 + u2) + 0.5 * c ** 2 * (u - 2 * u1 + u2)

    return _march(spec, u, step)


def solve_heat(spec, u0):
    """Heat equation: explicit central differences in 1-D, exact spectral decay in 2-D."""
    u = _check_initial(spec, u0, 'heat')
    _require_periodic(spec)
    if spec.alpha < 0:
        raise StabilityError('Negative diffusivity %g.' % spec.alpha)
    if spec.rank == 1:
        number = spec.alpha * spec.dt / spec.spacing[0] ** 2
        if number > 0.5:
            raise StabilityError('Diffusion number %g exceeds 1/2.' % number)
        return _march(spec, u, lambda u: u + spec.alpha * spec.dt * _laplacian(u, spec.spacing))

    k2 = sum(k ** 2 for k in _wavenumbers(spec.shape, spec.length))
    decay = np.exp(-spec.alpha * k2 * spec.dt)
    return _march(spec, np.fft.rfftn(u), lambda u_hat: decay * u_hat,
                  field=lambda u_hat: np.fft.irfftn(u_hat, s=spec.shape))


def solve_wave(spec, u0):
    """Wave equation ``u_tt = nu * Laplacian(u)`` from rest, leapfrog in time, ghost-point Neumann walls."""
    u = _check_initial(spec, u0, 'wave')
    if spec.nu < 0:
        raise StabilityError('Negative squared wave speed %g.' % spec.nu)
    courant = np.sqrt(spec.nu) * spec.dt * np.sqrt(sum(1 / h ** 2 for h in spec.spacing))
    if courant > 1 + 1e-12:
        raise StabilityError('Wave Courant number %g exceeds 1.' % courant)
    periodic = spec.boundary == 'periodic'
    factor = spec.nu * spec.dt ** 2

    def step(state):
        previous, current = state
        return current, 2 * current - previous + factor * _laplacian(current, spec.spacing, periodic)

    # zero initial velocity: the fictitious level below t = 0 mirrors the first step
    before = u + 0.5 * factor * _laplacian(u, spec.spacing, periodic)
    return _march(spec, (before, u), step, field=lambda state: state[1])


def solve_burgers(spec, u0):
    """Viscous Burgers ``u_t + div(u**2 / 2) = nu * Laplacian(u)`` in conservative central form, explicit Euler."""
    u = _check_initial(spec, u0, 'burgers')
    _require_periodic(spec)
    number = spec.nu * spec.dt * sum(1 / h ** 2 for h in spec.spacing)
    if number > 0.5:
        raise StabilityError('Diffusion number %g exceeds 1/2.' % number)
    peak = np.max(np.abs(u))
    courant = peak * spec.dt * sum(1 / h for h in spec.spacing)
    if courant > 1:
        raise StabilityError('Burgers Courant number %g exceeds 1.' % courant)
    if peak ** 2 * spec.dt > 2 * spec.nu and peak > 0:
        raise StabilityError('Cell Reynolds condition violated: max|u|**2 dt = %g > 2 nu = %g.'
                             % (peak ** 2 * spec.dt, 2 * spec.nu))

    def step(u):
        flux = 0.5 * u ** 2
        divergence = sum((np.roll(flux, -1, axis=a) - np.roll(flux, 1, axis=a)) / (2 * h)
                         for a, h in enumerate(spec.spacing))
        return u + spec.dt * (spec.nu * _laplacian(u, spec.spacing) - divergence)

    return _march(spec, u, step)


def reaction_term(u, reaction, alpha=0.):
    if reaction == 'allen_cahn':
        return u - u ** 3
    if reaction == 'nagumo':
        return u * (1 - u) * (u - alpha)
    raise ValueError('`%s` is not implemented.' % reaction)


def solve_reaction_diffusion(spec, u0):
    """Allen-Cahn or Nagumo with a pseudo-spectral integrating-factor Euler step."""
    u = _check_initial(spec, u0, 'reaction_diffusion')
    _require_periodic(spec)
    diffusivity = spec.epsilon if spec.reaction == 'allen_cahn' else spec.nu
    k2 = sum(k ** 2 for k in _wavenumbers(spec.shape, spec.length))
    factor = np.exp(-diffusivity * k2 * spec.dt)

    def step(u_hat):
        reaction = reaction_term(np.fft.irfftn(u_hat, s=spec.shape), spec.reaction, spec.alpha)
        return factor * (u_hat + spec.dt * np.fft.rfftn(reaction))

    return _march(spec, np.fft.rfftn(u), step, field=lambda u_hat: np.fft.irfftn(u_hat, s=spec.shape))


def velocity_from_vorticity(omega, length=1.):
    """Velocity ``(u, v) = (d_y psi, -d_x psi)`` of a periodic vorticity field, with ``-Laplacian(psi) = omega``."""
    omega = np.asarray(omega, dtype=np.float64)
    shape = omega.shape
    kx, ky = _wavenumbers(shape, length, derivative=True)
    psi = _stream_function(np.fft.rfftn(omega), shape, length)
    return np.fft.irfftn(1j * ky * psi, s=shape), np.fft.irfftn(-1j * kx * psi, s=shape)


def _stream_function(omega_hat, shape, length):
    k2 = sum(k ** 2 for k in _wavenumbers(shape, length))
    k2[(0,) * len(shape)] = 1.
    psi = omega_hat / k2
    psi[(0,) * len(shape)] = 0.
    return psi


def spectral_divergence(u, v, length=1.):
    shape = np.shape(u)
    kx, ky = _wavenumbers(shape, length, derivative=True)
    return np.fft.irfftn(1j * kx * np.fft.rfftn(u) + 1j * ky * np.fft.rfftn(v), s=shape)


def navier_stokes_forcing(shape, length=1., amplitude=0.1):
    x, y = np.meshgrid(*[np.arange(n) * length / n for n in shape], indexing='ij')
    phase = 2 * np.pi * (x + y)
    return amplitude * (np.sin(phase) + np.cos(phase))


def solve_navier_stokes(spec, u0):
    """2-D incompressible Navier-Stokes in vorticity form.

    Pseudo-spectral with 2/3 dealiasing of the advection term, Crank-Nicolson for viscosity and explicit advection
    and forcing. The mean vorticity is held at its initial value.
    """
    omega = _check_initial(spec, u0, 'navier_stokes')
    _require_periodic(spec)
    shape, length = spec.shape, spec.length
    u, v = velocity_from_vorticity(omega, length)
    courant = spec.dt * (np.max(np.abs(u)) / spec.spacing[0] + np.max(np.abs(v)) / spec.spacing[1])
    if courant > 1:
        raise StabilityError('Navier-Stokes Courant number %g exceeds 1.' % courant)

    kx, ky = _wavenumbers(shape, length, derivative=True)
    k2 = sum(k ** 2 for k in _wavenumbers(shape, length))
    half = 0.5 * spec.nu * spec.dt * k2
    mx, my = np.meshgrid(np.fft.fftfreq(shape[0], d=1. / shape[0]), np.fft.rfftfreq(shape[1], d=1. / shape[1]),
                         indexing='ij')
    dealias = (np.abs(mx) <= shape[0] / 3) & (np.abs(my) <= shape[1] / 3)
    forcing_hat = np.fft.rfftn(navier_stokes_forcing(shape, length, spec.forcing_amplitude))
    mean = np.fft.rfftn(omega)[0, 0]

    def step(omega_hat):
        psi = _stream_function(omega_hat, shape, length)
        u = np.fft.irfftn(1j * ky * psi, s=shape)
        v = np.fft.irfftn(-1j * kx * psi, s=shape)
        wx = np.fft.irfftn(1j * kx * omega_hat, s=shape)
        wy = np.fft.irfftn(1j * ky * omega_hat, s=shape)
        advection = np.fft.rfftn(u * wx + v * wy) * dealias
        new = ((1 - half) * omega_hat + spec.dt * (forcing_hat - advection)) / (1 + half)
        new[0, 0] = mean
        return new

    return _march(spec, np.fft.rfftn(omega), step, field=lambda omega_hat: np.fft.irfftn(omega_hat, s=shape))


def etd_coefficients(z, n_points=CONTOUR_POINTS):
    """``phi_1(z) = (e^z - 1) / z`` and ``phi_2(z) = (e^z - 1 - z) / z**2``, averaged over a unit contour around
    each ``z`` to avoid cancellation near zero.

    References
    ----------
    .. [1] Kassam, A.-K., Trefethen, L. N. (2005). Fourth-order time-stepping for stiff PDEs. SIAM Journal on
       Scientific Computing, 26(4), 1214-1233.
    """
    roots = np.exp(1j * np.pi * (np.arange(1, n_points + 1) - 0.5) / n_points)
    lr = np.asarray(z)[..., None] + roots
    phi1 = np.real(np.mean((np.exp(lr) - 1) / lr, axis=-1))
    phi2 = np.real(np.mean((np.exp(lr) - 1 - lr) / lr ** 2, axis=-1))
    return phi1, phi2


def solve_kuramoto_sivashinsky(spec, u0):
    """Kuramoto-Sivashinsky ``u_t + u u_x + u_xx + nu u_xxxx = 0`` on a periodic interval, ETD2RK in time."""
    u = _check_initial(spec, u0, 'kuramoto_sivashinsky')
    _require_periodic(spec)
    n, h = spec.shape[0], spec.dt
    k, = _wavenumbers(spec.shape, spec.length)
    k_derivative, = _wavenumbers(spec.shape, spec.length, derivative=True)
    linear = k ** 2 - spec.nu * k ** 4
    propagator = np.exp(h * linear)
    phi1, phi2 = etd_coefficients(h * linear)
    gradient = -0.5j * k_derivative

    def nonlinear(u_hat):
        return gradient * np.fft.rfft(np.fft.irfft(u_hat, n=n) ** 2)

    def step(u_hat):
        n_u = nonlinear(u_hat)
        a = propagator * u_hat + h * phi1 * n_u
        return a + h * phi2 * (nonlinear(a) - n_u)

    return _march(spec, np.fft.rfft(u), step, field=lambda u_hat: np.fft.irfft(u_hat, n=n))


SOLVERS = {
    'advection': solve_advection,
    'heat': solve_heat,
    'wave': solve_wave,
    'burgers': solve_burgers,
    'reaction_diffusion': solve_reaction_diffusion,
    'navier_stokes': solve_navier_stokes,
    'kuramoto_sivashinsky': solve_kuramoto_sivashinsky,
}


def solve(spec, u0):
    """Integrate one trajectory.

    Parameters
    ----------
    spec : PdeSpec
    u0 : array-like, shape spec.shape
        Initial condition.

    Returns
    -------
    trajectory : array, shape (spec.n_records, *spec.shape)
        Frames every ``spec.record_interval``, starting with ``u0``.
    """
    if spec.family not in SOLVERS:
        raise ValueError('`%s` is not implemented.' % spec.family)
    return SOLVERS[spec.family](spec, u0)
