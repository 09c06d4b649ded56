from dataclasses import dataclass, replace

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ncwno.tensor import Tensor, as_tensor, operation, pad, stack
from ncwno.wavelet._filters import FilterBank, filter_bank

MODES = ('zero', 'periodic')


@dataclass
class WaveletCoeffs:
    """Multilevel wavelet decomposition.

    Attributes
    ----------
    approx : Tensor or array
        Approximation band at the coarsest level.
    details : list
        Detail bands from the finest (level 1) to the coarsest level. Each entry is one band for 1-D transforms and
        a ``(horizontal, vertical, diagonal)`` triple for 2-D transforms.
    lengths : list of tuple
        Extents along the transformed axes of the signal entering each level.
    basis : FilterBank
    axes : tuple of int
        Transformed axes.
    mode : {'zero', 'periodic'}
        Boundary extension.
    shape : tuple of int
        Extents of the original signal along ``axes``.
    """
    approx: object
    details: list
    lengths: list
    basis: FilterBank
    axes: tuple
    mode: str
    shape: tuple

    @property
    def level(self):
        return len(self.details)

    def replace(self, **changes):
        return replace(self, **changes)


def _band_length(n, filter_length, mode):
    return (n + filter_length - 2) // 2 if mode == 'zero' else n // 2


def _analyze(x, lo, hi, axis, mode):
    """One analysis level along ``axis``; the two bands are stacked on a new leading axis."""
    length = len(lo)
    x = np.moveaxis(x, axis, -1)
    n = x.shape[-1]
    if mode == 'zero':
        xp = np.pad(x, [(0, 0)] * (x.ndim - 1) + [(length - 1, length - 1)])
    else:
        xp = np.take(x, np.arange(-(length - 1), n) % n, axis=-1)
    windows = sliding_window_view(xp, length, axis=-1)[..., 1::2, :]
    bands = np.stack([windows @ lo, windows @ hi])
    return np.moveaxis(bands, -1, axis + 1)


def _synthesize(bands, lo, hi, axis, mode, n):
    """Adjoint of :func:`_analyze`, which is also its inverse for orthonormal filters."""
    length = len(lo)
    a = np.moveaxis(bands[0], axis, -1)
    d = np.moveaxis(bands[1], axis, -1)
    m = a.shape[-1]
    if a.shape != d.shape or m != _band_length(n, length, mode):
        raise ValueError('Bands of length %d and %d are inconsistent with a signal of length %d.'
                         % (m, d.shape[-1], n))
    buf = np.zeros(a.shape[:-1] + (2 * m + length,), dtype=np.result_type(a, d, lo))
    for r in range(length):
        buf[..., 1 + r:1 + r + 2 * m:2] += lo[r] * a + hi[r] * d
    if mode == 'zero':
        x = buf[..., length - 1:length - 1 + n]
    else:
        x = np.zeros((n,) + a.shape[:-1], dtype=buf.dtype)
        index = (np.arange(n + length - 1) - (length - 1)) % n
        np.add.at(x, index, np.moveaxis(buf[..., :n + length - 1], -1, 0))
        x = np.moveaxis(x, 0, -1)
    return np.moveaxis(x, -1, axis)


def _filters(bank, dtype):
    return bank.rec_lo.astype(dtype), bank.rec_hi.astype(dtype)


def analysis_level(x, bank, axis, mode='zero'):
    """Differentiable single-level analysis along a non-negative ``axis``.

    Returns a Tensor of shape ``(2, ...)`` holding the approximation and the detail band.
    """
    x = as_tensor(x)
    lo, hi = _filters(bank, x.dtype)
    n = x.shape[axis]
    data = _analyze(x.data, lo, hi, axis, mode)
    return operation(data, (x,), lambda g: (_synthesize(g, lo, hi, axis, mode, n),))


def synthesis_level(bands, bank, axis, n, mode='zero'):
    """Differentiable single-level synthesis of stacked ``bands`` back to ``n`` samples along ``axis``."""
    bands = as_tensor(bands)
    lo, hi = _filters(bank, bands.dtype)
    data = _synthesize(bands.data, lo, hi, axis, mode, n)
    return operation(data, (bands,), lambda g: (_analyze(g, lo, hi, axis, mode),))


def _normalize_axes(axes, ndim):
    axes = tuple(int(a) % ndim for a in np.atleast_1d(axes))
    if len(axes) not in (1, 2) or len(set(axes)) != len(axes):
        raise ValueError('`axes` must name one or two distinct axes, got %s.' % (axes,))
    return axes


def _extension(bank, mode):
    return bank.vanishing_moments - 1 if mode == 'zero' else 0


def _as_arrays(coeffs):
    details = [tuple(b.data for b in d) if isinstance(d, tuple) else d.data for d in coeffs.details]
    return coeffs.replace(approx=coeffs.approx.data, details=details)


def dwt_multilevel(x, basis, s, axes=-1, mode='zero'):
    """Multilevel discrete wavelet transform of a 1-D signal or a 2-D field.

    Under zero-padding extension every level sees ``vanishing_moments - 1`` extra zeros on both sides, so that
    level-``k`` bands have exactly ``d / 2**k + 2 * (vanishing_moments - 1)`` coefficients along each axis. Signals
    whose length is not a multiple of ``2**s`` are zero-padded at the end; :func:`idwt_multilevel` trims the padding.

    Parameters
    ----------
    x : Tensor or array-like
        Signal. All axes other than ``axes`` (batch, channels) pass through untouched.
    basis : str or FilterBank
        Wavelet basis, e.g. ``'db4'``.
    s : int
        Number of levels.
    axes : int or tuple of int, default -1
        One axis for 1-D transforms, two axes for separable 2-D transforms.
    mode : {'zero', 'periodic'}, default 'zero'
        Boundary extension. Periodic extension keeps ``d / 2**k`` coefficients and preserves energy exactly.

    Returns
    -------
    coeffs : WaveletCoeffs
        Bands are Tensors if ``x`` is a Tensor and arrays otherwise.
    """
    bank = filter_bank(basis)
    if mode not in MODES:
        raise ValueError('`%s` is not implemented.' % mode)
    assert isinstance(s, (int, np.integer)) and s >= 1, '`s` must be a positive integer.'
    is_array = not isinstance(x, Tensor)
    x = as_tensor(x)
    axes = _normalize_axes(axes, x.ndim)
    shape = tuple(x.shape[a] for a in axes)
    for d in shape:
        if d < 2 ** s:
            raise ValueError('A signal of length %d is too short for %d levels.' % (d, s))

    ext = _extension(bank, mode)
    widths = [(0, 0)] * x.ndim
    for a, d in zip(axes, shape):
        widths[a] = (ext, -d % 2 ** s + ext)
    if any(w != (0, 0) for w in widths):
        x = pad(x, widths)

    current = x
    details, lengths = [], []
    for _ in range(s):
        lengths.append(tuple(current.shape[a] for a in axes))
        if len(axes) == 1:
            bands = analysis_level(current, bank, axes[0], mode)
            current, detail = bands[0], bands[1]
        else:
            rows = analysis_level(current, bank, axes[0], mode)
            quads = analysis_level(rows, bank, axes[1] + 1, mode)
            current, detail = quads[0, 0], (quads[0, 1], quads[1, 0], quads[1, 1])
        details.append(detail)

    coeffs = WaveletCoeffs(approx=current, details=details, lengths=lengths, basis=bank, axes=axes, mode=mode,
                           shape=shape)
    return _as_arrays(coeffs) if is_array else coeffs


def _check_lengths(coeffs):
    filter_length = coeffs.basis.length
    for level, (n, detail) in enumerate(zip(coeffs.lengths, coeffs.details)):
        expected = tuple(_band_length(k, filter_length, coeffs.mode) for k in n)
        bands = detail if isinstance(detail, tuple) else (detail,)
        if level == coeffs.level - 1:
            bands = bands + (coeffs.approx,)
        for band in bands:
            got = tuple(np.shape(band)[a] for a in coeffs.axes)
            if got != expected:
                raise ValueError('Level %d band has extents %s, expected %s.' % (level + 1, got, expected))


def idwt_multilevel(coeffs):
    """Inverse of :func:`dwt_multilevel`, reconstructing the original extents exactly.

    Parameters
    ----------
    coeffs : WaveletCoeffs
        Decomposition, possibly with modified bands of unchanged extents.

    Returns
    -------
    x : Tensor or array
        A Tensor if ``coeffs.approx`` is a Tensor, an array otherwise.
    """
    if len(coeffs.lengths) != coeffs.level or coeffs.level < 1:
        raise ValueError('`coeffs` must hold one length record per level.')
    _check_lengths(coeffs)
    bank, axes, mode = coeffs.basis, coeffs.axes, coeffs.mode
    is_array = not isinstance(coeffs.approx, Tensor)

    current = as_tensor(coeffs.approx)
    for level in reversed(range(coeffs.level)):
        n = coeffs.lengths[level]
        detail = coeffs.details[level]
        if len(axes) == 1:
            current = synthesis_level(stack([current, detail]), bank, axes[0], n[0], mode)
        else:
            horizontal, vertical, diagonal = detail
            quads = stack([stack([current, horizontal]), stack([vertical, diagonal])])
            rows = synthesis_level(quads, bank, axes[1] + 1, n[1], mode)
            current = synthesis_level(rows, bank, axes[0], n[0], mode)

    ext = _extension(bank, mode)
    index = [slice(None)] * current.ndim
    for a, d in zip(axes, coeffs.shape):
        index[a] = slice(ext, ext + d)
    current = current[tuple(index)]
    return current.data if is_array else current
