import re
from dataclasses import dataclass

import numpy as np
import pywt


@dataclass(frozen=True, eq=False)
class FilterBank:
    """Orthonormal Daubechies analysis/synthesis filters of one basis.

    ``rec_lo`` is the tabulated scaling filter; the other three filters follow from it by the quadrature-mirror
    relation ``rec_hi[k] = (-1)**k * rec_lo[L-1-k]`` and time reversal.
    """
    name: str
    vanishing_moments: int
    dec_lo: np.ndarray
    dec_hi: np.ndarray
    rec_lo: np.ndarray
    rec_hi: np.ndarray

    @property
    def length(self):
        return len(self.rec_lo)

    def __repr__(self):
        return 'FilterBank(%s)' % self.name


def daubechies_filters(n):
    """Daubechies filter bank with ``n`` vanishing moments [daubechies1992ten]_.

    Parameters
    ----------
    n : int
        Number of vanishing moments, between 1 (Haar) and 10.

    Returns
    -------
    bank : FilterBank
        Filters of length ``2 * n``.

    References
    ----------
    .. [daubechies1992ten] Daubechies, Ingrid. "Ten lectures on wavelets." Society for industrial and applied
        mathematics, 1992.
    """
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or not 1 <= n <= 10:
        raise ValueError('`n` must be an integer between 1 and 10, got %r.' % (n,))
    rec_lo = np.asarray(pywt.Wavelet('db%d' % n).rec_lo, dtype=np.float64)
    signs = (-1.) ** np.arange(len(rec_lo))
    rec_hi = signs * rec_lo[::-1]
    for f in (rec_lo, rec_hi):
        f.flags.writeable = False
    return FilterBank(name='db%d' % n, vanishing_moments=int(n), dec_lo=rec_lo[::-1], dec_hi=rec_hi[::-1],
                      rec_lo=rec_lo, rec_hi=rec_hi)


def filter_bank(name):
    """Look up a filter bank by name, e.g. ``'db4'``."""
    if isinstance(name, FilterBank):
        return name
    match = re.fullmatch(r'db(\d+)', str(name))
    if match is None:
        raise ValueError('`%s` is not implemented.' % name)
    return daubechies_filters(int(match.group(1)))


def coeff_length(d, s, vanishing_moments):
    """Length of level-``s`` coefficient bands of a ``d``-sample signal under zero-padding extension.

    Returns ``ceil(d / 2**s) + 2 * (vanishing_moments - 1)``; signals whose length is not a multiple of ``2**s``
    are zero-padded at the end before the transform.
    """
    assert isinstance(d, (int, np.integer)) and d > 0, '`d` must be a positive integer.'
    assert isinstance(s, (int, np.integer)) and s >= 0, '`s` must be a non-negative integer.'
    assert vanishing_moments >= 1, '`vanishing_moments` must be positive.'
    return -(-d // 2 ** s) + 2 * (vanishing_moments - 1)
