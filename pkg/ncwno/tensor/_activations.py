import numpy as np
from scipy.special import expit

from ncwno.tensor._tensor import as_tensor, operation


def mish(x):
    """Self-regularized non-monotonic activation ``x * tanh(softplus(x))`` [misra2019mish]_.

    The softplus is evaluated with :func:`numpy.logaddexp`, so large inputs do not overflow.

    Parameters
    ----------
    x : Tensor
        Input.

    Returns
    -------
    y : Tensor
        Activation with the shape of ``x``.

    References
    ----------
    .. [misra2019mish] Misra, Diganta. "Mish: A self regularized non-monotonic activation function."
        arXiv preprint arXiv:1908.08681 (2019).
    """
    x = as_tensor(x)
    tanh_sp = np.tanh(np.logaddexp(0, x.data))
    y = x.data * tanh_sp

    def backward(g):
        return g * (tanh_sp + x.data * (1 - tanh_sp ** 2) * expit(x.data)),

    return operation(y, (x,), backward)


def softmax_over_axis(x, axis=-1):
    """Normalized exponential along ``axis``, stabilized by subtracting the slice maximum."""
    x = as_tensor(x)
    if not -x.ndim <= axis < x.ndim:
        raise ValueError('`axis` %d is out of range for a tensor of rank %d.' % (axis, x.ndim))
    z = np.exp(x.data - x.data.max(axis=axis, keepdims=True))
    y = z / z.sum(axis=axis, keepdims=True)

    def backward(g):
        return y * (g - (g * y).sum(axis=axis, keepdims=True)),

    return operation(y, (x,), backward)
