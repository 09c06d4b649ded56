import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ncwno.tensor._tensor import Tensor, as_tensor, operation, unbroadcast


def concatenate(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return operation(data, tensors, backward)


def stack(tensors, axis=0):
    tensors = [as_tensor(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)

    def backward(g):
        return tuple(np.take(g, i, axis=axis) for i in range(len(tensors)))

    return operation(data, tensors, backward)


def pad(x, pad_width):
    """Zero-pad ``x``; ``pad_width`` follows :func:`numpy.pad`."""
    x = as_tensor(x)
    pad_width = [tuple(p) for p in pad_width]
    index = tuple(slice(lo, lo + n) for (lo, _), n in zip(pad_width, x.shape))
    return operation(np.pad(x.data, pad_width), (x,), lambda g: (g[index],))


def broadcast_to(x, shape):
    x = as_tensor(x)
    return operation(np.broadcast_to(x.data, shape), (x,), lambda g: (unbroadcast(g, x.shape),))


def sqrt(x):
    x = as_tensor(x)
    y = np.sqrt(x.data)
    return operation(y, (x,), lambda g: (g / (2 * y),))


def exp(x):
    x = as_tensor(x)
    y = np.exp(x.data)
    return operation(y, (x,), lambda g: (g * y,))


def _parse_subscripts(subscripts, n_operands):
    if '->' not in subscripts or '.' in subscripts:
        raise ValueError('`subscripts` must be explicit, e.g. "bxi,xio->bxo".')
    inputs, output = subscripts.replace(' ', '').split('->')
    inputs = inputs.split(',')
    if len(inputs) != n_operands:
        raise ValueError('`subscripts` names %d operands, got %d.' % (len(inputs), n_operands))
    for spec in inputs:
        if len(set(spec)) != len(spec):
            raise ValueError('Repeated indices within one operand are not supported: `%s`.' % spec)
    return inputs, output


def einsum(subscripts, *operands):
    """Differentiable :func:`numpy.einsum` for explicit subscripts without repeated indices per operand."""
    operands = [as_tensor(t) for t in operands]
    inputs, output = _parse_subscripts(subscripts, len(operands))
    data = np.einsum(subscripts, *[t.data for t in operands])

    def backward(g):
        grads = []
        for i, (spec, x) in enumerate(zip(inputs, operands)):
            others = [s for j, s in enumerate(inputs) if j != i]
            available = set(output).union(*others)
            kept = ''.join(c for c in spec if c in available)
            expr = ','.join([output] + others) + '->' + kept
            grad = np.einsum(expr, g, *[t.data for j, t in enumerate(operands) if j != i])
            for axis, c in enumerate(spec):
                if c not in available:
                    grad = np.expand_dims(grad, axis)
            grads.append(np.broadcast_to(grad, x.shape))
        return tuple(grads)

    return operation(data, operands, backward)


def pointwise_channel_mix(v, weight, bias=None):
    """Apply an affine map across the last (channel) axis at every grid point.

    Parameters
    ----------
    v : Tensor, shape (..., c_in)
        Input field.
    weight : Tensor, shape (c_in, c_out)
        Channel mixing matrix.
    bias : Tensor, shape (c_out) or None
        Channel offsets.

    Returns
    -------
    out : Tensor, shape (..., c_out)
    """
    v, weight = as_tensor(v), as_tensor(weight)
    if weight.ndim != 2 or v.shape[-1] != weight.shape[0]:
        raise ValueError('Cannot mix %d channels with a weight of shape %s.' % (v.shape[-1], weight.shape))
    if bias is not None:
        bias = as_tensor(bias)
        if bias.shape != (weight.shape[1],):
            raise ValueError('`bias` must have shape (%d,), got %s.' % (weight.shape[1], bias.shape))
    c_in, c_out = weight.shape
    data = np.tensordot(v.data, weight.data, axes=([-1], [0]))
    if bias is not None:
        data = data + bias.data

    def backward(g):
        g_v = np.tensordot(g, weight.data, axes=([-1], [1]))
        g_w = v.data.reshape(-1, c_in).T @ g.reshape(-1, c_out)
        if bias is None:
            return g_v, g_w
        return g_v, g_w, g.reshape(-1, c_out).sum(axis=0)

    parents = (v, weight) if bias is None else (v, weight, bias)
    return operation(data, parents, backward)


def conv2d(x, weight, bias=None, stride=1, padding=0):
    """Channels-last 2-D cross-correlation with zero padding.

    Parameters
    ----------
    x : Tensor, shape (batch, height, width, c_in)
    weight : Tensor, shape (k, k, c_in, c_out)
    bias : Tensor, shape (c_out) or None
    stride : int, default 1
    padding : int, default 0

    Returns
    -------
    out : Tensor, shape (batch, height_out, width_out, c_out)
    """
    x, weight = as_tensor(x), as_tensor(weight)
    assert isinstance(stride, (int, np.integer)) and stride > 0, '`stride` must be a positive integer.'
    assert isinstance(padding, (int, np.integer)) and padding >= 0, '`padding` must be a non-negative integer.'
    if x.ndim != 4 or weight.ndim != 4 or x.shape[-1] != weight.shape[2]:
        raise ValueError('Incompatible shapes for conv2d: %s and %s.' % (x.shape, weight.shape))
    kh, kw = weight.shape[:2]
    xp = np.pad(x.data, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    if xp.shape[1] < kh or xp.shape[2] < kw:
        raise ValueError('Input of shape %s is smaller than the kernel.' % (x.shape,))
    windows = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::stride, ::stride]
    data = np.einsum('bhwcij,ijco->bhwo', windows, weight.data)
    if bias is not None:
        bias = as_tensor(bias)
        data = data + bias.data
    ho, wo = data.shape[1:3]

    def backward(g):
        g_w = np.einsum('bhwcij,bhwo->ijco', windows, g)
        g_xp = np.zeros(xp.shape, dtype=g.dtype)
        for i in range(kh):
            for j in range(kw):
                g_xp[:, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride] += \
                    np.tensordot(g, weight.data[i, j], axes=([-1], [1]))
        g_x = g_xp[:, padding:padding + x.shape[1], padding:padding + x.shape[2]]
        if bias is None:
            return g_x, g_w
        return g_x, g_w, g.sum(axis=(0, 1, 2))

    parents = (x, weight) if bias is None else (x, weight, bias)
    return operation(data, parents, backward)


def adaptive_avg_pool2d(x, output_size):
    """Average ``x`` of shape (batch, height, width, channels) over an ``output_size`` grid of bins.

    Bin ``i`` along an axis of length ``n`` covers ``floor(i * n / p)`` to ``ceil((i + 1) * n / p)``.
    """
    x = as_tensor(x)
    (height, width), (ph, pw) = x.shape[1:3], output_size
    rows = []
    for i in range(ph):
        h0, h1 = (i * height) // ph, -(-(i + 1) * height // ph)
        cols = []
        for j in range(pw):
            w0, w1 = (j * width) // pw, -(-(j + 1) * width // pw)
            cols.append(x[:, h0:h1, w0:w1].mean(axis=(1, 2)))
        rows.append(stack(cols, axis=1))
    return stack(rows, axis=1)


def zeros_like(x):
    return Tensor(np.zeros(x.shape, dtype=x.dtype))
