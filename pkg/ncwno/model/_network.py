import numpy as np

from ncwno.model._state import N_ENCODER_LAYERS, kappa_bands
from ncwno.tensor import (Tensor, adaptive_avg_pool2d, as_tensor, broadcast_to, concatenate, conv2d, einsum, mish,
                          no_grad, pointwise_channel_mix, softmax_over_axis)
from ncwno.wavelet import dwt_multilevel, idwt_multilevel

_CONTRACTIONS = {1: 'bxi,xio->bxo', 2: 'bxyi,xyio->bxyo'}


def _affine(x, params, prefix):
    return pointwise_channel_mix(x, params[prefix + '.weight'], params[prefix + '.bias'])


def _labels(label, max_tasks):
    labels = np.atleast_1d(np.asarray(label))
    if labels.dtype.kind not in 'iu' or labels.ndim != 1:
        raise ValueError('Task labels must be integers, got %r.' % (label,))
    if np.any(labels < 0) or np.any(labels >= max_tasks):
        raise ValueError('Task labels must lie in [0, %d), got %r.' % (max_tasks, label))
    return labels


def encode_label(label, state):
    """Linear task embedding: a one-hot code passed through three affine layers.

    Parameters
    ----------
    label : int or array-like of int
        Task label(s) in ``[0, max_tasks)``.
    state : ModelState

    Returns
    -------
    embedding : Tensor, shape (max_tasks) or (n_labels, max_tasks)
    """
    config = state.config
    labels = _labels(label, config.max_tasks)
    z = Tensor(np.eye(config.max_tasks, dtype=config.dtype)[labels])
    for k in range(N_ENCODER_LAYERS):
        z = _affine(z, state.params, 'encoder.%d' % k)
    return z[0] if np.ndim(label) == 0 else z


def gate_probabilities(v, label, state, block):
    """Channel-level expert probabilities of one block.

    The gate sees the channel mean of ``v`` (through a convolutional stack in 2-D) next to the label embedding, and
    its logits are normalized over the expert axis.

    Parameters
    ----------
    v : Tensor, shape (batch, *grid, width)
        Block input.
    label : int or array-like of int, shape (batch)
    state : ModelState
    block : int

    Returns
    -------
    beta : Tensor, shape (batch, n_experts, width)
        Columns ``beta[b, :, c]`` sum to one.
    """
    config, params = state.config, state.params
    v = as_tensor(v)
    if v.shape[1:] != config.grid_shape + (config.width,):
        raise ValueError('Gate input of shape %s does not match grid %s and width %d.'
                         % (v.shape, config.grid_shape, config.width))
    batch = v.shape[0]
    summary = v.mean(axis=-1)
    if config.rank == 1:
        features = summary
    else:
        z = summary.reshape(summary.shape + (1,))
        for k, stride in enumerate(config.gate_conv_strides):
            prefix = 'gates.%d.conv.%d' % (block, k)
            z = mish(conv2d(z, params[prefix + '.weight'], params[prefix + '.bias'], stride=stride,
                            padding=config.gate_conv_kernel // 2))
        features = adaptive_avg_pool2d(z, config.gate_pool).reshape(batch, -1)

    embedding = encode_label(label, state)
    if embedding.ndim == 1:
        embedding = broadcast_to(embedding, (batch, config.max_tasks))
    elif embedding.shape[0] != batch:
        raise ValueError('Got %d labels for a batch of %d.' % (embedding.shape[0], batch))
    h = concatenate([features, embedding], axis=-1)
    n_layers = len(config.gate_hidden) + 1
    for k in range(n_layers):
        h = _affine(h, params, 'gates.%d.dense.%d' % (block, k))
        if k < n_layers - 1:
            h = mish(h)

    if config.gate_mode == 'per-channel':
        logits = h.reshape(batch, config.n_experts, config.width)
    else:
        logits = broadcast_to(h.reshape(batch, config.n_experts, 1), (batch, config.n_experts, config.width))
    return softmax_over_axis(logits, axis=1)


def _interpolation_matrix(m, n):
    if m == 1:
        return np.ones((n, 1))
    return np.stack([np.interp(np.linspace(0, 1, n), np.linspace(0, 1, m), e) for e in np.eye(m)], axis=1)


def _resample(kappa, extents):
    """Linearly interpolate a position-wise kernel to new band extents on normalized coordinates."""
    spec = 'abcd'[:len(extents)] + 'io'
    for axis, n in enumerate(extents):
        m = kappa.shape[axis]
        if m != n:
            letter = spec[axis]
            matrix = _interpolation_matrix(m, n).astype(kappa.dtype)
            kappa = einsum('z%s,%s->%s' % (letter, spec, spec.replace(letter, 'z')), matrix, kappa)
    return kappa


def _contract(band, kappa, rank):
    width = band.shape[-1]
    if kappa.ndim != rank + 2 or kappa.shape[rank:] != (width, width):
        raise ValueError('Kernel of shape %s is incompatible with a band of shape %s.' % (kappa.shape, band.shape))
    kappa = _resample(kappa, band.shape[1:1 + rank])
    return einsum(_CONTRACTIONS[rank], band, kappa)


def local_wavelet_expert(v, kappa, bank, level):
    """Kernel integral of one expert, evaluated in the wavelet domain.

    ``v`` is decomposed to ``level`` with ``bank``; the coarsest approximation and detail bands are contracted over
    input channels with position-wise kernels, finer details are dropped, and the result is reconstructed.

    Kernels whose extents differ from the bands of ``v`` (an input on another grid) are linearly interpolated to the
    band extents, so the expert path runs at any length admitting ``level`` levels. The gate's dense stack still fixes
    the grid of :func:`ncwno_forward`.

    Parameters
    ----------
    v : Tensor, shape (batch, *grid, width)
    kappa : dict of str to Tensor
        Kernels keyed by band: ``approx`` and ``detail`` in 1-D; ``approx``, ``horizontal``, ``vertical`` and
        ``diagonal`` in 2-D. Each has shape ``(*band_extents, width, width)``.
    bank : FilterBank
    level : int

    Returns
    -------
    out : Tensor, shape of ``v``
    """
    v = as_tensor(v)
    rank = v.ndim - 2
    if rank not in _CONTRACTIONS or set(kappa) != set(kappa_bands(rank)):
        raise ValueError('Kernels %s do not fit a %d-D input.' % (sorted(kappa), rank))
    coeffs = dwt_multilevel(v, bank, level, axes=tuple(range(1, rank + 1)))
    approx = _contract(coeffs.approx, kappa['approx'], rank)
    if rank == 1:
        top = _contract(coeffs.details[-1], kappa['detail'], rank)
        fine = [np.zeros(d.shape, dtype=d.dtype) for d in coeffs.details[:-1]]
    else:
        top = tuple(_contract(b, kappa[name], rank) for b, name in zip(coeffs.details[-1], kappa_bands(2)[1:]))
        fine = [tuple(np.zeros(b.shape, dtype=b.dtype) for b in d) for d in coeffs.details[:-1]]
    return idwt_multilevel(coeffs.replace(approx=approx, details=fine + [top]))


def expert_kernels(state, block, expert):
    prefix = 'blocks.%d.experts.%d.kappa_' % (block, expert)
    return {band: state.params[prefix + band] for band in kappa_bands(state.config.rank)}


def expert_block_forward(v, label, state, block):
    """One expert wavelet integral block: ``mish(sum_e beta_e * expert_e(v) + skip(v))``.

    Expert outputs are accumulated in expert-index order.
    """
    config = state.config
    v = as_tensor(v)
    beta = gate_probabilities(v, label, state, block)
    batch = v.shape[0]
    total = None
    for e, bank in enumerate(state.banks):
        out = local_wavelet_expert(v, expert_kernels(state, block, e), bank, config.level)
        weight = beta[:, e].reshape((batch,) + (1,) * config.rank + (config.width,))
        term = out * weight
        total = term if total is None else total + term
    total = total + _affine(v, state.params, 'blocks.%d.skip' % block)
    return mish(total)


def ncwno_forward(a, grid, label, state):
    """Evaluate the operator.

    Parameters
    ----------
    a : Tensor or array-like, shape (batch, *grid, in_channels)
        Input functions.
    grid : array-like, shape (*grid, rank) or (batch, *grid, rank)
        Coordinate channels appended to ``a``, shared by the batch or given per sample.
    label : int or array-like of int, shape (batch)
        Task label(s).
    state : ModelState

    Returns
    -------
    u : Tensor, shape (batch, *grid, out_channels)
    """
    config = state.config
    if not isinstance(a, Tensor):
        a = Tensor(np.asarray(a, dtype=config.dtype))
    if a.ndim != config.rank + 2 or a.shape[1:-1] != config.grid_shape or a.shape[-1] != config.in_channels:
        raise ValueError('Input of shape %s does not match (batch, %s, %d).'
                         % (a.shape, ', '.join(map(str, config.grid_shape)), config.in_channels))
    grid = np.asarray(grid, dtype=a.dtype)
    expected = config.grid_shape + (config.rank,)
    if grid.shape not in (expected, (a.shape[0],) + expected):
        raise ValueError('Grid of shape %s does not match %s.' % (grid.shape, expected))
    coords = Tensor(np.broadcast_to(grid, (a.shape[0],) + expected))
    v = _affine(concatenate([a, coords], axis=-1), state.params, 'lift')
    for j in range(config.n_blocks):
        v = expert_block_forward(v, label, state, j)
    u = mish(_affine(v, state.params, 'project.0'))
    return _affine(u, state.params, 'project.1')


def predict(state, a, grid, label):
    """Evaluate :func:`ncwno_forward` without recording a graph and return an array."""
    with no_grad():
        return ncwno_forward(a, grid, label, state).data
