from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    """Moments and step counter of Adam [kingma2014adam]_.

    ``m`` and ``v`` are keyed by parameter name and created lazily with the shape of their parameter.
    """
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-6
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        assert self.lr >= 0, '`lr` must be non-negative.'
        assert 0 <= self.beta1 < 1 and 0 <= self.beta2 < 1, '`beta1` and `beta2` must lie in [0, 1).'
        assert self.eps > 0, '`eps` must be positive.'
        assert self.weight_decay >= 0, '`weight_decay` must be non-negative.'
        assert self.t >= 0, '`t` must be non-negative.'


def adam_step(params, grads, state):
    """Apply one bias-corrected Adam update with classical (gradient-added) weight decay.

    Parameters
    ----------
    params : dict of str to array
        Current parameter values.
    grads : dict of str to array or None
        Gradients keyed like ``params``. Parameters with a missing or None gradient are left untouched.
    state : AdamState
        Optimizer state, updated in place.

    Returns
    -------
    params : dict of str to array
        Updated parameter values; arrays of untouched parameters are passed through.

    References
    ----------
    .. [kingma2014adam] Kingma, Diederik P., and Jimmy Ba. "Adam: A method for stochastic optimization."
        arXiv preprint arXiv:1412.6980 (2014).
    """
    state.t += 1
    t = state.t
    updated = {}
    for name, theta in params.items():
        g = grads.get(name)
        if g is None:
            updated[name] = theta
            continue
        if np.shape(g) != np.shape(theta):
            raise ValueError('Gradient of `%s` has shape %s, expected %s.' % (name, np.shape(g), np.shape(theta)))
        if state.weight_decay:
            g = g + state.weight_decay * theta
        m = state.m.get(name, np.zeros_like(theta))
        v = state.v.get(name, np.zeros_like(theta))
        m = state.beta1 * m + (1 - state.beta1) * g
        v = state.beta2 * v + (1 - state.beta2) * g * g
        state.m[name], state.v[name] = m, v
        m_hat = m / (1 - state.beta1 ** t)
        v_hat = v / (1 - state.beta2 ** t)
        updated[name] = theta - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return updated


def clip_grad_norm(grads, max_norm):
    """Rescale ``grads`` so that their global L2 norm does not exceed ``max_norm``.

    Returns
    -------
    grads : dict of str to array
    norm : float
        Global norm before clipping.
    """
    assert max_norm > 0, '`max_norm` must be positive.'
    norm = float(np.sqrt(sum(np.sum(np.square(g)) for g in grads.values() if g is not None)))
    if norm <= max_norm:
        return grads, norm
    scale = max_norm / norm
    return {name: None if g is None else g * scale for name, g in grads.items()}, norm


def step_lr_schedule(epoch, base_lr, step_size, gamma):
    """Learning rate ``base_lr * gamma ** (epoch // step_size)``."""
    assert isinstance(step_size, (int, np.integer)) and step_size >= 1, '`step_size` must be a positive integer.'
    return base_lr * gamma ** (epoch // step_size)


class Adam:
    """Adam over a named set of tensors.

    Parameters
    ----------
    params : dict of str to Tensor
        Trainable tensors. Their ``data`` is replaced on every :meth:`step`.
    lr : float, default 1e-3
    weight_decay : float, default 1e-6
    clip_norm : float or None, default None
        If given, gradients are clipped to this global norm before the update.
    """

    def __init__(self, params, lr=1e-3, weight_decay=1e-6, clip_norm=None):
        self.params = dict(params)
        self.state = AdamState(lr=lr, weight_decay=weight_decay)
        self.clip_norm = clip_norm

    @property
    def lr(self):
        return self.state.lr

    @lr.setter
    def lr(self, value):
        self.state.lr = value

    def zero_grad(self):
        for p in self.params.values():
            p.zero_grad()

    def step(self):
        grads = {name: p.grad for name, p in self.params.items()}
        if self.clip_norm is not None:
            grads, _ = clip_grad_norm(grads, self.clip_norm)
        values = adam_step({name: p.data for name, p in self.params.items()}, grads, self.state)
        for name, p in self.params.items():
            p.data = np.asarray(values[name], dtype=p.dtype)
