import numpy as np

from ncwno.tensor._graph import backward
from ncwno.tensor._tensor import Tensor, no_grad


def _scalarize(out, weights):
    if out.size == 1:
        return out.sum()
    return (out * Tensor(weights)).sum()


def check_gradients(fn, inputs, eps=1e-4, n_samples=None, random_state=0):
    """Compare analytic gradients of ``fn`` with central finite differences.

    Non-scalar outputs are reduced with a fixed random projection so that every output entry contributes.

    Parameters
    ----------
    fn : callable
        Maps Tensors built from ``inputs`` to a Tensor.
    inputs : list of array-like
        Points at which gradients are checked, cast to float64.
    eps : float, default 1e-4
        Finite-difference step.
    n_samples : int or None
        If given, only this many randomly chosen entries per input are perturbed.
    random_state : int, default 0
        Seed of the projection and of the sampled entries.

    Returns
    -------
    error : float
        Largest relative error ``||g_analytic - g_numeric|| / (||g_analytic|| + ||g_numeric||)`` over inputs.
    """
    rng = np.random.default_rng(random_state)
    arrays = [np.array(x, dtype=np.float64) for x in inputs]
    tensors = [Tensor(x, requires_grad=True) for x in arrays]
    out = fn(*tensors)
    weights = rng.standard_normal(out.shape)
    backward(_scalarize(out, weights))

    def evaluate():
        with no_grad():
            return _scalarize(fn(*[Tensor(x) for x in arrays]), weights).item()

    error = 0.
    for x, t in zip(arrays, tensors):
        analytic = np.zeros(x.shape) if t.grad is None else t.grad
        flat = np.arange(x.size) if n_samples is None else rng.choice(x.size, min(n_samples, x.size), replace=False)
        numeric = np.zeros(len(flat))
        for k, i in enumerate(flat):
            idx = np.unravel_index(i, x.shape)
            original = x[idx]
            x[idx] = original + eps
            plus = evaluate()
            x[idx] = original - eps
            minus = evaluate()
            x[idx] = original
            numeric[k] = (plus - minus) / (2 * eps)
        expected = analytic.reshape(-1)[flat]
        scale = np.linalg.norm(expected) + np.linalg.norm(numeric)
        if scale > 0:
            error = max(error, np.linalg.norm(expected - numeric) / scale)
    return error
