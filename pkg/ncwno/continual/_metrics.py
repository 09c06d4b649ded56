import numpy as np


def _pair(u, u_pred):
    u = np.asarray(u, dtype=np.float64)
    u_pred = np.asarray(u_pred, dtype=np.float64)
    if u.shape != u_pred.shape:
        raise ValueError('Shapes %s and %s differ.' % (u.shape, u_pred.shape))
    return u, u_pred


def relative_l2(u, u_pred):
    """Relative error ``||u - u_pred|| / ||u||`` in the Frobenius norm.

    Parameters
    ----------
    u : array-like
        Reference solution.
    u_pred : array-like
        Prediction, same shape as ``u``.

    Returns
    -------
    error : float
    """
    u, u_pred = _pair(u, u_pred)
    norm = np.linalg.norm(u)
    if norm == 0:
        raise ValueError('Relative error is undefined for a zero-norm reference.')
    return float(np.linalg.norm(u - u_pred) / norm)


def accuracy_metric(u, u_pred):
    """``1 - relative_l2(u, u_pred)``."""
    return 1. - relative_l2(u, u_pred)


def cosine_similarity(x, y):
    """Frobenius inner product of two equally shaped arrays over the product of their Frobenius norms."""
    x, y = _pair(x, y)
    norms = np.linalg.norm(x) * np.linalg.norm(y)
    if norms == 0:
        raise ValueError('Cosine similarity is undefined for a zero-norm operand.')
    return float(np.sum(x * y) / norms)


def similarity_matrix(arrays):
    """Pairwise :func:`cosine_similarity` of a list of arrays, cropped to their common leading extents."""
    arrays = [np.asarray(a, dtype=np.float64) for a in arrays]
    if len({a.shape[2:] for a in arrays}) > 1:
        raise ValueError('Arrays must share trailing dimensions, got %s.' % [a.shape for a in arrays])
    n = len(arrays)
    matrix = np.ones((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            rows = min(arrays[i].shape[0], arrays[j].shape[0])
            cols = min(arrays[i].shape[1], arrays[j].shape[1])
            matrix[i, j] = matrix[j, i] = cosine_similarity(arrays[i][:rows, :cols], arrays[j][:rows, :cols])
    return matrix


def confidence_interval(values, z=1.96):
    """Mean and normal-approximation interval ``mean -/+ z * sd / sqrt(n)`` of a sample.

    Returns
    -------
    mean, low, high : float
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise ValueError('Cannot summarize an empty sample.')
    mean = float(np.mean(values))
    half = 0. if values.size < 2 else float(z * np.std(values, ddof=1) / np.sqrt(values.size))
    return mean, mean - half, mean + half
