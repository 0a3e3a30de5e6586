"""Constrained least-norm solvers for decomposition problems.

Both solvers handle ``sum_k A_k x_k = y``: a weighted sum of squared norms in
closed form, and a sum of norms by iteratively reweighted least squares.
"""
import numpy as np
import scipy.linalg

from .exceptions import NumericalError

IRLS_SMOOTHING = 1e-12
IRLS_MAX_ITER = 500


def weighted_least_norm(A, omega, y, regularize=0.0):
    """Minimise ``sum_k omega_k ||x_k||^2`` subject to ``sum_k A_k x_k = y``.

    Parameters
    ----------
    A : ndarray, shape (K, d, d)
    omega : ndarray, shape (K,)
        Positive weights.
    y : ndarray, shape (d,)

    Returns
    -------
    x : ndarray, shape (K, d)
    value : float
        ``y* G^{-1} y`` with ``G = sum_k omega_k^{-1} A_k A_k*``.
    """
    inv_w = 1.0 / np.asarray(omega, dtype=np.float64)
    G = np.einsum("k,kij,klj->il", inv_w, A, A.conj())
    G = 0.5 * (G + G.conj().T)
    if regularize:
        G = G + regularize * np.trace(G).real / G.shape[0] * np.eye(G.shape[0])
    try:
        cf = scipy.linalg.cho_factor(G)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("Gram matrix of the decomposition problem is singular") from exc
    z = scipy.linalg.cho_solve(cf, y)
    x = inv_w[:, None] * np.einsum("kji,j->ki", A.conj(), z)
    return x, float(np.real(np.vdot(y, z)))


def irls_sum_norms(A, w, y, max_iter=IRLS_MAX_ITER, smoothing=IRLS_SMOOTHING, rtol=1e-12):
    """Minimise ``sum_k w_k ||x_k||`` subject to ``sum_k A_k x_k = y``.

    Returns ``(x, cost)``; ``cost`` is an upper bound on the true minimum.
    """
    w = np.asarray(w, dtype=np.float64)
    scale = max(float(np.linalg.norm(y)), 1e-300)
    omega = w.copy()
    x, _ = weighted_least_norm(A, omega, y)
    cost = float(np.sum(w * np.linalg.norm(x, axis=1)))
    best = (x, cost)
    for _ in range(max_iter):
        norms = np.maximum(np.linalg.norm(x, axis=1), smoothing * scale)
        omega = w / norms
        try:
            x, _ = weighted_least_norm(A, omega, y)
        except NumericalError:
            # reweighting made the Gram matrix numerically singular; the
            # best iterate so far is still a valid upper bound
            break
        new = float(np.sum(w * np.linalg.norm(x, axis=1)))
        if new < best[1]:
            best = (x, new)
        if abs(cost - new) <= rtol * max(new, 1e-300):
            break
        cost = new
    return best
