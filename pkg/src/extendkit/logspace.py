"""Log-space helpers: compensated sums and safe log arithmetic."""
import math

import numpy as np

NEG_INF = -math.inf


def fsum(values):
    """Exactly rounded sum of a float iterable (``math.fsum``)."""
    return math.fsum(np.asarray(values, dtype=np.float64).ravel().tolist())


def compensated_cumsum(values):
    """Running sum with Neumaier compensation.

    ``np.cumsum`` accumulates O(n eps) drift over long weight lists; this
    keeps the error at a few ulps of the running total.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    out = np.empty(v.size + 1)
    out[0] = 0.0
    s = 0.0
    comp = 0.0
    for i, x in enumerate(v.tolist()):
        t = s + x
        if abs(s) >= abs(x):
            comp += (s - t) + x
        else:
            comp += (x - t) + s
        s = t
        out[i + 1] = s + comp
    return out


def log_safe(x):
    """Natural log mapping 0 to -inf without a warning."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(divide="ignore"):
        return np.log(x)
