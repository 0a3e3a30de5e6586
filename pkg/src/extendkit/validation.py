"""Input validation helpers shared by the estimators and free functions."""
import math
import numbers

import numpy as np

from .exceptions import PreconditionError


def check_square_matrix(A, name="T"):
    """Return ``A`` as a finite complex square 2-D array.

    Real input is promoted to complex; 0-d and 1-element inputs become 1x1.
    """
    A = np.asarray(A)
    if A.ndim == 0:
        A = A.reshape(1, 1)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise PreconditionError(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.issubdtype(A.dtype, np.number):
        raise PreconditionError(f"{name} must be numeric, got dtype {A.dtype}")
    A = A.astype(np.complex128)
    if not np.all(np.isfinite(A)):
        raise PreconditionError(f"{name} has non-finite entries")
    return A


def check_vector(x, dim, name="x"):
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.shape != (dim,):
        raise PreconditionError(f"{name} must have shape ({dim},), got {x.shape}")
    return x


def check_positive_int(n, name="n", minimum=1):
    if isinstance(n, bool) or not isinstance(n, numbers.Integral):
        raise PreconditionError(f"{name} must be an integer, got {n!r}")
    if n < minimum:
        raise PreconditionError(f"{name} must be >= {minimum}, got {n}")
    return int(n)


def check_p(p, allowed=None):
    """Validate an exponent p in [1, inf]; ``allowed`` restricts the set."""
    try:
        p = float(p)
    except (TypeError, ValueError):
        raise PreconditionError(f"p must be a real number or inf, got {p!r}") from None
    if math.isnan(p) or p < 1:
        raise PreconditionError(f"p must lie in [1, inf], got {p}")
    if allowed is not None and p not in allowed:
        raise PreconditionError(f"p={p} unsupported here; expected one of {sorted(allowed)}")
    return p


def check_ladder(ladder):
    """Ladder must be integers 0 = k_0 < k_1 < ... ."""
    k = np.asarray(ladder)
    if k.ndim != 1 or k.size < 2:
        raise PreconditionError("ladder needs k_0 = 0 and at least one further rung")
    if not np.issubdtype(k.dtype, np.integer):
        if not np.all(np.equal(np.mod(k, 1), 0)):
            raise PreconditionError("ladder entries must be integers")
        k = k.astype(np.int64)
    k = k.astype(np.int64)
    if k[0] != 0:
        raise PreconditionError("ladder must start at k_0 = 0")
    if np.any(np.diff(k) <= 0):
        raise PreconditionError("ladder must be strictly increasing")
    return k


def check_log_sequence(values, name="log_c"):
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1:
        raise PreconditionError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(v)):
        raise PreconditionError(f"{name} must be finite")
    return v


def check_random_state(seed):
    """Turn ``seed`` into a ``numpy.random.Generator``."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
