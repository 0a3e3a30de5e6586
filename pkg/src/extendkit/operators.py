"""Operator representations and uniform access to log power norms and minimum moduli.

Three models are supported:

* :class:`DenseOperator` -- a complex square matrix (Hilbert geometry, so the
  minimum modulus is the smallest singular value);
* :class:`WeightedShift` -- a unilateral weighted shift ``e_k -> w_k e_{k+1}``;
* :class:`GrowthProfile` -- tabulated ``log ||T^n||`` and ``log m(T^n)``.

Every quantity is returned on a natural-log scale. Each model exposes the
vectorised pair ``log_norms(n)`` / ``log_minmods(n)`` over integer arrays with
``n >= 0`` (``n = 0`` is the identity and yields 0).
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .exceptions import PowerOverflowError, PreconditionError, RangeError
from .logspace import compensated_cumsum, log_safe
from .validation import check_positive_int, check_square_matrix

# above this many powers the dense path switches from a sequential table to
# per-index repeated squaring
_TABLE_LIMIT = 1 << 16
_CHUNK = 1 << 14
_EPS = np.finfo(np.float64).eps


def _as_index_array(n):
    n = np.asarray(n)
    if n.size and not np.issubdtype(n.dtype, np.integer):
        if not np.all(np.mod(n, 1) == 0):
            raise PreconditionError("power indices must be integers")
    n = n.astype(np.int64)
    if n.size and n.min() < 0:
        raise PreconditionError("power indices must be >= 0")
    return n


def _normalise(M, scale):
    mu = np.abs(M).max()
    if mu == 0.0:
        return M, -math.inf
    return M / mu, scale + math.log(mu)


def _power_table(A, max_n):
    """Rescaled powers A^0..A^max_n as (unit-max matrices, log scales)."""
    d = A.shape[0]
    base, tau = _normalise(A, 0.0)
    mats = np.empty((max_n + 1, d, d), dtype=np.complex128)
    scales = np.empty(max_n + 1)
    M, s = np.eye(d, dtype=np.complex128), 0.0
    mats[0], scales[0] = M, s
    for k in range(1, max_n + 1):
        if s == -math.inf:
            mats[k], scales[k] = M, s
            continue
        M, s = _normalise(M @ base, s + tau)
        if not math.isfinite(s) and s != -math.inf:
            raise PowerOverflowError(f"log scale of A^{k} is not finite")
        mats[k], scales[k] = M, s
    return mats, scales


def _power_squaring(A, n):
    """Rescaled A^n via binary exponentiation."""
    d = A.shape[0]
    base, s_base = _normalise(A, 0.0)
    M, s = np.eye(d, dtype=np.complex128), 0.0
    while n:
        if n & 1:
            M, s = _normalise(M @ base, s + s_base)
        n >>= 1
        if n:
            base, s_base = _normalise(base @ base, 2.0 * s_base)
        if s == -math.inf or s_base == -math.inf:
            return M, -math.inf
        if math.isnan(s) or math.isnan(s_base):
            raise PowerOverflowError("non-finite intermediate in repeated squaring")
    return M, s


def _log_extreme_singular(mats, scales, which):
    out = np.empty(len(scales))
    for start in range(0, len(scales), _CHUNK):
        stop = start + _CHUNK
        sv = np.linalg.svd(mats[start:stop], compute_uv=False)
        pick = sv[:, 0] if which == "max" else sv[:, -1]
        out[start:stop] = scales[start:stop] + log_safe(pick)
    out[np.isneginf(scales)] = -math.inf
    return out


def _log_power_norms(A, n):
    n = _as_index_array(n)
    flat = n.ravel()
    if flat.size == 0:
        return np.zeros(n.shape)
    top = int(flat.max())
    if top <= _TABLE_LIMIT:
        mats, scales = _power_table(A, top)
        table = _log_extreme_singular(mats, scales, "max")
        return table[flat].reshape(n.shape)
    uniq, inverse = np.unique(flat, return_inverse=True)
    vals = np.empty(uniq.size)
    for i, k in enumerate(uniq.tolist()):
        M, s = _power_squaring(A, k)
        vals[i] = -math.inf if s == -math.inf else s + math.log(np.linalg.norm(M, 2))
    return vals[inverse].reshape(n.shape)


@dataclass(frozen=True, eq=False)
class DenseOperator:
    """A complex ``dim x dim`` matrix acting on Euclidean ``C^dim``.

    The minimum modulus of an invertible matrix power is evaluated as
    ``1 / ||T^{-n}||``, which keeps full relative accuracy where the smallest
    singular value of ``T^n`` itself would underflow against the largest.
    """

    entries: np.ndarray
    kind = "dense"
    max_n = None

    def __post_init__(self):
        object.__setattr__(self, "entries", check_square_matrix(self.entries, "entries"))
        self.entries.setflags(write=False)
        sv = np.linalg.svd(self.entries, compute_uv=False)
        object.__setattr__(self, "_sv", sv)
        # unitary matrices have every power isometric; skip the power tables
        object.__setattr__(self, "_unitary", bool(abs(sv[0] - 1.0) <= 1e-12 and abs(sv[-1] - 1.0) <= 1e-12))

    @property
    def dim(self):
        return self.entries.shape[0]

    @property
    def injective(self):
        sv = self._sv
        return bool(sv[-1] > sv[0] * self.dim * _EPS)

    @property
    def inverse_entries(self):
        if not self.injective:
            raise PreconditionError("operator is not injective")
        return np.linalg.inv(self.entries)

    @property
    def envelope(self):
        # isometries satisfy v_n = 1; nothing else has a closed-form envelope here
        if self._unitary:
            return ("P", 1.0, 0.0)
        return None

    def log_norms(self, n):
        if self._unitary:
            return np.zeros(_as_index_array(n).shape)
        return _log_power_norms(self.entries, n)

    def log_minmods(self, n):
        n = _as_index_array(n)
        if self._unitary:
            return np.zeros(n.shape)
        if not self.injective:
            out = np.full(n.shape, -math.inf)
            out[n == 0] = 0.0
            return out
        return -_log_power_norms(self.inverse_entries, n)

    def power(self, n):
        """``T^n`` as an explicit matrix (may overflow for large n)."""
        return np.linalg.matrix_power(self.entries, int(n))


_MONOTONE = ("increasing", "decreasing", "none")


@dataclass(frozen=True, eq=False)
class WeightedShift:
    """Unilateral weighted shift ``S e_k = w_k e_{k+1}`` on ``l^2(N)``.

    Exactly one weight source is used: a named closed form (``name``), an
    explicit list whose last entry repeats forever (``weights``), or a
    vectorised callable ``log_weight(k)``. ``limit`` is the limit of ``w_k``
    (needed for monotone callables); ``bound`` is the declared ``sup w_k``
    used as a tail bound when no monotonicity is declared.
    """

    name: str = None
    weights: tuple = None
    log_weight: object = None
    monotone: str = "none"
    limit: float = None
    bound: float = None
    window: int = 4096
    kind = "weighted_shift"
    max_n = None

    def __post_init__(self):
        sources = sum(x is not None for x in (self.name, self.weights, self.log_weight))
        if sources != 1:
            raise PreconditionError("give exactly one of name, weights, log_weight")
        if self.monotone not in _MONOTONE:
            raise PreconditionError(f"monotone must be one of {_MONOTONE}")
        if self.name is not None:
            if self.name != "bergman":
                raise PreconditionError(f"unknown named weight sequence {self.name!r}")
            object.__setattr__(self, "monotone", "increasing")
            object.__setattr__(self, "limit", 1.0)
            object.__setattr__(self, "bound", 1.0)
        elif self.weights is not None:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.ndim != 1 or w.size == 0 or not np.all(np.isfinite(w)) or np.any(w <= 0):
                raise PreconditionError("weights must be a non-empty list of positive reals")
            object.__setattr__(self, "weights", tuple(w.tolist()))
            object.__setattr__(self, "limit", float(w[-1]))
            object.__setattr__(self, "bound", float(w.max()))
            prefix = compensated_cumsum(np.log(w))
            prefix.setflags(write=False)
            object.__setattr__(self, "_prefix", prefix)
        else:
            if self.monotone != "none" and self.limit is None:
                raise PreconditionError("monotone callable weights need a declared limit")
            if self.monotone == "none" and self.bound is None:
                raise PreconditionError("non-monotone callable weights need a declared bound")
        if self.bound is None:
            object.__setattr__(self, "bound", self.limit if self.monotone == "increasing" else None)

    @classmethod
    def bergman(cls):
        """``w_n = sqrt((n+1)/(n+2))``."""
        return cls(name="bergman")

    @property
    def exact(self):
        """False when sup/inf come from a finite window plus a tail bound."""
        return self.monotone != "none" or self.weights is not None

    @property
    def envelope(self):
        if self.name == "bergman":
            return ("P", math.sqrt(2.0), 0.5)
        return None

    def log_partial(self, k, n):
        """``sum_{i<n} log w_{k+i}``, vectorised over broadcast ``k`` and ``n``."""
        k = _as_index_array(k)
        n = _as_index_array(n)
        if self.name == "bergman":
            k, n = np.broadcast_arrays(k, n)
            return -0.5 * np.log1p(n / (k + 1.0))
        if self.weights is not None:
            L = len(self.weights)
            k, n = np.broadcast_arrays(k, n)
            lo = np.minimum(k, L)
            hi = np.minimum(k + n, L)
            tail = (k + n) - np.maximum(k, L)
            return (self._prefix[hi] - self._prefix[lo]) + np.maximum(tail, 0) * math.log(self.weights[-1])
        k, n = np.broadcast_arrays(k, n)
        top = int((k + n).max()) if k.size else 0
        prefix = compensated_cumsum(self.log_weight(np.arange(top)))
        return prefix[k + n] - prefix[k]

    def _window_extreme(self, n, which):
        n = _as_index_array(n)
        out = np.empty(n.shape)
        flat = out.reshape(-1)
        if self.weights is not None:
            ks = np.arange(len(self.weights) + 1)
        else:
            ks = np.arange(self.window + 1)
        pick = np.max if which == "max" else np.min
        for i, m in enumerate(n.ravel().tolist()):
            flat[i] = pick(self.log_partial(ks, m)) if m else 0.0
        return out

    def log_norms(self, n):
        n = _as_index_array(n)
        if self.monotone == "increasing":
            return n * math.log(self.limit)
        if self.monotone == "decreasing":
            return self.log_partial(0, n)
        return self._window_extreme(n, "max")

    def log_minmods(self, n):
        n = _as_index_array(n)
        if self.monotone == "increasing":
            return self.log_partial(0, n)
        if self.monotone == "decreasing":
            if self.limit > 0:
                return n * math.log(self.limit)
            return np.where(n == 0, 0.0, -math.inf)
        return self._window_extreme(n, "min")

    def tail_bound(self, n):
        """Upper bound on ``log ||S^n||`` valid beyond the search window."""
        if self.exact:
            return self.log_norms(n)
        return np.asarray(n) * math.log(self.bound)


@dataclass(frozen=True, eq=False)
class GrowthProfile:
    """Tabulated ``log ||T^n||`` and ``log m(T^n)`` for ``n = 1..max_n``.

    ``envelope`` optionally declares an analytic bound on ``v_n`` valid for
    all n, as ``("P", C, s)`` (``v_n <= C n^s``) or ``("E", C, s)``
    (``v_n <= C exp(n^s)``); growth checks use it to prove tails.
    """

    log_norm: np.ndarray
    log_minmod: np.ndarray
    envelope: tuple = None
    kind = "profile"

    def __post_init__(self):
        a = np.asarray(self.log_norm, dtype=np.float64)
        b = np.asarray(self.log_minmod, dtype=np.float64)
        if a.ndim != 1 or a.shape != b.shape or a.size == 0:
            raise PreconditionError("log_norm and log_minmod must be 1-D of equal non-zero length")
        if np.any(np.isnan(a)) or np.any(np.isnan(b)) or np.any(np.isinf(a)):
            raise PreconditionError("profile entries must be finite (log_minmod may be -inf)")
        a = np.concatenate([[0.0], a])
        b = np.concatenate([[0.0], b])
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "_a", a)
        object.__setattr__(self, "_b", b)
        object.__setattr__(self, "log_norm", a[1:])
        object.__setattr__(self, "log_minmod", b[1:])
        if self.envelope is not None:
            kind, C, s = self.envelope
            object.__setattr__(self, "envelope", (str(kind), float(C), float(s)))

    @property
    def max_n(self):
        return self.log_norm.size

    def _lookup(self, table, n):
        n = _as_index_array(n)
        if n.size and n.max() > self.max_n:
            raise RangeError(f"power {int(n.max())} exceeds profile length {self.max_n}")
        return table[n]

    def log_norms(self, n):
        return self._lookup(self._a, n)

    def log_minmods(self, n):
        return self._lookup(self._b, n)

    def check_consistency(self, tol=1e-9, max_pairs=None):
        """True when log_norm is subadditive, log_minmod superadditive and m <= ||.||."""
        N = self.max_n if max_pairs is None else min(self.max_n, max_pairs)
        a, b = self._a[: N + 1], self._b[: N + 1]
        if np.any(b[1:] > a[1:] + tol):
            return False
        for i in range(1, N // 2 + 1):
            j = np.arange(i, N - i + 1)
            if np.any(a[i + j] > a[i] + a[j] + tol):
                return False
            if np.any(b[i + j] < b[i] + b[j] - tol):
                return False
        return True


def as_operator(op):
    """Coerce arrays to :class:`DenseOperator`; pass models through."""
    if isinstance(op, (DenseOperator, WeightedShift, GrowthProfile)):
        return op
    return DenseOperator(np.asarray(op))


def available_range(op, max_n=None):
    """Largest power index usable for ``op`` (capped by ``max_n``)."""
    op = as_operator(op)
    limit = op.max_n
    if max_n is None:
        if limit is None:
            raise PreconditionError("max_n is required for operators without a finite range")
        return limit
    if limit is not None and max_n > limit:
        raise RangeError(f"requested range {max_n} exceeds profile length {limit}")
    return int(max_n)


def power_norm(op, n):
    """``log ||T^n||``."""
    op = as_operator(op)
    n = check_positive_int(n, "n", minimum=0)
    value = float(op.log_norms(np.array([n]))[0])
    if math.isnan(value) or value == math.inf:
        raise PowerOverflowError(f"log ||T^{n}|| is not finite")
    return value


def min_modulus(op, n):
    """``log m(T^n)``; ``-inf`` flags a non-injective power."""
    op = as_operator(op)
    n = check_positive_int(n, "n", minimum=0)
    value = float(op.log_minmods(np.array([n]))[0])
    if math.isnan(value):
        raise PowerOverflowError(f"log m(T^{n}) is not a number")
    return value


def v_sequence(op, max_n):
    """``log v_n = max(log ||T^n||, -log m(T^n))`` for ``n = 1..max_n``."""
    op = as_operator(op)
    max_n = check_positive_int(max_n, "max_n")
    n = np.arange(1, max_n + 1)
    out = np.empty(max_n)
    for start in range(0, max_n, 1 << 20):
        idx = n[start : start + (1 << 20)]
        out[start : start + idx.size] = np.maximum(op.log_norms(idx), -op.log_minmods(idx))
    return out


def profile_of(op, max_n):
    """Materialise ``op`` as a :class:`GrowthProfile` of length ``max_n``."""
    op = as_operator(op)
    if isinstance(op, GrowthProfile) and max_n == op.max_n:
        return op
    max_n = check_positive_int(max_n, "max_n")
    n = np.arange(1, max_n + 1)
    return GrowthProfile(op.log_norms(n), op.log_minmods(n), envelope=getattr(op, "envelope", None))


@dataclass(frozen=True)
class GelfandEstimate:
    log_spectral_radius: float
    log_min_ap: float
    cesaro_spectral_radius: float
    cesaro_min_ap: float
    bracket: tuple = field(default=(-math.inf, math.inf))

    def __iter__(self):
        yield self.log_spectral_radius
        yield self.log_min_ap

    @property
    def width(self):
        return self.bracket[1] - self.bracket[0]


def gelfand_limits(op, max_n):
    """Estimate ``log r(T)`` and ``log min{|z| : z in sigma_ap(T)}``.

    The point estimates are ``log ||T^N|| / N`` and ``log m(T^N) / N``. By
    Fekete's lemma both limits lie in ``[sup_n log m(T^n)/n, inf_n log ||T^n||/n]``,
    which is returned as ``bracket``. The Cesaro estimates average the
    normalised logs over ``n in (N/2, N]``.
    """
    op = as_operator(op)
    max_n = check_positive_int(max_n, "max_n", minimum=8)
    n = np.arange(1, max_n + 1)
    a = op.log_norms(n) / n
    b = op.log_minmods(n) / n
    half = max_n // 2
    return GelfandEstimate(
        log_spectral_radius=float(a[-1]),
        log_min_ap=float(b[-1]),
        cesaro_spectral_radius=float(np.mean(a[half:])),
        cesaro_min_ap=float(np.mean(b[half:])),
        bracket=(float(np.max(b)), float(np.min(a))),
    )
