"""Submultiplicative majorant sequences ``(c_j)`` and their constructions.

A :class:`MajorantSequence` stores ``log c_j`` for ``j = 1..length`` (``c_0 = 1``
is implicit) together with a ladder ``0 = k_0 < k_1 < ...``. Closed-form
recipes are evaluated on demand so that sequences indexed into the tens of
millions do not have to be materialised.
"""
from dataclasses import dataclass, field
import math
import warnings

import numpy as np

from .exceptions import CertificationError, PreconditionError, RangeError
from .growth import beurling_sum
from .operators import as_operator, available_range, min_modulus
from .validation import check_ladder, check_log_sequence, check_positive_int, check_random_state

RECIPES = ("poly", "beurling", "exp", "geometric", "user")
SUBMULT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class MajorantSequence:
    """``log c_j`` for ``j = 1..length`` plus a ladder and provenance.

    Either ``values`` (explicit ``log c_1..log c_J``) or a closed-form
    ``recipe`` in ``{"poly", "exp", "geometric"}`` with its ``params`` defines
    the entries.
    """

    length: int
    recipe: str
    ladder: np.ndarray
    params: dict = field(default_factory=dict)
    values: np.ndarray = None

    def __post_init__(self):
        if self.recipe not in RECIPES:
            raise PreconditionError(f"unknown recipe {self.recipe!r}")
        object.__setattr__(self, "length", check_positive_int(self.length, "length"))
        ladder = check_ladder(self.ladder)
        ladder = ladder[ladder <= self.length]
        ladder.setflags(write=False)
        object.__setattr__(self, "ladder", ladder)
        if self.values is not None:
            v = check_log_sequence(self.values)
            if v.size != self.length:
                raise PreconditionError("values must hold exactly `length` entries")
            v = np.concatenate([[0.0], v])
            v.setflags(write=False)
            object.__setattr__(self, "values", v)
        elif self.recipe not in ("poly", "exp", "geometric"):
            raise PreconditionError(f"recipe {self.recipe!r} needs explicit values")

    @classmethod
    def from_log_values(cls, log_c, ladder=None, recipe="user", params=None):
        log_c = check_log_sequence(log_c)
        if ladder is None:
            ladder = np.arange(log_c.size + 1)
        return cls(log_c.size, recipe, ladder, dict(params or {}), log_c)

    def log_c_at(self, j):
        """Vectorised ``log c_j`` with ``log c_0 = 0``."""
        j = np.asarray(j, dtype=np.int64)
        if j.size and (j.min() < 0 or j.max() > self.length):
            raise RangeError(f"index outside 0..{self.length}")
        if self.values is not None:
            return self.values[j]
        p = self.params
        jf = j.astype(np.float64)
        if self.recipe == "poly":
            out = p["log_K"] + p["exponent"] * np.log1p(jf)
        elif self.recipe == "exp":
            out = p["log_K"] + jf ** p["power"]
        else:
            out = p["rate"] * jf
        return np.where(j == 0, 0.0, out)

    @property
    def log_c(self):
        """Materialised ``log c_1..log c_J``."""
        return self.log_c_at(np.arange(1, self.length + 1))

    def to_dict(self, max_entries=4096):
        J = self.length if max_entries is None else min(self.length, max_entries)
        params = {k: (float(v) if isinstance(v, (np.floating, float)) else v) for k, v in self.params.items()}
        return {
            "recipe": self.recipe,
            "params": params,
            "length": self.length,
            "ladder": [int(k) for k in self.ladder],
            "log_c": self.log_c_at(np.arange(1, J + 1)).tolist(),
            "truncated": J < self.length,
        }


@dataclass(frozen=True, eq=False)
class BeurlingScaffold:
    """Intermediate sequences for the Beurling-condition construction (log scale).

    ``log_r[i] = log v_{2^i}``; ``log_b[n]`` for ``n = 0..2J``; ``log_cmax[n-1]``
    and ``log_d[n-1]`` for ``n = 1..J``.
    """

    log_r: np.ndarray
    log_b: np.ndarray
    log_cmax: np.ndarray
    log_d: np.ndarray


def check_submultiplicative(seq, mode="exhaustive", max_index=4096, samples=10**5,
                            seed=0, tol=SUBMULT_TOL):
    """Check ``log c_{i+j} <= log c_i + log c_j`` for ``i, j >= 1``.

    ``seq`` is a :class:`MajorantSequence` or an array of ``log c_1..log c_J``.
    Returns ``(passed, witness)`` with ``witness = (i, j)`` the first violation
    in lexicographic order (``i <= j``), or ``None``.
    """
    if isinstance(seq, MajorantSequence):
        J = seq.length if mode == "sampled" else min(seq.length, max_index)
        L = seq.log_c_at(np.arange(J + 1))
    else:
        v = np.asarray(seq, dtype=np.float64)
        J = v.size if mode == "sampled" else min(v.size, max_index)
        L = np.concatenate([[0.0], v[:J]])
    if mode == "exhaustive":
        for i in range(1, J // 2 + 1):
            j = np.arange(i, J - i + 1)
            bad = np.nonzero(L[i + j] > L[i] + L[j] + tol)[0]
            if bad.size:
                return False, (i, int(j[bad[0]]))
        return True, None
    if mode != "sampled":
        raise PreconditionError("mode must be 'exhaustive' or 'sampled'")
    rng = check_random_state(seed)
    i = rng.integers(1, J, size=samples)
    j = rng.integers(1, J - i + 1)
    bad = np.nonzero(L[i + j] > L[i] + L[j] + tol)[0]
    if bad.size:
        pairs = sorted(zip(np.minimum(i[bad], j[bad]).tolist(), np.maximum(i[bad], j[bad]).tolist()))
        return False, pairs[0]
    return True, None


_E4 = math.ceil(math.exp(4.0))  # 55


def build_poly(op, s, eps, max_n=None, tol=1e-12):
    """Polynomial-growth majorant ``c_j = K (j+1)^(6s+3+eps)``.

    ``k_1`` is the smallest integer ``>= e^4`` with ``v_n <= n^(s+eps/6)`` for
    every scanned ``n >= k_1``; ``K = max_{0<=j<=k_1} 2 k_1 ||T^j|| / m(T^{k_1})``
    and the ladder is ``k_n = k_1^(2^(n-1))``, truncated to the scanned range.
    """
    if eps <= 0 or s < 0:
        raise PreconditionError("build_poly needs s >= 0 and eps > 0")
    op = as_operator(op)
    N = available_range(op, max_n)
    if N < _E4:
        raise RangeError(f"profile range {N} is shorter than e^4")
    slope = s + eps / 6.0
    last_bad = 0
    first_bad = None
    chunk = 1 << 20
    for start in range(_E4, N + 1, chunk):
        n = np.arange(start, min(start + chunk, N + 1))
        logv = np.maximum(op.log_norms(n), -op.log_minmods(n))
        bad = np.nonzero(logv > slope * np.log(n) + tol)[0]
        if bad.size:
            last_bad = int(n[bad[-1]])
            if first_bad is None:
                first_bad = int(n[bad[0]])
    k1 = max(_E4, last_bad + 1)
    if k1 > N:
        raise RangeError(f"v_n <= n^(s+eps/6) fails at n = {first_bad} and no k_1 <= {N} works")
    j = np.arange(0, k1 + 1)
    log_m_k1 = float(op.log_minmods(np.array([k1]))[0])
    if log_m_k1 == -math.inf:
        raise PreconditionError(f"m(T^{k1}) = 0")
    log_K = math.log(2 * k1) + float(np.max(op.log_norms(j))) - log_m_k1
    exponent = 6 * s + 3 + eps
    ladder = [0]
    r = 1
    while k1 ** (2 ** (r - 1)) <= N:
        ladder.append(k1 ** (2 ** (r - 1)))
        r += 1
    params = {"s": s, "eps": eps, "k1": k1, "log_K": log_K, "K": math.exp(log_K),
              "exponent": exponent, "rungs": len(ladder) - 1, "range": N}
    return MajorantSequence(N, "poly", np.array(ladder, dtype=np.int64), params)


def _binary_log_products(log_r, top):
    """``log b_n = sum_i alpha_i(n) log r_i`` for ``n = 0..top``.

    Numbers with top bit ``i`` are ``2^i + k`` with ``k < 2^i``, so each
    block is the previous prefix shifted by ``log r_i``.
    """
    out = np.empty(top + 1)
    out[0] = 0.0
    i = 0
    while (1 << i) <= top:
        lo = 1 << i
        hi = min(2 * lo, top + 1)
        out[lo:hi] = out[: hi - lo] + log_r[i]
        i += 1
    return out


def _doubling_window_max(B, J):
    """``out[n-1] = max(B[n..2n])`` for ``n = 1..J`` via a rolling sparse table."""
    out = np.empty(J)
    level = B.copy()
    width = 1
    ell = 0
    while True:
        # windows of length n+1 with floor(log2(n+1)) == ell
        lo = max(1, (1 << ell) - 1)
        hi = min(J, (1 << (ell + 1)) - 2)
        if lo <= hi:
            n = np.arange(lo, hi + 1)
            out[n - 1] = np.maximum(level[n], level[2 * n - width + 1])
        if hi >= J:
            break
        level = np.maximum(level[:-width], level[width:])
        width *= 2
        ell += 1
    return out


def build_beurling(op, J=None, max_n=None):
    """Majorant for the Beurling condition: ``d_n = 4 n^2 max{b_j^2 : n <= j <= 2n}``.

    ``r_i = v_{2^i}`` and ``b_n = prod_i r_i^{alpha_i}`` over the binary digits
    of ``n``. The ladder is ``k_n = 2^n - 1``. Returns ``(scaffold, sequence)``.
    """
    op = as_operator(op)
    N = available_range(op, max_n)
    if J is None:
        J = N // 2
    J = check_positive_int(J, "J")
    if 2 * J > N:
        raise RangeError(f"d_1..d_{J} needs v_n up to n = {2 * J}, range is {N}")
    bits = (2 * J).bit_length()
    idx = 1 << np.arange(bits)
    log_r = np.maximum(op.log_norms(idx), -op.log_minmods(idx))
    log_b = _binary_log_products(log_r, 2 * J)
    log_cmax = _doubling_window_max(2.0 * log_b, J)
    n = np.arange(1, J + 1, dtype=np.float64)
    log_d = math.log(4.0) + 2.0 * np.log(n) + log_cmax
    ladder = [(1 << k) - 1 for k in range(J.bit_length() + 1) if (1 << k) - 1 <= J]
    verdict = beurling_sum(op, N).certificate.verdict
    scaffold = BeurlingScaffold(log_r, log_b, log_cmax, log_d)
    params = {"J": J, "range": N, "beurling_verdict": verdict}
    seq = MajorantSequence(J, "beurling", np.array(ladder, dtype=np.int64), params, log_d)
    return scaffold, seq


def build_geometric(op, length=4096):
    """``c_j = (sqrt(2)/m(T))^j`` with ladder ``k_n = n``."""
    log_m = min_modulus(op, 1)
    if log_m == -math.inf:
        raise PreconditionError("build_geometric needs an injective operator (m(T) > 0)")
    rate = 0.5 * math.log(2.0) - log_m
    params = {"rate": rate, "log_m": log_m}
    return MajorantSequence(length, "geometric", np.arange(length + 1), params)


def build_exp(op, s, eps, max_n=None, bisection_steps=40):
    """Sub-exponential majorant ``c_j = K exp(j^(s+eps))`` with ladder ``k_n = 2^n``.

    ``K`` is the smallest constant (bracketed by factors of two, then refined
    by bisection on ``log K``) for which condition (*)_inf holds on the
    available range.
    """
    from .star import check_star

    if not 0 < s < 1 or eps <= 0:
        raise PreconditionError("build_exp needs 0 < s < 1 and eps > 0")
    power = s + eps
    if power >= 1:
        warnings.warn(f"s + eps = {power} >= 1; the sequence is not sub-exponential", stacklevel=2)
    op = as_operator(op)
    N = available_range(op, max_n)
    top = 1 << (N.bit_length() - 1)
    if top < 2:
        raise RangeError("build_exp needs a range of at least 2")
    ladder = np.array([0] + [1 << k for k in range(1, top.bit_length())], dtype=np.int64)

    def trial(log_K):
        params = {"s": s, "eps": eps, "power": power, "log_K": log_K}
        return MajorantSequence(top, "exp", ladder, params)

    def passes(log_K):
        return check_star(op, trial(log_K), math.inf).passed

    worst = check_star(op, trial(0.0), math.inf).worst_margin
    if not math.isfinite(worst):
        raise CertificationError("no finite K: a required minimum modulus vanishes", worst)
    lo = hi = 0.0
    step = math.log(2.0)
    if passes(0.0):
        while passes(lo - step):
            lo -= step
            if lo < -2000:
                break
        hi, lo = lo, lo - step
    else:
        for _ in range(4000):
            hi += step
            if passes(hi):
                break
        else:
            raise CertificationError("no K up to 2^4000 certifies the range", worst)
        lo = hi - step
    for _ in range(bisection_steps):
        mid = 0.5 * (lo + hi)
        if passes(mid):
            hi = mid
        else:
            lo = mid
    seq = trial(hi)
    seq.params.update({"K": math.exp(hi), "range": N})
    return seq
