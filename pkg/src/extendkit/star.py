"""Ladder conditions (*)_p, the extension criterion, and decomposition bounds.

For a ladder ``0 = k_0 < k_1 < ...`` and ``k_n < j <= k_{n+1}`` condition
(*)_p asks

    c_j >= pre_p(n) * prod_{r<=n} m(T^{k_{r+1}-k_r})^{-1} * ||T^{k_{n+1}-j}||

with ``pre_p(n) = (2^{n+1} (k_{n+1}-k_n))^{(p-1)/p}`` (``pre_1 = 1``).
Margins are ``log c_j - log RHS_j``.
"""
from dataclasses import dataclass, field
import math

import numpy as np
from scipy.special import logsumexp

from .exceptions import NumericalError, PreconditionError, RangeError
from .logspace import compensated_cumsum
from .operators import DenseOperator, as_operator
from .solvers import irls_sum_norms
from .validation import check_ladder, check_p, check_positive_int, check_random_state

STAR_TOL = 1e-9
_CHUNK = 1 << 22
_LOG2 = math.log(2.0)


def _exponent(p):
    return 1.0 if math.isinf(p) else (p - 1.0) / p


def prefactor_log(p, n, gap):
    """``log pre_p(n)`` for a rung of width ``gap``."""
    return _exponent(p) * ((n + 1) * _LOG2 + math.log(gap))


@dataclass(frozen=True, eq=False)
class StarCertificate:
    """Outcome of a (*)_p check.

    ``margins[j-1]`` is the margin at index ``j`` for ``j = 1..range``.
    """

    p: float
    ladder: np.ndarray
    margins: np.ndarray = field(repr=False)
    verdict: str
    range: int
    worst_j: int
    worst_margin: float
    rungs_checked: int
    rung_worst: np.ndarray = field(repr=False)
    first_fail_j: int = None

    @property
    def passed(self):
        return self.verdict == "pass"

    def to_dict(self, max_entries=4096):
        m = self.margins if max_entries is None else self.margins[:max_entries]
        return {
            "p": "inf" if math.isinf(self.p) else self.p,
            "ladder": [int(k) for k in self.ladder],
            "verdict": self.verdict,
            "range": self.range,
            "rungs_checked": self.rungs_checked,
            "worst_j": self.worst_j,
            "worst_margin": _json_float(self.worst_margin),
            "first_fail_j": self.first_fail_j,
            "rung_worst": [_json_float(v) for v in self.rung_worst],
            "margins": [_json_float(v) for v in m],
            "margins_truncated": m.size < self.margins.size,
        }


def _json_float(v):
    v = float(v)
    if math.isfinite(v):
        return v
    return "-inf" if v < 0 else ("inf" if v > 0 else "nan")


def check_star(op, seq, p, ladder=None, max_j=None, tol=STAR_TOL):
    """Check condition (*)_p for ``seq`` against ``op`` on the given ladder.

    Rungs are checked while ``k_{n+1}`` stays within the sequence length (and
    ``max_j``); every rung width must be inside the operator's range.
    """
    p = check_p(p)
    op = as_operator(op)
    k = check_ladder(seq.ladder if ladder is None else ladder)
    J = seq.length if max_j is None else min(seq.length, check_positive_int(max_j, "max_j"))
    k = k[k <= J]
    if k.size < 2:
        raise RangeError(f"no ladder rung fits in j <= {J}")
    gaps = np.diff(k)
    if op.max_n is not None and gaps.max() > op.max_n:
        bad = int(np.argmax(gaps > op.max_n))
        raise RangeError(f"rung {bad} needs power {int(gaps[bad])}, profile range is {op.max_n}")
    log_mm = op.log_minmods(gaps)
    with np.errstate(invalid="ignore"):
        cums = compensated_cumsum(-log_mm)[1:]
    top = int(k[-1])
    margins = np.empty(top)
    rung_worst = np.empty(gaps.size)
    for n, gap in enumerate(gaps.tolist()):
        lo, hi = int(k[n]), int(k[n + 1])
        cum = math.inf if np.isinf(log_mm[: n + 1]).any() else float(cums[n])
        base = prefactor_log(p, n, gap) + cum
        for start in range(lo + 1, hi + 1, _CHUNK):
            j = np.arange(start, min(start + _CHUNK, hi + 1))
            if math.isinf(cum):
                margins[j - 1] = -math.inf
                continue
            margins[j - 1] = seq.log_c_at(j) - (base + op.log_norms(hi - j))
        rung_worst[n] = float(np.min(margins[lo:hi]))
    worst = int(np.argmin(margins))
    bad = np.nonzero(margins < -tol)[0]
    verdict = "fail" if bad.size else "pass"
    first = int(bad[0]) + 1 if bad.size else None
    return StarCertificate(p, k, margins, verdict, top, worst + 1, float(margins[worst]),
                           gaps.size, rung_worst, first)


def search_ladder(op, seq, p, max_k, tol=STAR_TOL, max_rungs=None):
    """Find a ladder reaching ``max_k`` on which (*)_p holds, or ``None``.

    Greedy first: each ``k_{n+1}`` is the smallest index keeping rung ``n``
    nonnegative. Greedy can dead-end where a longer earlier rung would have
    succeeded, so on failure an exact dynamic programme over
    ``(rung count, k)`` is run; it keeps, per state, the smallest accumulated
    ``sum -log m`` (smaller is always better for later rungs). Any returned
    ladder passes :func:`check_star`.
    """
    p = check_p(p)
    op = as_operator(op)
    max_k = check_positive_int(max_k, "max_k")
    if max_k > seq.length or (op.max_n is not None and max_k > op.max_n):
        raise RangeError(f"max_k = {max_k} exceeds the available range")
    idx = np.arange(max_k + 1)
    A = op.log_norms(idx)
    Mm = -op.log_minmods(idx)
    C = seq.log_c_at(idx)
    ladder = _greedy_ladder(A, Mm, C, p, max_k, tol)
    if ladder is None:
        ladder = _dp_ladder(A, Mm, C, p, max_k, tol, max_rungs)
    if ladder is None:
        return None
    ladder = np.array(ladder, dtype=np.int64)
    if not check_star(op, seq, p, ladder=ladder, max_j=max_k, tol=tol).passed:
        return None
    return ladder


def _greedy_ladder(A, Mm, C, p, max_k, tol):
    ladder, k, cum = [0], 0, 0.0
    while k < max_k:
        n = len(ladder) - 1
        for nxt in range(k + 1, max_k + 1):
            gap = nxt - k
            if math.isinf(Mm[gap]):
                continue
            j = np.arange(k + 1, nxt + 1)
            rhs = prefactor_log(p, n, gap) + cum + Mm[gap] + A[nxt - j]
            if np.all(C[j] - rhs >= -tol):
                ladder.append(nxt)
                cum += Mm[gap]
                k = nxt
                break
        else:
            return None
    return ladder


def _dp_ladder(A, Mm, C, p, max_k, tol, max_rungs):
    R = max_rungs or 2 * max_k.bit_length() + 4
    R = min(R, max_k)
    a = _exponent(p)
    P = np.full((R + 1, max_k + 1), math.inf)
    back = np.full((R + 1, max_k + 1), -1, dtype=np.int64)
    P[0, 0] = 0.0
    rung_log = (np.arange(R) + 1.0) * _LOG2
    for nxt in range(1, max_k + 1):
        v = A[nxt - np.arange(1, nxt + 1)] - C[1 : nxt + 1]
        h = np.maximum.accumulate(v[::-1])[::-1]  # h[k] = max over j in (k, nxt]
        gaps = nxt - np.arange(nxt)
        mm = Mm[gaps]
        pre = a * (rung_log[:, None] + np.log(gaps)[None, :])
        cand = P[:R, :nxt] + mm[None, :]
        feasible = np.isfinite(cand) & (pre + cand + h[None, :] <= tol)
        cand = np.where(feasible, cand, math.inf)
        best = np.argmin(cand, axis=1)
        P[1:, nxt] = cand[np.arange(R), best]
        back[1:, nxt] = best
    rows = np.nonzero(np.isfinite(P[:, max_k]))[0]
    if rows.size == 0:
        return None
    n, k = int(rows[0]), max_k
    ladder = [k]
    while n > 0:
        k = int(back[n, k])
        n -= 1
        ladder.append(k)
    return ladder[::-1]


# ----------------------------------------------------------------------------
# extension criterion over polynomial sequences in u


def _power_stack(u, degree):
    d = u.shape[0]
    out = np.empty((degree + 1, d, d), dtype=np.complex128)
    out[0] = np.eye(d)
    for k in range(1, degree + 1):
        out[k] = out[k - 1] @ u
    return out


def _slack(a, u, log_c):
    """Criterion slack for sequences ``a[..., L, d, d]`` (with ``a_L = 0``)."""
    shifted = np.concatenate([a[..., 1:, :, :], np.zeros_like(a[..., :1, :, :])], axis=-3)
    diff = shifted - a @ u
    L = a.shape[-3]
    norms = np.linalg.norm(diff, ord=2, axis=(-2, -1))
    rhs = np.sum(np.exp(log_c[1 : L + 1]) * norms, axis=-1)
    lhs = np.linalg.norm(a[..., 0, :, :], ord=2, axis=(-2, -1))
    return rhs - lhs, lhs


@dataclass(frozen=True, eq=False)
class CriterionResult:
    passed: bool
    worst_slack: float
    witness: list = field(repr=False)
    trials: int


def _criterion_inputs(u, seq, max_len, degree):
    u = DenseOperator(u).entries
    max_len = check_positive_int(max_len, "max_len")
    if max_len > 32:
        raise PreconditionError("max_len must be <= 32")
    if seq.length < max_len:
        raise RangeError(f"sequence has {seq.length} entries, max_len is {max_len}")
    degree = u.shape[0] - 1 if degree is None else check_positive_int(degree, "degree", minimum=0)
    log_c = seq.log_c_at(np.arange(max_len + 1))
    return u, max_len, degree, _power_stack(u, degree), log_c


def _random_coefficients(rng, shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def check_arens_criterion(u, seq, trials=1000, max_len=16, degree=None, seed=0, tol=STAR_TOL):
    """Sample finite sequences ``(a_j)`` of polynomials in ``u`` and evaluate

        slack = sum_{j>=1} c_j ||a_j - a_{j-1} u|| - ||a_0||

    Half the samples are free random sequences, half are perturbed chains
    ``a_j ~ a_0 u^j`` which make the right side small. Sequences are scaled to
    ``||a_0|| = 1``. Returns the minimal slack and its sequence.
    """
    u, max_len, degree, powers, log_c = _criterion_inputs(u, seq, max_len, degree)
    rng = check_random_state(seed)
    trials = check_positive_int(trials, "trials")
    worst, witness = math.inf, None
    batch = 512
    for start in range(0, trials, batch):
        size = min(batch, trials - start)
        L = int(rng.integers(1, max_len + 1))
        coef = _random_coefficients(rng, (size, L, degree + 1))
        coef *= np.exp(rng.uniform(-3, 3, size=(size, L, 1)))
        a = np.einsum("slk,kij->slij", coef, powers)
        chain = np.nonzero(rng.random(size) < 0.5)[0]
        for j in range(1, L):
            # near-chains a_j ~ a_{j-1} u make every difference small
            nudge = rng.uniform(0, 1e-3, size=(chain.size, 1, 1)) * a[chain, j]
            a[chain, j] = a[chain, j - 1] @ u + nudge
        slack, lhs = _slack(a, u, log_c)
        ok = lhs > 0
        slack = np.where(ok, slack / np.where(ok, lhs, 1.0), np.inf)
        i = int(np.argmin(slack))
        if slack[i] < worst:
            worst = float(slack[i])
            witness = list(a[i] / lhs[i])
    if witness is None:
        worst = 0.0
    return CriterionResult(bool(worst >= -tol), worst, witness, trials)


@dataclass(frozen=True, eq=False)
class ViolationResult:
    found: bool
    slack: float
    witness: list = field(repr=False)
    evaluations: int

    @property
    def verdict(self):
        return "violation" if self.found else "inconclusive"


def search_criterion_violation(u, seq, budget=10**4, max_len=8, degree=None, seed=0,
                               restarts=4, tol=STAR_TOL):
    """Coordinate search for a sequence with negative criterion slack.

    Minimises ``slack / ||a_0||`` over the real and imaginary parts of the
    polynomial coefficients of ``a_0..a_{L-1}``, halving the step after an
    unproductive sweep and restarting from fresh random points. Finding
    nothing means "inconclusive", never "pass".
    """
    u, max_len, degree, powers, log_c = _criterion_inputs(u, seq, max_len, degree)
    rng = check_random_state(seed)
    budget = check_positive_int(budget, "budget")
    shape = (max_len, degree + 1)

    def objective(z):
        coef = (z[: z.size // 2] + 1j * z[z.size // 2 :]).reshape(shape)
        slack, lhs = _slack(np.einsum("lk,kij->lij", coef, powers), u, log_c)
        return float(slack / lhs) if lhs > 1e-300 else math.inf

    evals = 0
    best, best_z = math.inf, None
    for r in range(restarts):
        if evals >= budget:
            break
        z = rng.standard_normal(2 * shape[0] * shape[1])
        f = objective(z)
        evals += 1
        step = 1.0
        per_restart = (budget - evals) // (restarts - r)
        stop = evals + per_restart
        while evals < stop and step > 1e-12:
            improved = False
            for i in rng.permutation(z.size):
                for sign in (1.0, -1.0):
                    if evals >= stop:
                        break
                    trial = z.copy()
                    trial[i] += sign * step
                    ft = objective(trial)
                    evals += 1
                    if ft < f:
                        z, f, improved = trial, ft, True
                        break
            if f < -tol:
                break
            if not improved:
                step *= 0.5
        if f < best:
            best, best_z = f, z
        if best < -tol:
            break
    if best_z is None or not best < -tol:
        return ViolationResult(False, best, None, evals)
    coef = (best_z[: best_z.size // 2] + 1j * best_z[best_z.size // 2 :]).reshape(shape)
    a = np.einsum("lk,kij->lij", coef, powers)
    a /= np.linalg.norm(a[0], 2)
    return ViolationResult(True, best, list(a), evals)


# ----------------------------------------------------------------------------
# decomposition bounds


@dataclass(frozen=True)
class DecompositionBound:
    tight_M: float
    M: float
    passed: bool
    p: float
    n: int
    exact: bool
    regularized: bool = False


def _dense_entries(T):
    T = DenseOperator(T) if not isinstance(T, DenseOperator) else T
    if not T.injective:
        raise PreconditionError("decomposition bounds need an injective operator")
    return T.entries


def decomposition_gram(T, seq, n):
    """``G_n = sum_{k<n} c_{n-k}^{-2} T^k T^{k*}``."""
    T = _dense_entries(T)
    log_c = seq.log_c_at(np.arange(n + 1))
    d = T.shape[0]
    G = np.zeros((d, d), dtype=np.complex128)
    Tk = np.eye(d, dtype=np.complex128)
    for k in range(n):
        G += math.exp(-2.0 * log_c[n - k]) * (Tk @ Tk.conj().T)
        Tk = Tk @ T
    return 0.5 * (G + G.conj().T), Tk


def check_decomposition_bound(T, seq, p=2, M=1.0, n=1, samples=200, seed=0):
    """Smallest ``M`` with ``||x||^p <= M^p sum_k c_{n-k}^p ||x_k||^p`` whenever
    ``T^n x = sum_{k<n} T^k x_k``.

    For ``p = 2`` the value is exact: ``M^2 = 1 / lambda_min(T^{n*} G_n^{-1} T^n)``,
    evaluated as ``lambda_max(T^{-n} G_n T^{-n*})``.
    For ``p = 1`` sampled decompositions minimised by IRLS give a lower bound.
    """
    p = check_p(p, allowed={1.0, 2.0})
    n = check_positive_int(n, "n")
    regularized = False
    if p == 2.0:
        # T^{-n} G_n T^{-n*} = sum_{i=1}^n c_i^{-2} T^{-i} T^{-i*}, so the tight
        # M^2 is its largest eigenvalue; this avoids inverting the badly scaled G_n
        Tinv = np.linalg.inv(_dense_entries(T))
        log_c = seq.log_c_at(np.arange(n + 1))
        W = np.eye(Tinv.shape[0], dtype=np.complex128)
        H = np.zeros_like(W)
        for i in range(1, n + 1):
            W = math.exp(log_c[i - 1] - log_c[i]) * (W @ Tinv)
            H += W @ W.conj().T
        lam = float(np.linalg.eigvalsh(0.5 * (H + H.conj().T)).max())
        if not math.isfinite(lam):
            raise NumericalError("decomposition Gram form overflowed")
        tight = math.sqrt(max(lam, 0.0))
        exact = True
    else:
        # T^n x = sum_k T^k x_k is x = sum_{i=1}^n T^{-i} z_i with z_i = x_{n-i};
        # the inverse form keeps the IRLS Gram matrices well scaled
        Tinv = np.linalg.inv(_dense_entries(T))
        d = Tinv.shape[0]
        A = _power_stack(Tinv, n)[1:]
        w = np.exp(seq.log_c_at(np.arange(1, n + 1)))
        H = np.einsum("k,kij,klj->il", np.exp(-2.0 * seq.log_c_at(np.arange(1, n + 1))), A, A.conj())
        rng = check_random_state(seed)
        tight = 0.0
        for k in range(check_positive_int(samples, "samples")):
            if k == 0:
                # the p = 2 maximiser is a natural first candidate
                x = np.linalg.eigh(0.5 * (H + H.conj().T))[1][:, -1]
            else:
                x = _random_coefficients(rng, d)
            x = x / np.linalg.norm(x)
            _, cost = irls_sum_norms(A, w, x)
            tight = max(tight, 1.0 / cost)
        exact = False
    return DecompositionBound(float(tight), float(M), bool(tight <= M * (1 + 1e-9)), p, n,
                              exact, regularized)


@dataclass(frozen=True, eq=False)
class OracleResult:
    worst_ratio: float
    witness: np.ndarray = field(repr=False)
    samples: int


def decomposition_oracle(T, seq, p, m, samples=10**4, seed=0):
    """Worst sampled ``||x||^p / sum_i c_{m-i}^p ||x_i||^p`` over ``T^m x = sum_{i<m} T^i x_i``.

    The ``x_i`` are drawn freely (random magnitudes spread over several
    decades, random supports, including single-term decompositions) and
    ``x = T^{-m} sum_i T^i x_i``. For ``p = inf`` the denominator is
    ``max_i c_{m-i} ||x_i||`` and no power is taken.
    """
    p = check_p(p)
    m = check_positive_int(m, "m")
    T = _dense_entries(T)
    d = T.shape[0]
    rng = check_random_state(seed)
    samples = check_positive_int(samples, "samples")
    X = _random_coefficients(rng, (samples, m, d))
    X *= np.exp(rng.uniform(-6, 6, size=(samples, m, 1)))
    keep = rng.random((samples, m)) < 0.5
    keep[np.arange(samples), rng.integers(0, m, samples)] = True
    single = rng.random(samples) < 0.25
    keep[single] = False
    keep[single, rng.integers(0, m, int(single.sum()))] = True
    X *= keep[..., None]
    powers = _power_stack(T, m)
    y = np.einsum("iab,sib->sa", powers[:m], X)
    x = np.linalg.solve(powers[m], y.T).T
    log_c = seq.log_c_at(m - np.arange(m))
    with np.errstate(divide="ignore"):
        log_xi = np.log(np.linalg.norm(X, axis=2))
        log_x = np.log(np.linalg.norm(x, axis=1))
    terms = log_c[None, :] + log_xi
    if math.isinf(p):
        log_ratio = log_x - np.max(terms, axis=1)
    else:
        log_ratio = p * log_x - logsumexp(p * terms, axis=1)
    i = int(np.argmax(log_ratio))
    return OracleResult(float(np.exp(log_ratio[i])), X[i], samples)
