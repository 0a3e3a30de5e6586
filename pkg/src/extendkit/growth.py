"""Growth-condition certificates: polynomial (P), Beurling (B), sub-exponential (E).

All comparisons happen on ``log v_n = max(log ||T^n||, -log m(T^n))``. A
finite scan can refute a condition but cannot prove one; a pass is reported
as ``"pass"`` only when the operator carries an analytic envelope that
controls the unscanned tail, and as ``"undetermined"`` otherwise.
"""
from dataclasses import asdict, dataclass, field
import math

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import PreconditionError
from .logspace import fsum
from .operators import as_operator, available_range, gelfand_limits, v_sequence
from .validation import check_positive_int

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class GrowthCertificate:
    condition: str
    parameters: dict
    verdict: str
    witness_n: int = None
    worst_margin: float = math.nan
    range: int = 0
    range_ok: bool = True
    proved: bool = False

    @property
    def passed(self):
        return self.verdict != "fail"

    def to_dict(self):
        return asdict(self)


def _log_v(op, max_n):
    op = as_operator(op)
    N = available_range(op, max_n)
    return op, N, v_sequence(op, N)


def _envelope_check(op, logv, env, name, params, tail_proof, tol):
    margin = env - logv
    worst = int(np.argmin(margin))
    range_ok = bool(margin[worst] >= -tol)
    N = logv.size
    if not range_ok:
        return GrowthCertificate(name, params, "fail", witness_n=worst + 1,
                                 worst_margin=float(margin[worst]), range=N, range_ok=False)
    proved = bool(tail_proof(getattr(op, "envelope", None), N))
    return GrowthCertificate(name, params, "pass" if proved else "undetermined",
                             worst_margin=float(margin[worst]), range=N, proved=proved)


def check_P(op, C, s, max_n=None, tol=DEFAULT_TOL):
    """Check ``v_n <= C n^s`` for ``n = 1..max_n``."""
    if C <= 0 or s < 0:
        raise PreconditionError("P(s) needs C > 0 and s >= 0")
    op, N, logv = _log_v(op, max_n)
    n = np.arange(1, N + 1)
    logC = math.log(C)

    def tail(envelope, N):
        if envelope is None or envelope[0] != "P":
            return False
        _, C0, s0 = envelope
        return s >= s0 and logC + (s - s0) * math.log(N + 1) >= math.log(C0) - tol

    return _envelope_check(op, logv, logC + s * np.log(n), "P", {"C": C, "s": s}, tail, tol)


def check_E(op, C, s, max_n=None, tol=DEFAULT_TOL):
    """Check ``v_n <= C exp(n^s)`` for ``n = 1..max_n``, ``0 < s < 1``."""
    if C <= 0 or not 0 < s < 1:
        raise PreconditionError("E(s) needs C > 0 and 0 < s < 1")
    op, N, logv = _log_v(op, max_n)
    n = np.arange(1, N + 1, dtype=np.float64)
    logC = math.log(C)

    def tail(envelope, N):
        if envelope is None:
            return False
        kind, C0, s0 = envelope
        m = N + 1.0
        if kind == "P":
            # f(n) = log C + n^s - log C0 - s0 log n is nondecreasing once s n^s >= s0
            return s * m**s >= s0 and logC + m**s - math.log(C0) - s0 * math.log(m) >= -tol
        if kind == "E":
            return s >= s0 and logC + m**s - math.log(C0) - m**s0 >= -tol
        return False

    return _envelope_check(op, logv, logC + n**s, "E", {"C": C, "s": s}, tail, tol)


@dataclass(frozen=True)
class PowerFit:
    C: float
    s: float
    certificate: GrowthCertificate

    def __iter__(self):
        yield self.C
        yield self.s


def fit_P(op, max_n=None, resolution=1e-4, s_max=16.0):
    """Smallest grid exponent ``s`` whose residual ``log v_n - s log n`` stops growing.

    On a finite range every ``s`` gives a finite supremum, so boundedness is
    read off the last half-window: ``s`` is admissible when the residual on
    ``[N/2, N]`` never exceeds its value at ``N/2``. The predicate is monotone
    in ``s``; a coarse grid brackets it and integer bisection on the
    ``resolution`` grid finds the minimum. ``C = exp(sup_n residual)``.
    If no ``s <= s_max`` is admissible the profile is reported as growing
    faster than any polynomial (``s = C = inf``, verdict undetermined).
    """
    op, N, logv = _log_v(op, max_n)
    if N < 2:
        raise PreconditionError("fit_P needs max_n >= 2")
    logn = np.log(np.arange(1, N + 1, dtype=np.float64))
    start = N // 2
    dv = logv[start - 1 :] - logv[start - 1]
    dn = logn[start - 1 :] - logn[start - 1]

    def admissible(k):
        return bool(np.all(dv - (k * resolution) * dn <= DEFAULT_TOL))

    k_max = int(round(s_max / resolution))
    if not admissible(k_max):
        cert = GrowthCertificate("P", {"C": math.inf, "s": math.inf}, "undetermined", range=N)
        return PowerFit(math.inf, math.inf, cert)
    step = max(1, int(round(0.125 / resolution)))
    hi = 0
    while not admissible(hi):
        hi += step
    lo = max(hi - step, 0)
    if admissible(lo):
        hi = lo
    else:
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if admissible(mid):
                hi = mid
            else:
                lo = mid
    s = hi / round(1 / resolution)
    C = math.exp(float(np.max(logv - s * logn)))
    return PowerFit(C, s, check_P(op, C, s, N))


@dataclass(frozen=True)
class BeurlingSum:
    partial_sum: float
    tail_bracket: tuple
    certificate: GrowthCertificate = field(repr=False)

    def __iter__(self):
        yield self.partial_sum
        yield self.tail_bracket


def _beurling_tail(envelope, logv):
    N = logv.size
    if envelope is not None:
        kind, C0, s0 = envelope
        head = max(math.log(C0), 0.0) / N
        if kind == "P":
            # int_N^inf log(x)/x^2 dx = (log N + 1)/N
            return head + s0 * (math.log(N) + 1.0) / N, True
        if kind == "E" and s0 < 1:
            return head + N ** (s0 - 1.0) / (1.0 - s0), True
    if N < 4:
        return math.inf, False
    upper = float(np.max(logv[N // 2 - 1 :]))
    lower = float(np.max(logv[N // 4 - 1 : N // 2]))
    if upper <= 1e-12:
        return 0.0, False
    if lower <= 1e-12:
        return math.inf, False
    # log v ~ n^gamma on the last octave; the tail of n^(gamma-2) sums iff gamma < 1
    gamma = math.log2(upper / lower)
    if gamma >= 1.0 - 1e-9:
        return math.inf, False
    return upper / (N * (1.0 - max(gamma, 0.0))), False


def beurling_sum(op, max_n=None):
    """Partial sum of ``log v_n / n^2`` with a bracket for the unscanned tail."""
    op, N, logv = _log_v(op, max_n)
    n = np.arange(1, N + 1, dtype=np.float64)
    partial = fsum(logv / (n * n))
    tail, proved = _beurling_tail(getattr(op, "envelope", None), logv)
    bracket = (0.0, tail)
    finite = math.isfinite(tail)
    cert = GrowthCertificate(
        "B",
        {"partial_sum": partial, "tail_bracket": list(bracket)},
        "pass" if finite else "fail",
        witness_n=None if finite else N,
        range=N,
        range_ok=finite,
        proved=proved and finite,
    )
    return BeurlingSum(partial, bracket, cert)


class GrowthAnalyzer(BaseEstimator):
    """Fit the growth constants of an operator model.

    Parameters
    ----------
    max_n : int
        Number of powers scanned.
    resolution : float
        Grid resolution of the fitted polynomial exponent.
    exp_s : float or None
        When set, additionally check ``E(exp_s)`` with the smallest ``C``
        that passes on range.
    """

    def __init__(self, max_n=4096, resolution=1e-4, exp_s=None):
        self.max_n = max_n
        self.resolution = resolution
        self.exp_s = exp_s

    def fit(self, X, y=None):
        op = as_operator(X)
        N = check_positive_int(self.max_n, "max_n", minimum=2)
        if op.max_n is not None:
            N = min(N, op.max_n)
        self.log_v_ = v_sequence(op, N)
        fit = fit_P(op, N, resolution=self.resolution)
        self.C_, self.s_ = fit.C, fit.s
        self.certificate_P_ = fit.certificate
        self.beurling_ = beurling_sum(op, N)
        self.certificate_E_ = None
        if self.exp_s is not None:
            n = np.arange(1, N + 1, dtype=np.float64)
            C = math.exp(float(np.max(self.log_v_ - n**self.exp_s)))
            self.certificate_E_ = check_E(op, C, self.exp_s, N)
        self.gelfand_ = gelfand_limits(op, N) if N >= 8 else None
        self.n_powers_ = N
        return self

    def certificates(self):
        certs = [self.certificate_P_, self.beurling_.certificate]
        if self.certificate_E_ is not None:
            certs.append(self.certificate_E_)
        return certs
