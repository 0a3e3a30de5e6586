"""Finite-truncation model of the invertible extension ``S`` of an injective matrix ``T``.

Elements are classes ``[x, t]`` with ``[x, t] = [T^s x, t + s]``. For an
invertible matrix the class is determined by its coordinate
``y = T^{-t} x`` and a decomposition ``sum_i [x_i, i] = [x, t]`` is exactly
``y = sum_i T^{-i} x_i``. The stage-``m`` norm is therefore

    |[x, t]|_m^p = min { sum_{i<=m} c_i^p ||x_i||^p : sum_{i<=m} T^{-i} x_i = y }

which for ``p = 2`` is ``y* Q_m y`` with ``Q_m = R_m^{-1}``,
``R_m = sum_{i<=m} W_i W_i*`` and ``W_i = c_i^{-1} T^{-i}``. For ``p = 1`` it
is a sum-of-norms problem solved by IRLS.
"""
from dataclasses import dataclass, field
import math

import numpy as np
import scipy.linalg
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import NumericalError, PreconditionError, RangeError
from .majorants import MajorantSequence
from .operators import DenseOperator
from .solvers import irls_sum_norms
from .star import check_decomposition_bound
from .validation import check_p, check_positive_int, check_random_state, check_vector

LOEWNER_TOL = 1e-10
CHECK_TOL = 1e-9
FINITE_DIM_NOTE = "finite-dimensional specialization"


@dataclass(frozen=True, eq=False)
class ExtElement:
    """The class ``[x, t]``; ``decomposition`` optionally lists ``(x_i, i)`` pairs."""

    x: np.ndarray
    t: int = 0
    decomposition: tuple = None

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=np.complex128).reshape(-1))
        object.__setattr__(self, "t", check_positive_int(self.t, "t", minimum=0))

    def lift(self, T, s=1):
        """``[T^s x, t + s]``, the same class."""
        x = self.x
        for _ in range(s):
            x = T @ x
        return ExtElement(x, self.t + s)


def _hermitian(A):
    return 0.5 * (A + A.conj().swapaxes(-1, -2))


def _hermitian_inverse(R):
    w, V = np.linalg.eigh(_hermitian(R))
    if w.min() <= 0:
        raise NumericalError("stage Gram form is not positive definite")
    return _hermitian((V / w) @ V.conj().T)


class TruncatedExtension(TransformerMixin, BaseEstimator):
    """Truncated extension norm of an injective matrix.

    Parameters
    ----------
    sequence : MajorantSequence
        Majorant ``(c_j)``; needs at least ``truncation + lift_budget`` entries.
    p : {1, 2}
    truncation : int
        Default truncation degree ``N``.
    lift_budget : int
        Extra stages kept so that ``S^{-j}`` for ``j <= lift_budget`` can be
        evaluated at truncation ``N + j``.
    alternative : bool
        Use decompositions starting at ``i = 1`` (no trivial term).
    M : float or None
        Decomposition constant; computed when ``None``.

    Attributes
    ----------
    T_, Tinv_ : ndarray
    W_ : ndarray of shape (n_stages, d, d)
    Q_ : ndarray of shape (n_stages, d, d)
        Stage Gram forms (``p = 2`` only).
    M_ : float
        ``max(1, sup_n tight M_n)`` over ``n <= n_stages - 1``.
    """

    def __init__(self, sequence=None, p=2, truncation=64, lift_budget=16, alternative=False, M=None):
        self.sequence = sequence
        self.p = p
        self.truncation = truncation
        self.lift_budget = lift_budget
        self.alternative = alternative
        self.M = M

    def fit(self, X, y=None):
        op = X if isinstance(X, DenseOperator) else DenseOperator(X)
        if not op.injective:
            raise PreconditionError("the extension is built for injective matrices only")
        p = check_p(self.p, allowed={1.0, 2.0})
        N = check_positive_int(self.truncation, "truncation", minimum=0)
        B = check_positive_int(self.lift_budget, "lift_budget", minimum=0)
        if self.alternative and N < 1:
            raise PreconditionError("the alternative norm needs truncation >= 1")
        seq = self.sequence
        if not isinstance(seq, MajorantSequence):
            raise PreconditionError("sequence must be a MajorantSequence")
        stages = N + B + 1
        if seq.length < stages - 1:
            raise RangeError(f"sequence has {seq.length} entries, {stages - 1} are needed")
        T = op.entries
        Tinv = op.inverse_entries
        d = T.shape[0]
        log_c = seq.log_c_at(np.arange(stages))
        W = np.empty((stages, d, d), dtype=np.complex128)
        W[0] = np.eye(d)
        for i in range(1, stages):
            W[i] = math.exp(log_c[i - 1] - log_c[i]) * (W[i - 1] @ Tinv)
        self.T_, self.Tinv_, self.W_, self.log_c_ = T, Tinv, W, log_c
        self.p_, self.n_stages_, self.n_features_in_ = p, stages, d
        self.first_index_ = 1 if self.alternative else 0
        if p == 2.0:
            terms = W @ W.conj().swapaxes(-1, -2)
            R = np.cumsum(terms[self.first_index_ :], axis=0)
            Q = np.array([_hermitian_inverse(r) for r in R])
            if self.alternative:
                Q = np.concatenate([np.full((1, d, d), np.nan), Q])
            self.Q_ = Q
        if self.M is None:
            tight = [check_decomposition_bound(op, seq, p, 1.0, n).tight_M for n in range(1, stages)]
            self.tight_M_ = float(max(tight)) if tight else 1.0
            self.M_ = max(1.0, self.tight_M_)
        else:
            self.tight_M_ = None
            self.M_ = float(self.M)
        return self

    # --- evaluation -------------------------------------------------------

    def coordinates(self, e):
        """``T^{-t} x`` for ``e = [x, t]``."""
        check_is_fitted(self, "W_")
        y = check_vector(e.x, self.n_features_in_)
        for _ in range(e.t):
            y = np.linalg.solve(self.T_, y)
        return y

    def stage_norm(self, y, m):
        """Stage-``m`` norm of the element with coordinate(s) ``y`` (rows)."""
        check_is_fitted(self, "W_")
        m = check_positive_int(m, "m", minimum=self.first_index_)
        if m >= self.n_stages_:
            raise RangeError(f"stage {m} exceeds the built range {self.n_stages_ - 1}")
        y = np.asarray(y, dtype=np.complex128)
        single = y.ndim == 1
        Y = y.reshape(1, -1) if single else y
        if self.p_ == 2.0:
            q = np.einsum("si,ij,sj->s", Y.conj(), self.Q_[m], Y).real
            out = np.sqrt(np.maximum(q, 0.0))
        else:
            A = self.W_[self.first_index_ : m + 1]
            w = np.ones(A.shape[0])
            out = np.array([0.0 if not np.any(row) else irls_sum_norms(A, w, row)[1] for row in Y])
        return float(out[0]) if single else out

    def transform(self, X):
        """Coordinates in which the truncation-``N`` norm is Euclidean (``p = 2``)."""
        check_is_fitted(self, "Q_")
        X = np.asarray(X, dtype=np.complex128)
        L = np.linalg.cholesky(self.Q_[self.truncation])
        return X @ L.conj()

    def inverse_transform(self, X):
        check_is_fitted(self, "Q_")
        L = np.linalg.cholesky(self.Q_[self.truncation])
        return np.linalg.solve(L.conj().T, np.asarray(X, dtype=np.complex128).T).T


def ext_norm(ext, e, truncation=None):
    """Extension norm of ``e`` at the given truncation (default ``ext.truncation``).

    Stage values are nonincreasing in the stage, so the minimum over lifts
    ``m = t..N`` is the stage-``N`` value.
    """
    N = ext.truncation if truncation is None else truncation
    if e.t > N:
        raise RangeError(f"element [x, {e.t}] needs truncation >= {e.t}")
    return ext.stage_norm(ext.coordinates(e), N)


def embed(ext, x):
    """``pi(x) = [x, 0]``."""
    return ExtElement(check_vector(x, ext.n_features_in_), 0)


def apply_S(ext, e, j):
    """``S^j [x, t] = [x, t - j]``, realised as ``[T^{j-t} x, 0]`` when ``j > t``."""
    j = int(j)
    if j >= 0:
        if j <= e.t:
            return ExtElement(e.x, e.t - j)
        x = e.x
        for _ in range(j - e.t):
            x = ext.T_ @ x
        return ExtElement(x, 0)
    t = e.t - j
    if t > ext.truncation + ext.lift_budget:
        raise RangeError(f"S^{j} lifts past the budget {ext.truncation + ext.lift_budget}")
    return ExtElement(e.x, t)


@dataclass(frozen=True, eq=False)
class GramLimit:
    Q: np.ndarray
    stages: int
    converged: bool
    loewner_ok: bool
    min_eigenvalue: float
    lower_bound: float
    note: str = FINITE_DIM_NOTE

    @property
    def bounded_below(self):
        return self.min_eigenvalue >= self.lower_bound - LOEWNER_TOL


def gram_limit(ext, tol=1e-10, max_stage=200):
    """Iterate Gram stages until the relative Frobenius change drops below ``tol``."""
    if ext.p_ != 2.0:
        raise PreconditionError("gram_limit needs p = 2")
    seq_len = ext.sequence.length
    top = min(max_stage, seq_len)
    d = ext.n_features_in_
    W = np.eye(d, dtype=np.complex128)
    R = np.zeros((d, d), dtype=np.complex128) if ext.first_index_ else np.eye(d, dtype=np.complex128)
    log_c = ext.sequence.log_c_at(np.arange(top + 1))
    Q_prev = None if ext.first_index_ else np.eye(d, dtype=np.complex128)
    loewner_ok, converged, m = True, False, 0
    for m in range(1, top + 1):
        W = math.exp(log_c[m - 1] - log_c[m]) * (W @ ext.Tinv_)
        R = R + W @ W.conj().T
        Q = _hermitian_inverse(R)
        if Q_prev is not None:
            gap = np.linalg.eigvalsh(_hermitian(Q_prev - Q))
            scale = max(np.linalg.norm(Q_prev, 2), 1e-300)
            loewner_ok &= bool(gap.min() >= -LOEWNER_TOL * scale)
            if np.linalg.norm(Q - Q_prev) <= tol * np.linalg.norm(Q):
                converged = True
                Q_prev = Q
                break
        Q_prev = Q
    factor = 1.0 if ext.first_index_ else 2.0
    lower = 1.0 / (factor * ext.M_**2)
    return GramLimit(Q_prev, m, converged, loewner_ok, float(np.linalg.eigvalsh(Q_prev).min()), lower)


def _op_norm_in_form(A, Q):
    """Operator norm of ``A`` on ``C^d`` with the norm ``sqrt(y* Q y)``."""
    L = np.linalg.cholesky(_hermitian(Q))
    return float(np.linalg.norm(L.conj().T @ A @ np.linalg.inv(L.conj().T), 2))


@dataclass
class CheckResult:
    worst_margin: float
    passed: bool
    samples: int
    witness: object = None


@dataclass
class ExtensionReport:
    checks: dict = field(default_factory=dict)
    note: str = FINITE_DIM_NOTE

    @property
    def passed(self):
        return all(c.passed for c in self.checks.values())

    def add(self, name, margins, witnesses=None):
        margins = np.atleast_1d(np.asarray(margins, dtype=np.float64))
        i = int(np.argmin(margins)) if margins.size else 0
        worst = float(margins[i]) if margins.size else math.inf
        wit = None
        if witnesses is not None and margins.size and worst < -CHECK_TOL:
            wit = witnesses[i]
        self.checks[name] = CheckResult(worst, bool(worst >= -CHECK_TOL), int(margins.size), wit)

    def to_dict(self):
        out = {"note": self.note, "passed": self.passed, "checks": {}}
        for name, c in self.checks.items():
            wit = c.witness
            if isinstance(wit, np.ndarray):
                wit = {"re": wit.real.tolist(), "im": wit.imag.tolist()}
            out["checks"][name] = {"worst_margin": c.worst_margin, "passed": c.passed,
                                   "samples": c.samples, "witness": wit}
        return out


def _log_margin(rhs, lhs):
    """``log rhs - log lhs`` with ``0 <= 0`` counted as margin 0."""
    rhs = np.asarray(rhs, dtype=np.float64)
    lhs = np.asarray(lhs, dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.log(rhs) - np.log(lhs)
    m = np.where((lhs <= 0), np.inf, m)
    return np.where((lhs <= 1e-300) & (rhs <= 1e-300), 0.0, m)


def _random_vectors(rng, n, d):
    v = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
    return v * np.exp(rng.uniform(-3, 3, size=(n, 1)))


def verify_extension(ext, samples=1000, seed=0, max_power=8, max_tuple=16):
    """Sample-check the norm bounds of the truncated extension.

    Margins are ``log(rhs) - log(lhs)``; a check passes when every margin is
    ``>= -1e-9``.
    """
    rng = check_random_state(seed)
    samples = check_positive_int(samples, "samples")
    if ext.p_ == 1.0:
        samples = min(samples, 64)
    p, N, d = ext.p_, ext.truncation, ext.n_features_in_
    T, Tinv = ext.T_, ext.Tinv_
    report = ExtensionReport()
    J = min(max_power, ext.lift_budget)
    Y = _random_vectors(rng, samples, d)
    base = ext.stage_norm(Y, N)

    inv_m, fwd_m = [], []
    Tj = np.eye(d, dtype=np.complex128)
    Tmj = np.eye(d, dtype=np.complex128)
    for j in range(1, J + 1):
        Tj, Tmj = Tj @ T, Tmj @ Tinv
        log_cj = float(ext.log_c_[j])
        inv_m.append(log_cj + np.log(base) - np.log(ext.stage_norm(Y @ Tmj.T, N + j)))
        nrm = np.linalg.norm(Tj, 2)
        fwd_m.append(_log_margin(nrm * base, ext.stage_norm(Y @ Tj.T, N)))
    report.add("inverse_powers", np.concatenate(inv_m) if inv_m else [])
    report.add("forward_powers", np.concatenate(fwd_m) if fwd_m else [])

    if p == 2.0:
        lim = gram_limit(ext)
        Qi = lim.Q
        exact_inv, exact_fwd = [], []
        Tj = np.eye(d, dtype=np.complex128)
        Tmj = np.eye(d, dtype=np.complex128)
        for j in range(1, J + 1):
            Tj, Tmj = Tj @ T, Tmj @ Tinv
            exact_inv.append(float(ext.log_c_[j]) - math.log(_op_norm_in_form(Tmj, Qi)))
            exact_fwd.append(math.log(np.linalg.norm(Tj, 2)) - math.log(_op_norm_in_form(Tj, Qi)))
        report.add("inverse_powers_limit", exact_inv)
        report.add("forward_powers_limit", exact_fwd)
        report.add("gram_monotone", [0.0 if lim.loewner_ok else -1.0])

    # nearness: |sum_{j=1}^n S^{-j} pi(y_j)| <= (sum c_j^p ||y_j||^p)^{1/p}
    n_max = max(1, min(max_tuple, N))
    near = []
    for _ in range(samples):
        n = int(rng.integers(1, n_max + 1))
        ys = _random_vectors(rng, n, d)
        ys[rng.random(n) < 0.3] = 0.0
        coord = np.zeros(d, dtype=np.complex128)
        Tmj = np.eye(d, dtype=np.complex128)
        for j in range(n):
            Tmj = Tmj @ Tinv
            coord += Tmj @ ys[j]
        log_terms = ext.log_c_[1 : n + 1] + np.log(np.maximum(np.linalg.norm(ys, axis=1), 1e-300))
        rhs = math.exp(np.logaddexp.reduce(p * log_terms) / p) if np.any(ys) else 0.0
        near.append(float(_log_margin(rhs, ext.stage_norm(coord, N))))
    report.add("nearness", near)

    # embedding sandwich
    nx = np.linalg.norm(Y, axis=1)
    if ext.first_index_:
        lo_factor = ext.M_
        hi = math.exp(ext.log_c_[1]) * np.linalg.norm(T, 2) * nx
    else:
        lo_factor = ext.M_ * 2.0 ** ((p - 1.0) / p)
        hi = nx
    emb = np.concatenate([_log_margin(base, nx / lo_factor), _log_margin(hi, base)])
    report.add("embedding", emb)

    # triangle inequality and homogeneity
    Z = _random_vectors(rng, samples, d)
    lam = rng.standard_normal(samples) + 1j * rng.standard_normal(samples)
    nz = ext.stage_norm(Z, N)
    tri = _log_margin(base + nz, ext.stage_norm(Y + Z, N))
    hom = -np.abs(np.log(ext.stage_norm(lam[:, None] * Y, N)) - np.log(np.abs(lam) * base)) + 1e-8
    report.add("triangle", tri)
    report.add("homogeneity", hom)

    # well-definedness: [x, t] and [T x, t + 1] agree
    t = rng.integers(0, 4, size=samples)
    wd = []
    for k in range(samples):
        e = ExtElement(Y[k], int(t[k]))
        a = ext_norm(ext, e)
        b = ext_norm(ext, e.lift(T))
        wd.append(1e-8 - abs(a - b) / max(a, 1e-300))
    report.add("well_defined", wd)
    return report


@dataclass(frozen=True, eq=False)
class RenormedExtension:
    F: np.ndarray
    Q: np.ndarray
    report: ExtensionReport


def renorm_hilbert(ext, Q=None, basis=None, samples=1000, seed=0):
    """Renorm so that the embedding becomes isometric on ``pi(X)``.

    With ``P`` the ``Q``-orthogonal projection onto ``span(basis)`` the new
    form is ``|||u|||^2 = ||pi^{-1} P u||^2 + ||(I - P) u||_Q^2``. For
    invertible ``T`` the default basis is the identity, i.e. ``pi(X)`` is the
    whole space.
    """
    if ext.p_ != 2.0:
        raise PreconditionError("renorm_hilbert needs p = 2")
    Q = gram_limit(ext).Q if Q is None else _hermitian(np.asarray(Q, dtype=np.complex128))
    d = ext.n_features_in_
    if np.linalg.eigvalsh(Q).min() <= 0:
        raise NumericalError("Q is not positive definite")
    E = np.eye(d, dtype=np.complex128) if basis is None else np.asarray(basis, dtype=np.complex128)
    coef = np.linalg.solve(E.conj().T @ Q @ E, E.conj().T @ Q)
    P = E @ coef
    rest = np.eye(d) - P
    F = _hermitian(coef.conj().T @ coef + rest.conj().T @ Q @ rest)
    rng = check_random_state(seed)
    report = ExtensionReport()
    iso = E.conj().T @ F @ E
    report.add("isometry", [1e-9 - float(np.abs(iso - np.eye(E.shape[1])).max())])
    gen = scipy.linalg.eigh(F, Q, eigvals_only=True)
    kappa = float(gen.max())
    report.add("sandwich_lower", [float(gen.min()) - 1.0 + 1e-9])
    report.add("sandwich_upper", [2.0 * ext.M_**2 - kappa + 1e-9])
    log_m = -math.log(np.linalg.norm(ext.Tinv_, 2))
    s_inv = _op_norm_in_form(ext.Tinv_, F)
    bound = math.sqrt(kappa) * _op_norm_in_form(ext.Tinv_, Q)
    if ext.sequence.recipe == "geometric":
        bound = min(bound, 2.0 * math.exp(-log_m))
    report.add("inverse_norm", [math.log(bound) - math.log(s_inv)])
    near = []
    N = ext.truncation
    L = np.linalg.cholesky(F)
    for _ in range(check_positive_int(samples, "samples")):
        n = int(rng.integers(1, min(16, N) + 1))
        xs = _random_vectors(rng, n + 1, d)
        coord = np.zeros(d, dtype=np.complex128)
        Tmj = np.eye(d, dtype=np.complex128)
        for j in range(n + 1):
            coord += Tmj @ xs[j]
            Tmj = Tmj @ ext.Tinv_
        lhs = float(np.linalg.norm(L.conj().T @ coord)) ** 2
        rhs = max(kappa, 2.0) * float(np.sum(np.exp(2 * ext.log_c_[: n + 1]) * np.linalg.norm(xs, axis=1) ** 2))
        near.append(float(_log_margin(rhs, lhs)))
    report.add("nearness_renormed", near)
    return RenormedExtension(F, Q, report)


@dataclass(frozen=True)
class SQpResult:
    worst_ratio: float
    passed: bool
    trials: int
    method: str


def _matrix_p_norm(a, G, p):
    """``sup (sum_i |sum_j a_ij y_j|^p)^{1/p} / (sum_j |y_j|^p)^{1/p}`` in the form ``G``."""
    n = a.shape[0]
    if p == 2.0:
        num = np.kron(a.conj().T @ a, G)
        den = np.kron(np.eye(n), G)
        return math.sqrt(max(float(scipy.linalg.eigh(_hermitian(num), _hermitian(den), eigvals_only=True).max()), 0.0))
    # p = 1: a convex homogeneous function peaks at extreme points of the unit
    # ball, i.e. tuples with a single nonzero entry
    return float(np.abs(a).sum(axis=0).max())


def sqp_norm_check(ext, p=2, n_mat=3, trials=1000, seed=0, tol=1e-6):
    """Compare ``||a||_{p,Y}`` on the truncated extension with ``||a||_{p,X}``.

    For ``p = 2`` both suprema are generalised Hermitian eigenvalue problems
    and are solved exactly; for ``p = 1`` the supremum sits at a single-entry
    tuple.
    """
    p = check_p(p, allowed={1.0, 2.0})
    n_mat = check_positive_int(n_mat, "n_mat")
    if n_mat > 6:
        raise PreconditionError("n_mat must be <= 6")
    rng = check_random_state(seed)
    d = ext.n_features_in_
    G_y = ext.Q_[ext.truncation] if ext.p_ == 2.0 else None
    G_x = np.eye(d)
    worst = 0.0
    for k in range(check_positive_int(trials, "trials")):
        if k == 0:
            a = np.eye(n_mat, dtype=np.complex128)
        elif k == 1:
            a = np.eye(n_mat, dtype=np.complex128)[rng.permutation(n_mat)]
        else:
            a = rng.standard_normal((n_mat, n_mat)) + 1j * rng.standard_normal((n_mat, n_mat))
        nx = _matrix_p_norm(a, G_x, p)
        a = a / nx
        ny = _matrix_p_norm(a, G_y if G_y is not None else G_x, p)
        worst = max(worst, ny)
    return SQpResult(worst, bool(worst <= 1 + tol), trials, "exact")
