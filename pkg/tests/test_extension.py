import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from extendkit import (
    ExtElement,
    MajorantSequence,
    PreconditionError,
    RangeError,
    TruncatedExtension,
    apply_S,
    build_geometric,
    embed,
    ext_norm,
    gram_limit,
    renorm_hilbert,
    sqp_norm_check,
    verify_extension,
)
from helpers import random_invertible

SCALAR = np.array([[2.0]])


def scalar_ext(N, **kw):
    return TruncatedExtension(build_geometric(SCALAR, 96), truncation=N, **kw).fit(SCALAR)


@pytest.mark.parametrize("N", [0, 1, 5, 10, 20])
def test_scalar_closed_form(N):
    ext = scalar_ext(N)
    assert ext_norm(ext, embed(ext, [1.0])) ** 2 == pytest.approx(1 / (2 - 2.0**-N), rel=1e-12)


def test_truncation_zero_is_original_norm(rng):
    T = random_invertible(rng)
    ext = TruncatedExtension(build_geometric(T, 32), truncation=0).fit(T)
    x = rng.standard_normal(T.shape[0])
    assert ext_norm(ext, embed(ext, x)) == pytest.approx(np.linalg.norm(x), rel=1e-12)


def test_random_decompositions_never_undercut(rng):
    T = random_invertible(rng, max_dim=3, min_modulus=0.3)
    d = T.shape[0]
    seq = build_geometric(T, 16)
    ext = TruncatedExtension(seq, truncation=4, lift_budget=0).fit(T)
    Tinv = np.linalg.inv(T)
    y = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    best = ext.stage_norm(y, 4)
    c = np.exp(seq.log_c_at(np.arange(5)))
    pw = [np.linalg.matrix_power(Tinv, i) for i in range(5)]
    for _ in range(3000):
        xs = rng.standard_normal((5, d)) + 1j * rng.standard_normal((5, d))
        xs[0] = y - sum(pw[i] @ xs[i] for i in range(1, 5))
        cost = math.sqrt(sum((c[i] * np.linalg.norm(xs[i])) ** 2 for i in range(5)))
        assert cost >= best * (1 - 1e-12)


def test_stage_norms_nonincreasing(rng):
    T = random_invertible(rng)
    ext = TruncatedExtension(build_geometric(T, 64), truncation=20).fit(T)
    y = rng.standard_normal(T.shape[0])
    vals = [ext.stage_norm(y, m) for m in range(21)]
    assert np.all(np.diff(vals) <= 1e-12 * vals[0])


def test_lift_is_same_class(rng):
    T = random_invertible(rng)
    ext = TruncatedExtension(build_geometric(T, 64), truncation=12).fit(T)
    e = ExtElement(rng.standard_normal(T.shape[0]), 2)
    assert ext_norm(ext, e.lift(T, 3)) == pytest.approx(ext_norm(ext, e), rel=1e-9)


def test_apply_S_identities(rng):
    T = random_invertible(rng)
    ext = TruncatedExtension(build_geometric(T, 64), truncation=8, lift_budget=4).fit(T)
    x = rng.standard_normal(T.shape[0])
    e = embed(ext, x)
    back = apply_S(ext, apply_S(ext, e, -3), 3)
    np.testing.assert_allclose(ext.coordinates(back), x, rtol=1e-12)
    fwd = apply_S(ext, e, 2)
    np.testing.assert_allclose(fwd.x, T @ T @ x, rtol=1e-12)
    with pytest.raises(RangeError):
        apply_S(ext, e, -13)


def test_gram_limit_scalar():
    lim = gram_limit(scalar_ext(20))
    assert lim.converged and lim.loewner_ok
    assert lim.Q[0, 0].real == pytest.approx(0.5, rel=1e-9)
    assert lim.bounded_below


def test_gram_stages_loewner(rng):
    for _ in range(5):
        T = random_invertible(rng)
        ext = TruncatedExtension(build_geometric(T, 128), truncation=40).fit(T)
        Q = ext.Q_
        for m in range(1, 41):
            gap = np.linalg.eigvalsh(0.5 * ((Q[m - 1] - Q[m]) + (Q[m - 1] - Q[m]).conj().T))
            assert gap.min() >= -1e-10 * np.linalg.norm(Q[m - 1], 2)


def test_renorm_scalar():
    ext = scalar_ext(20)
    ren = renorm_hilbert(ext)
    assert ren.report.passed
    assert ren.F[0, 0].real == pytest.approx(1.0, rel=1e-12)


def test_alternative_norm():
    ext = scalar_ext(10, alternative=True)
    # decompositions start at i = 1: R = sum_{1..N} 2^{-i}
    assert ext_norm(ext, embed(ext, [1.0])) ** 2 == pytest.approx(1 / (1 - 2.0**-10), rel=1e-12)
    assert verify_extension(ext, samples=200).passed
    with pytest.raises(PreconditionError):
        TruncatedExtension(build_geometric(SCALAR, 10), truncation=0, alternative=True).fit(SCALAR)


def test_p1_against_brute_force():
    ext = TruncatedExtension(build_geometric(SCALAR, 32), p=1, truncation=6).fit(SCALAR)
    # scalar p = 1: min sum c_i |x_i| subject to sum 2^{-i} x_i = 1 puts all
    # mass on the cheapest index, cost min_i c_i 2^i = 1
    assert ext_norm(ext, embed(ext, [1.0])) == pytest.approx(1.0, rel=1e-6)


def test_p1_not_above_p2_bound(rng):
    T = random_invertible(rng, max_dim=3)
    seq = build_geometric(T, 32)
    e1 = TruncatedExtension(seq, p=1, truncation=5).fit(T)
    e2 = TruncatedExtension(seq, p=2, truncation=5).fit(T)
    y = rng.standard_normal(T.shape[0])
    # ||.||_2 <= ||.||_1 on the cost vector, so the p = 2 infimum is lower
    assert e2.stage_norm(y, 5) <= e1.stage_norm(y, 5) * (1 + 1e-6)
    assert e1.stage_norm(y, 5) <= math.sqrt(6) * e2.stage_norm(y, 5) * (1 + 1e-6)


def test_transform_makes_norm_euclidean(rng):
    T = random_invertible(rng)
    ext = TruncatedExtension(build_geometric(T, 64), truncation=10).fit(T)
    y = rng.standard_normal((4, T.shape[0]))
    Z = ext.transform(y)
    np.testing.assert_allclose(np.linalg.norm(Z, axis=1), ext.stage_norm(y, 10), rtol=1e-10)
    np.testing.assert_allclose(ext.inverse_transform(Z), y, atol=1e-10)


def test_fit_errors():
    with pytest.raises(PreconditionError):
        TruncatedExtension(build_geometric(SCALAR, 10)).fit(np.zeros((2, 2)))
    with pytest.raises(RangeError):
        TruncatedExtension(build_geometric(SCALAR, 10), truncation=20).fit(SCALAR)
    with pytest.raises(PreconditionError):
        TruncatedExtension(build_geometric(SCALAR, 100), p=3).fit(SCALAR)


def test_sqp_exact_for_scalar():
    ext = scalar_ext(20)
    res = sqp_norm_check(ext, 2, 3, trials=200)
    assert res.passed and res.worst_ratio == pytest.approx(1.0, rel=1e-9)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_verify_extension_random(seed):
    rng = np.random.default_rng(seed)
    T = random_invertible(rng)
    ext = TruncatedExtension(build_geometric(T, 64), truncation=16, lift_budget=8).fit(T)
    rep = verify_extension(ext, samples=100, seed=seed, max_power=4)
    assert rep.passed, {k: c.worst_margin for k, c in rep.checks.items() if not c.passed}


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False))
def test_norm_triangle_and_homogeneity(seed, lam):
    rng = np.random.default_rng(seed)
    T = random_invertible(rng)
    ext = TruncatedExtension(build_geometric(T, 64), truncation=12).fit(T)
    d = T.shape[0]
    y1 = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    y2 = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    n = lambda y: ext.stage_norm(y, 12)
    assert n(y1 + y2) <= (n(y1) + n(y2)) * (1 + 1e-12)
    assert n(lam * y1) == pytest.approx(abs(lam) * n(y1), rel=1e-9, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 2.0))
def test_norm_nonincreasing_in_c(seed, bump):
    rng = np.random.default_rng(seed)
    T = random_invertible(rng, max_dim=3)
    seq = build_geometric(T, 32)
    bigger = MajorantSequence.from_log_values(seq.log_c + bump)
    y = rng.standard_normal(T.shape[0])
    a = TruncatedExtension(seq, truncation=8).fit(T).stage_norm(y, 8)
    b = TruncatedExtension(bigger, truncation=8).fit(T).stage_norm(y, 8)
    assert a <= b * (1 + 1e-12)
