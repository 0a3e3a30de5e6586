import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from extendkit import (
    GrowthProfile,
    MajorantSequence,
    RangeError,
    WeightedShift,
    build_geometric,
    build_poly,
    check_arens_criterion,
    check_decomposition_bound,
    check_star,
    decomposition_oracle,
    search_criterion_violation,
    search_ladder,
)
from extendkit.star import decomposition_gram
from helpers import random_invertible

SCALAR = np.array([[2.0]])


def ones(n):
    return MajorantSequence.from_log_values(np.zeros(n))


def test_star_scalar_equality():
    cert = check_star(SCALAR, build_geometric(SCALAR, 40), 2)
    assert cert.passed
    np.testing.assert_allclose(cert.margins, 0.0, atol=1e-12)


def test_star_unitary_examples():
    U = np.eye(2)
    assert check_star(U, ones(30), 1).passed
    cert = check_star(U, ones(30), math.inf)
    assert not cert.passed and cert.first_fail_j == 1
    assert cert.margins[0] == pytest.approx(-math.log(2))


def test_star_margins_by_hand(rng):
    T = random_invertible(rng, max_dim=3)
    seq = build_geometric(T, 12)
    ladder = [0, 2, 5, 9, 12]
    cert = check_star(T, seq, 2, ladder=ladder)
    Tinv = np.linalg.inv(T)
    logm = lambda g: -math.log(np.linalg.norm(np.linalg.matrix_power(Tinv, g), 2))
    for n in range(4):
        lo, hi = ladder[n], ladder[n + 1]
        prod = sum(-logm(ladder[r + 1] - ladder[r]) for r in range(n + 1))
        for j in range(lo + 1, hi + 1):
            rhs = 0.5 * ((n + 1) * math.log(2) + math.log(hi - lo)) + prod
            rhs += math.log(np.linalg.norm(np.linalg.matrix_power(T, hi - j), 2))
            assert cert.margins[j - 1] == pytest.approx(seq.log_c_at(j) - rhs, abs=1e-9)


def test_star_zero_minmod_gives_minus_inf():
    prof = GrowthProfile(np.zeros(8), np.full(8, -np.inf))
    cert = check_star(prof, ones(8), 1)
    assert not cert.passed and cert.worst_margin == -math.inf


def test_star_range_error():
    prof = GrowthProfile(np.zeros(4), np.zeros(4))
    with pytest.raises(RangeError):
        check_star(prof, ones(20), 1, ladder=[0, 10, 20])


def test_search_ladder_examples():
    assert list(search_ladder(SCALAR, build_geometric(SCALAR, 30), 2, 30)) == list(range(31))
    assert search_ladder(np.eye(2), ones(50), math.inf, 50) is None


def test_search_ladder_result_certifies():
    B = WeightedShift.bergman()
    seq = build_poly(B, 0.5, 0.6, max_n=10**4)
    ladder = search_ladder(B, seq, math.inf, 2048)
    assert ladder is not None and ladder[-1] == 2048
    assert check_star(B, seq, math.inf, ladder=ladder, max_j=2048).passed


def test_search_ladder_recovers_from_greedy_dead_end():
    # rungs of width 1 are always admissible here, but the prefactor 2^{n+1}
    # outgrows the polynomial majorant; a long first rung is needed
    seq = build_poly(GrowthProfile(np.zeros(4096), np.zeros(4096)), 0.0, 1.0)
    ladder = search_ladder(GrowthProfile(np.zeros(4096), np.zeros(4096)), seq, math.inf, 4096)
    assert ladder is not None
    assert check_star(GrowthProfile(np.zeros(4096), np.zeros(4096)), seq, math.inf,
                      ladder=ladder, max_j=4096).passed


def test_arens_examples():
    seq = MajorantSequence.from_log_values(-math.log(2) * np.arange(1, 17))
    res = check_arens_criterion(SCALAR, seq, trials=2000)
    assert res.worst_slack >= -1e-9
    # a = (1, 0, ...) has slack exactly 0
    from extendkit.star import _slack
    a = np.zeros((3, 1, 1))
    a[0] = 1.0
    slack, lhs = _slack(a, SCALAR, seq.log_c_at(np.arange(4)))
    assert slack == pytest.approx(0.0, abs=1e-15) and lhs == 1.0
    slack, lhs = _slack(np.zeros((3, 1, 1)), SCALAR, seq.log_c_at(np.arange(4)))
    assert slack == 0.0


def test_violation_search():
    small = MajorantSequence.from_log_values(-math.log(4.0) * np.arange(1, 17))
    res = search_criterion_violation(SCALAR, small, budget=10**4)
    assert res.found and res.slack < 0 and res.verdict == "violation"
    # the witness really violates the inequality
    a = np.array(res.witness)
    c = np.exp(small.log_c_at(np.arange(1, a.shape[0] + 1)))
    shifted = np.concatenate([a[1:], np.zeros_like(a[:1])])
    rhs = sum(ci * np.linalg.norm(d, 2) for ci, d in zip(c, shifted - a @ SCALAR))
    assert rhs < np.linalg.norm(a[0], 2)
    res = search_criterion_violation(np.eye(2), ones(16), budget=2000)
    assert not res.found and res.verdict == "inconclusive"


def test_decomposition_bound_examples():
    res = check_decomposition_bound(SCALAR, build_geometric(SCALAR, 10), 2, 1.0, 3)
    assert res.passed and res.tight_M <= 1
    res = check_decomposition_bound(np.eye(2), ones(10), 2, 1.0, 4)
    assert res.tight_M == pytest.approx(2.0, rel=1e-14) and not res.passed


def test_decomposition_closed_form_matches_gram_route(rng):
    for _ in range(5):
        T = random_invertible(rng, max_dim=3, min_modulus=0.3)
        seq = build_geometric(T, 8)
        for n in (1, 2, 4):
            G, Tn = decomposition_gram(T, seq, n)
            K = Tn.conj().T @ np.linalg.solve(G, Tn)
            oracle = 1 / math.sqrt(np.linalg.eigvalsh(0.5 * (K + K.conj().T)).min())
            assert check_decomposition_bound(T, seq, 2, 1.0, n).tight_M == pytest.approx(oracle, rel=1e-7)


def test_decomposition_sampling_never_beats_closed_form(rng):
    T = random_invertible(rng, max_dim=3, min_modulus=0.3)
    d = T.shape[0]
    seq = build_geometric(T, 8)
    n = 3
    tight = check_decomposition_bound(T, seq, 2, 1.0, n).tight_M
    c = np.exp(seq.log_c_at(n - np.arange(n)))
    powers = [np.linalg.matrix_power(T, k) for k in range(n + 1)]
    worst = 0.0
    for _ in range(2000):
        xs = rng.standard_normal((n, d)) + 1j * rng.standard_normal((n, d))
        x = np.linalg.solve(powers[n], sum(powers[k] @ xs[k] for k in range(n)))
        cost = math.sqrt(sum((c[k] * np.linalg.norm(xs[k])) ** 2 for k in range(n)))
        worst = max(worst, np.linalg.norm(x) / cost)
    assert worst <= tight * (1 + 1e-9)


def test_decomposition_p1_lower_bound(rng):
    seq = ones(10)
    res = check_decomposition_bound(np.eye(2), seq, 1, 1.0, 4, samples=20)
    # p = 1, identity: x = sum x_k and cost sum ||x_k|| >= ||x||, so M = 1
    assert res.tight_M == pytest.approx(1.0, rel=1e-6) and not res.exact


def test_decomposition_oracle_examples():
    seq = build_geometric(SCALAR, 10)
    assert decomposition_oracle(SCALAR, seq, 2, 5, samples=10**4).worst_ratio <= 1 + 1e-9
    # single-term decomposition x_0 = T^m x
    T = np.diag([2.0, 3.0])
    seq = build_geometric(T, 10)
    res = decomposition_oracle(T, seq, 2, 4, samples=4000)
    assert res.worst_ratio <= 1 + 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_margins_monotone_in_p(seed):
    rng = np.random.default_rng(seed)
    T = random_invertible(rng, max_dim=4)
    seq = build_geometric(T, 32)
    m1, m2, m3, mi = (check_star(T, seq, p).margins for p in (1, 2, 3, math.inf))
    assert np.all(m1 >= m2 - 1e-12) and np.all(m2 >= m3 - 1e-12) and np.all(m3 >= mi - 1e-12)
    if check_star(T, seq, math.inf).passed:
        assert check_star(T, seq, 2).passed


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.0, 2.0))
def test_tight_M_nonincreasing_in_c(seed, bump):
    rng = np.random.default_rng(seed)
    T = random_invertible(rng, max_dim=3, min_modulus=0.2)
    seq = build_geometric(T, 8)
    bigger = MajorantSequence.from_log_values(seq.log_c + bump * rng.random(8))
    for n in (1, 3, 6):
        a = check_decomposition_bound(T, seq, 2, 1.0, n).tight_M
        b = check_decomposition_bound(T, bigger, 2, 1.0, n).tight_M
        assert b <= a * (1 + 1e-9)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_star_pass_implies_oracle_bound(seed):
    rng = np.random.default_rng(seed)
    T = random_invertible(rng, max_dim=4)
    seq = build_geometric(T, 8)
    assert check_star(T, seq, 2).passed
    assert decomposition_oracle(T, seq, 2, int(rng.integers(1, 9)), samples=2000, seed=seed).worst_ratio <= 1 + 1e-9


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_necessity_slack_nonnegative(seed):
    rng = np.random.default_rng(seed)
    u = random_invertible(rng, max_dim=3)
    uinv = np.linalg.inv(u)
    log_c = [math.log(np.linalg.norm(np.linalg.matrix_power(uinv, j), 2)) for j in range(1, 9)]
    res = check_arens_criterion(u, MajorantSequence.from_log_values(log_c), trials=500, max_len=8, seed=seed)
    assert res.worst_slack >= -1e-9
