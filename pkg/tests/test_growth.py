import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from extendkit import GrowthAnalyzer, GrowthProfile, WeightedShift, beurling_sum, check_E, check_P, fit_P
from extendkit.exceptions import PreconditionError
from helpers import random_admissible_profile


def exp_profile(fn, N):
    n = np.arange(1, N + 1, dtype=np.float64)
    return GrowthProfile(fn(n), -fn(n))


def test_check_P_examples():
    B = WeightedShift.bergman()
    cert = check_P(B, math.sqrt(2), 0.5, 10**6)
    assert cert.verdict == "pass" and cert.proved
    cert = check_P(B, 1.0, 0.5, 100)
    assert cert.verdict == "fail" and cert.witness_n == 1
    assert check_P(np.eye(2), 1.0, 0.0, 100).verdict == "pass"


def test_unproved_pass_is_undetermined():
    prof = exp_profile(lambda n: 0.5 * np.log(n + 1), 500)
    cert = check_P(prof, math.sqrt(2), 0.5)
    assert cert.verdict == "undetermined" and cert.range_ok and cert.passed


def test_fit_P_examples():
    C, s = fit_P(WeightedShift.bergman(), 4096)
    assert s == pytest.approx(0.5, abs=1e-3) and C == pytest.approx(math.sqrt(2), abs=1e-3)
    fit = fit_P(exp_profile(np.sqrt, 4096))
    assert math.isinf(fit.s) and fit.certificate.verdict == "undetermined"
    fit = fit_P(np.eye(2), 256)
    assert (fit.C, fit.s) == (1.0, 0.0)
    assert fit.certificate.passed


def test_fit_P_result_passes_check(rng):
    for _ in range(5):
        prof = random_admissible_profile(rng, 2048)
        fit = fit_P(prof)
        if math.isfinite(fit.s):
            assert check_P(prof, fit.C, fit.s).passed


def test_beurling_examples():
    assert beurling_sum(np.eye(2), 500).partial_sum == 0.0
    N = 10**5
    total, bracket = beurling_sum(WeightedShift.bergman(), N)
    n = np.arange(1, N + 1, dtype=np.float64)
    oracle = math.fsum((0.5 * np.log(n + 1) / n**2).tolist())
    assert total == pytest.approx(oracle, abs=1e-10)
    assert math.isfinite(bracket[1])
    res = beurling_sum(exp_profile(lambda n: n, 4096))
    assert math.isinf(res.tail_bracket[1]) and res.certificate.verdict == "fail"


def test_beurling_monotone_in_range(rng):
    prof = random_admissible_profile(rng, 4096)
    sums = [beurling_sum(prof, N).partial_sum for N in (10, 100, 1000, 4096)]
    assert sums == sorted(sums)


def test_check_E_examples():
    prof = exp_profile(np.sqrt, 1000)
    assert check_E(prof, 1.0, 0.5).range_ok
    assert check_E(exp_profile(lambda n: n, 1000), 10.0, 0.9).verdict == "fail"


def test_check_E_bergman_small_exponent_fails_on_range():
    # 0.5 log(n+1) <= log sqrt(2) + n^0.1 is false near n = 10^4
    cert = check_E(WeightedShift.bergman(), math.sqrt(2), 0.1, 10**4)
    n = np.arange(1, 10**4 + 1, dtype=np.float64)
    margin = math.log(math.sqrt(2)) + n**0.1 - 0.5 * np.log(n + 1)
    assert cert.verdict == "fail"
    assert cert.witness_n == int(np.argmin(margin)) + 1
    assert np.any(margin < 0)
    # a larger exponent holds everywhere and is proved through the envelope
    assert check_E(WeightedShift.bergman(), math.sqrt(2), 0.5, 10**4).verdict == "pass"


def test_invalid_parameters():
    with pytest.raises(PreconditionError):
        check_P(np.eye(2), 0.0, 1.0, 10)
    with pytest.raises(PreconditionError):
        check_E(np.eye(2), 1.0, 1.5, 10)


def test_analyzer_estimator():
    ga = GrowthAnalyzer(max_n=2048, exp_s=0.5).fit(WeightedShift.bergman())
    assert ga.s_ == pytest.approx(0.5, abs=1e-3)
    assert ga.get_params()["max_n"] == 2048
    assert [c.condition for c in ga.certificates()] == ["P", "B", "E"]
    assert ga.log_v_.shape == (2048,)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 0.95))
def test_P_pass_implies_E_pass(seed, s_exp):
    # v_n <= C n^s  and  s log n <= n^s' + const on the range
    rng = np.random.default_rng(seed)
    prof = random_admissible_profile(rng, 1024)
    fit = fit_P(prof)
    if not math.isfinite(fit.s):
        return
    n = np.arange(1, 1025, dtype=np.float64)
    C_E = fit.C * math.exp(float(np.max(fit.s * np.log(n) - n**s_exp)))
    assert check_E(prof, C_E, s_exp).passed
