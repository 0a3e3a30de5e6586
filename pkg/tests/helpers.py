"""Shared generators and independent oracles for the test suite."""
import math

import numpy as np

from extendkit import GrowthProfile


def random_invertible(rng, max_dim=5, min_modulus=None):
    """Complex Gaussian matrix; redrawn until m(T) exceeds ``min_modulus``."""
    while True:
        d = int(rng.integers(1, max_dim + 1))
        A = (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / math.sqrt(2)
        smin = np.linalg.svd(A, compute_uv=False)[-1]
        if smin > (min_modulus if min_modulus is not None else 1e-3):
            return A


def random_admissible_profile(rng, length):
    """Profile with concave nondecreasing ``log ||T^n||`` and ``-log m(T^n)``.

    Concave functions vanishing at 0 are subadditive, so ``v_n`` is
    submultiplicative; the sub-linear terms keep the Beurling sum finite.
    """
    n = np.arange(1, length + 1, dtype=np.float64)

    def concave():
        a, tau = rng.uniform(0, 3), rng.uniform(1, 50)
        b, gamma = rng.uniform(0, 1), rng.uniform(0.1, 0.8)
        return a * np.log1p(n / tau) + b * n**gamma

    return GrowthProfile(concave(), -concave())


def dyadic_sum_sides(log_v, N):
    """Both sides of ``(1/8) sum_{n=2}^N log r_n / 2^n <= sum_{j<=2^N} log v_j / j^2``."""
    n = np.arange(2, N + 1)
    log_r = log_v[(1 << n) - 1]
    lhs = math.fsum((log_r / 2.0**n).tolist()) / 8.0
    j = np.arange(1, (1 << N) + 1, dtype=np.float64)
    rhs = math.fsum((log_v[: 1 << N] / (j * j)).tolist())
    return lhs, rhs


def scaffold_sum_sides(scaffold, N):
    """Both sides of ``sum_{n=2}^N log c_n / n^2 <= 8 sum_{i<=ceil(log2 N)+1} log r_i / 2^i``."""
    n = np.arange(2, N + 1, dtype=np.float64)
    lhs = math.fsum((scaffold.log_cmax[1:N] / (n * n)).tolist())
    top = math.ceil(math.log2(N)) + 1
    i = np.arange(top + 1)
    rhs = 8.0 * math.fsum((scaffold.log_r[: top + 1] / 2.0**i).tolist())
    return lhs, rhs


def brute_binary_log_b(log_r, n):
    """``log b_n`` from the binary digits of ``n`` with a Python loop."""
    total, i = 0.0, 0
    while n:
        if n & 1:
            total += log_r[i]
        n >>= 1
        i += 1
    return total
