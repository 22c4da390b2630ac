"""Independent reference computations used as test oracles.

Nothing here imports the package: every value is derived from closed forms
or a separate brute-force computation.
"""

import math

import numpy as np
from scipy import integrate, optimize


def kesten_index_discrete(atoms) -> float:
    """Positive root of ``sum p a^s = 1`` by bracketing on a log-moment."""
    a = np.array([x[0] for x in atoms], float)
    p = np.array([x[2] for x in atoms], float)
    f = lambda s: math.log(float(np.sum(p * a**s)))
    return optimize.brentq(f, 1e-6, 50.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def kesten_index_lognormal(mu: float, sigma: float) -> float:
    return -2.0 * mu / sigma**2


def one_jump_terminal(b: float, alpha: float) -> float:
    """Measure of ``{x >= b}`` under ``alpha x^(-alpha-1) dx``."""
    return b ** (-alpha)


def barrier_closed_form() -> float:
    """Zero-drift barrier limit measure at ``alpha = 2`` and unit levels."""
    return 3.0 * math.log(2.0) - 2.0


def barrier_integral(alpha: float, a_plus: float, a_minus: float) -> float:
    """Direct double integral: the down-jump comes first with probability 1/2,
    its size ``y >= a_minus`` and the up-jump ``x >= a_plus + y``."""
    inner = lambda y: (a_plus + y) ** (-alpha) * alpha * y ** (-alpha - 1)
    val, _ = integrate.quad(inner, a_minus, np.inf, epsabs=1e-14, epsrel=1e-13)
    return 0.5 * val


def longest_oscillation_chain(values, delta: float, signed: bool) -> int:
    """Brute force over all subsequences of a short value list."""
    n = len(values)
    best = 0

    def extend(last, last_sign, count, start):
        nonlocal best
        best = max(best, count)
        for j in range(start, n):
            d = values[j] - values[last]
            if abs(d) > delta:
                s = 1 if d > 0 else -1
                if signed and last_sign is not None and s == last_sign:
                    continue
                extend(j, s, count + 1, j + 1)

    for i in range(n):
        extend(i, None, 0, i + 1)
    return best


def step_sup_distance(times_a, sizes_a, times_b, sizes_b, grid: int = 20001) -> float:
    """Uniform distance between two pure-jump paths on a fine grid."""
    t = np.linspace(0.0, 1.0, grid)
    fa = sum(s * (t >= u) for u, s in zip(times_a, sizes_a)) if len(times_a) else 0 * t
    fb = sum(s * (t >= u) for u, s in zip(times_b, sizes_b)) if len(times_b) else 0 * t
    return float(np.max(np.abs(fa - fb)))


def perpetuity_tail_product(p0: float, mu: float, sigma: float, u: float, n: int = 2_000_000, seed: int = 0):
    """Fraction of samples with ``R > u`` for ``R = sum_k prod_{j<k} A_j``, where ``A``
    is zero with probability ``p0`` and lognormal otherwise (plain numpy)."""
    rng = np.random.default_rng(seed)
    total = np.ones(n)
    prod = np.ones(n)
    active = np.ones(n, bool)
    while active.any():
        idx = np.flatnonzero(active)
        a = np.where(rng.random(idx.size) < p0, 0.0, np.exp(mu + sigma * rng.standard_normal(idx.size)))
        prod[idx] *= a
        total[idx] += prod[idx]
        active[idx] = prod[idx] > 1e-14
    return float((total > u).mean())
