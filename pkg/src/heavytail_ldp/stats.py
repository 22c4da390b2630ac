"""Small statistical helpers shared by the estimators and the tests."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps


@dataclass(frozen=True)
class Estimate:
    """Point estimate with standard error and a method tag."""

    value: float
    stderr: float
    method: str = ""

    def ci(self, level: float = 0.95):
        q = sps.norm.ppf(0.5 + level / 2)
        return (self.value - q * self.stderr, self.value + q * self.stderr)

    def to_dict(self) -> dict:
        lo, hi = self.ci()
        return {"value": self.value, "stderr": self.stderr, "ci95": [lo, hi], "method": self.method}


def mean_se(x) -> Estimate:
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return Estimate(float(x.mean()) if x.size else math.nan, math.inf)
    return Estimate(float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size)))


def proportion(hits: int, n: int, method: str = "binomial") -> Estimate:
    """Hit fraction with a standard error that stays positive at 0 or n hits.

    The error uses the add-one smoothed fraction ``(hits + 1) / (n + 2)`` so
    that an all-hit or no-hit sample still reports its sampling uncertainty.
    """
    p = hits / n
    q = (hits + 1.0) / (n + 2.0)
    return Estimate(p, math.sqrt(q * (1.0 - q) / n), method)


def batch_means(x, n_batches: int = 50) -> Estimate:
    """Mean with a batch-means standard error for autocorrelated series."""
    x = np.asarray(x, dtype=float)
    size = x.size // n_batches
    if size < 1:
        raise ValueError("series shorter than the number of batches")
    b = x[: size * n_batches].reshape(n_batches, size).mean(axis=1)
    return Estimate(float(x.mean()), float(b.std(ddof=1) / math.sqrt(n_batches)), "batch-means")


def hill(x, k: int) -> float:
    """Hill estimate of the tail index from the ``k`` largest positive values."""
    x = np.asarray(x, dtype=float)
    x = x[x > 0]
    if k < 1 or k >= x.size:
        raise ValueError("need 1 <= k < number of positive samples")
    top = np.partition(x, x.size - k - 1)[x.size - k - 1 :]
    top.sort()
    thresh = top[0]
    return float(1.0 / np.mean(np.log(top[1:] / thresh)))


@dataclass(frozen=True)
class PowerFit:
    slope: float
    slope_se: float
    intercept: float
    r2: float


def fit_power_law(x, y, y_se=None) -> PowerFit:
    """Weighted least squares of ``log y`` on ``log x``.

    With ``y_se`` the weights are ``(y / y_se)^2`` (delta method); zero or
    negative ``y`` entries are dropped.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = y > 0
    lx, ly = np.log(x[keep]), np.log(y[keep])
    if lx.size < 2:
        return PowerFit(math.nan, math.inf, math.nan, 0.0)
    if y_se is None:
        w = np.ones_like(lx)
    else:
        rel = np.asarray(y_se, dtype=float)[keep] / y[keep]
        w = 1.0 / np.maximum(rel, 1e-12) ** 2
    X = np.column_stack([np.ones_like(lx), lx])
    W = np.diag(w)
    cov = np.linalg.pinv(X.T @ W @ X)
    beta = cov @ X.T @ W @ ly
    resid = ly - X @ beta
    dof = max(lx.size - 2, 1)
    if y_se is None:
        s2 = float(resid @ resid) / dof
        se = math.sqrt(s2 * cov[1, 1])
    else:
        # inflate by the reduced chi-square when the fit is worse than the errors claim
        chi2 = float(resid @ W @ resid) / dof
        se = math.sqrt(cov[1, 1] * max(1.0, chi2))
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    r2 = 1.0 - float(resid @ resid) / ss_tot if ss_tot > 0 else 1.0
    return PowerFit(float(beta[1]), se, float(beta[0]), r2)


def agree(a: Estimate, b: Estimate, k: float = 3.0) -> bool:
    """``|a - b|`` within ``k`` combined standard errors."""
    return abs(a.value - b.value) <= k * math.hypot(a.stderr, b.stderr)
