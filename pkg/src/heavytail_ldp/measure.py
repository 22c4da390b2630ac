"""Kesten index, exponential tilting and the tail constants of cycle areas.

Notation used in the docstrings: ``S_n`` is the log-product of the first
``n`` multipliers, ``Z = X_0 + sum_k B_k exp(-S_k)`` the limit of the
discrepancy under the tilted law, and a *cycle* runs from a regeneration
to the next one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import _kernels as K
from .errors import BudgetTooSmall, ConfigError, EscapeAmbiguous, NoAlphaRoot
from .model import Model
from .regen import MinorizationParams, _require_certified, sample_cycles
from .rng import concat_blocks, run_blocks, stream
from .stats import Estimate, agree, fit_power_law, proportion

# ---------------------------------------------------------------- alpha


@dataclass(frozen=True)
class AlphaCalibration:
    alpha: float
    residual: float
    method: str
    bracket: tuple
    trace: tuple = ()

    @property
    def exceeds_one(self) -> bool:
        return self.alpha > 1.0


def solve_alpha(model: Model, tol: float = 1e-14) -> AlphaCalibration:
    """Positive root of ``E A^s = 1``.

    Brackets the root by doubling ``s`` (up to 64) and refines with Brent's
    method on the convex function ``log E A^s``.

    Raises
    ------
    NoAlphaRoot
        When ``E A^s <= 1`` for every ``s <= 64``.
    """
    kappa = model.log_moment_a
    trace = []
    hi = 0.5
    while True:
        v = kappa(hi)
        trace.append((hi, v))
        if v > 0:
            break
        if hi >= 64:
            raise NoAlphaRoot("E A^s stays below 1 for all s <= 64")
        hi = min(2 * hi, 64.0)
    lo = 0.0
    for s, v in trace:
        if v < 0 and s < hi:
            lo = max(lo, s)
    if lo == 0.0:
        lo = hi / 2
        while kappa(lo) >= 0:
            lo /= 2
            if lo < 1e-12:
                raise NoAlphaRoot("cannot find a point with E A^s < 1")
    root = optimize.brentq(kappa, lo, hi, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=500)
    return AlphaCalibration(float(root), model.moment_a(root) - 1.0, "exact-moments", (lo, hi), tuple(trace))


# ---------------------------------------------------------------- tilting


@dataclass(frozen=True)
class TiltedModel:
    """The law of ``(A, B)`` reweighted by ``A^alpha``.

    ``normalization`` is ``E A^alpha`` under the base law; it equals 1 at
    the Kesten index.
    """

    base: Model
    alpha: float
    model: Model
    normalization: float

    def inverse_tilt_check(self, g, m: int = 100_000, seed: int = 0) -> tuple[Estimate, Estimate]:
        """``E g(A, B)`` directly and as ``E^alpha[g A^-alpha] * normalization``."""
        kb = self.base.pack
        kt = self.model.pack
        a0, b0 = K.innovations(stream(seed, "tilt-check", 0), m, *kb)
        a1, b1 = K.innovations(stream(seed, "tilt-check", 1), m, *kt)
        direct = g(a0, b0)
        back = g(a1, b1) * a1 ** (-self.alpha) * self.normalization
        return (
            Estimate(float(direct.mean()), float(direct.std(ddof=1) / math.sqrt(m))),
            Estimate(float(back.mean()), float(back.std(ddof=1) / math.sqrt(m))),
        )


def tilt(model: Model, alpha: float) -> TiltedModel:
    """Exponential tilt of ``log A`` by ``alpha``; the zero atom gets weight 0."""
    if alpha < 0:
        raise ConfigError("alpha must be >= 0")
    return TiltedModel(model, float(alpha), model.tilted(alpha), model.moment_a(alpha))


# ---------------------------------------------------------------- C_infinity


@dataclass
class CInfinityReport:
    goldie: Estimate
    regression: Estimate
    agree: bool
    no_heavy_tail: bool
    truncated: int
    u_grid: list = field(default_factory=list)


def perpetuity_samples(model: Model, m: int, *, tol: float = 1e-12, seed: int = 0, workers: int = 1,
                       max_terms: int = 10**7):
    """Samples of ``R = sum_{k>=0} exp(S_k)`` with an independent multiplier each."""
    kind, da, db, dc, par = model.pack

    def block(g, cnt):
        r, a, tr = K.perpetuity(g, cnt, tol, max_terms, kind, da, db, dc, par)
        return r, a, np.array([tr])

    r, a, tr = concat_blocks(run_blocks(block, seed, "perpetuity", m, workers=workers))
    return r, a, int(tr.sum())


def estimate_C_infinity(model: Model, alpha: float, n_samples: int = 1_000_000, *, tol: float = 1e-12,
                        seed: int = 0, workers: int = 1, u_grid=None) -> CInfinityReport:
    """Tail constant of the perpetuity ``sum_k exp(S_k)``.

    The primary estimate uses the implicit renewal identity for
    ``R = 1 + A R'``::

        C = E[(1 + A R')^alpha - (A R')^alpha] / (alpha E[A^alpha log A]).

    The cross-check averages ``u^alpha P(R > u)`` over a log-uniform grid of
    whole octaves in the upper tail, which also averages out log-periodic
    oscillation on lattice laws.
    """
    r, a, trunc = perpetuity_samples(model, n_samples, tol=tol, seed=seed, workers=workers)
    ar = a * r
    num = (1.0 + ar) ** alpha - ar**alpha
    den = alpha * model.dmoment_a(alpha)
    g = Estimate(float(num.mean() / den), float(num.std(ddof=1) / math.sqrt(num.size) / abs(den)), "goldie")
    if u_grid is None:
        lo = float(np.quantile(r, 1 - 1e-2))
        hi = float(np.quantile(r, 1 - 2e-4))
        if not hi > lo * 1.01:
            u_grid = []
        else:
            octaves = max(1, int(math.floor(math.log2(hi / lo))))
            u_grid = list(lo * 2.0 ** (np.arange(8 * octaves) / 8.0))
    u = np.asarray(u_grid, dtype=float)
    no_tail = u.size == 0 or not np.any(r > u.max() if u.size else r > np.inf)
    if no_tail:
        reg = Estimate(math.nan, math.inf, "regression")
        return CInfinityReport(g, reg, False, True, trunc, list(map(float, u)))
    rs = np.sort(r)
    p = 1.0 - np.searchsorted(rs, u, side="right") / rs.size
    vals = u**alpha * p
    ses = u**alpha * np.sqrt(p * (1 - p) / rs.size)
    reg = Estimate(float(vals.mean()), float(ses.mean()), "regression")
    return CInfinityReport(g, reg, agree(g, reg), False, trunc, list(map(float, u)))


# ---------------------------------------------------------------- cycle constants


@dataclass
class ConstantsReport:
    alpha: float
    C_infinity: Estimate
    C_plus: Estimate
    C_minus: Estimate
    E_r1: Estimate
    mu: Estimate
    survival_prob: Estimate
    survival_doubled: Estimate
    u_esc: float
    z_tail_bound: float
    stop: str = "regen"
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {k: getattr(self, k).to_dict() for k in
               ("C_infinity", "C_plus", "C_minus", "E_r1", "mu", "survival_prob", "survival_doubled")}
        out.update(alpha=self.alpha, u_esc=self.u_esc, z_tail_bound=self.z_tail_bound, stop=self.stop,
                   notes=list(self.notes))
        return out


def tilted_discrepancies(model: Model, minor: MinorizationParams, alpha: float, m: int, *, u_esc: float,
                         ztol: float = 1e-12, stop: str = "regen", seed: int = 0, workers: int = 1,
                         max_steps: int = 10**6, d: float | None = None):
    """Limits ``Z`` under the tilted law from ``X_0 ~ phi`` with survival flags at ``u_esc`` and ``2 u_esc``."""
    stop_mode = {"regen": 0, "return": 1}[stop]
    base = model.pack
    tl = model.tilted(alpha).pack
    mpar, qa, qw, dpar = minor.pack
    if stop_mode == 1:
        mpar = _with_radius(mpar, _return_radius(minor, d))
    spar, sv, sc = minor.start_pack

    def block(g, cnt):
        return K.tilted_z(g, cnt, u_esc, ztol, stop_mode, max_steps, *base, *tl, mpar, qa, qw, dpar,
                          spar, sv, sc)

    return concat_blocks(run_blocks(block, seed, f"tilted-z-{stop}", m, workers=workers))


def estimate_cycle_constants(model: Model, minor: MinorizationParams, alpha: float, budget: int = 200_000, *,
                             c_inf: CInfinityReport | None = None, c_inf_budget: int | None = None,
                             u_esc: float | None = None, stop: str = "regen", seed: int = 0,
                             workers: int = 1, cycle_budget: int | None = None,
                             strict_escape: bool = True) -> ConstantsReport:
    """``C_+ = C_inf E^alpha[(Z^+)^alpha 1{no regeneration}]``, ``C_-`` alike, plus ``E r_1`` and ``mu``.

    The event that the tilted chain never regenerates is approximated by
    escaping beyond ``u_esc`` (default ``1e4 max(d, 1)``) first; the same
    runs report survival at ``2 u_esc`` as a sensitivity check.

    Raises
    ------
    EscapeAmbiguous
        If doubling ``u_esc`` moves the survival probability by more than two
        standard errors (and ``strict_escape``).
    """
    _require_certified(minor)
    notes = []
    mu = Estimate(model.mu, 0.0, "exact-moments")
    if model.zero_prob >= 1.0:
        zero = Estimate(0.0, 0.0, "full-splitting")
        notes.append("A = 0 almost surely: every step regenerates")
        return ConstantsReport(alpha, Estimate(math.nan, math.nan, "n/a"), zero, zero,
                               Estimate(1.0, 0.0, "exact"), mu, zero, zero, math.nan, 0.0, stop, notes)
    if c_inf is None:
        c_inf = estimate_C_infinity(model, alpha, c_inf_budget or budget, seed=seed, workers=workers)
    cinf = c_inf.goldie
    d = minor.d if math.isfinite(minor.d) else 1.0
    u_esc = 1e4 * max(d, 1.0) if u_esc is None else float(u_esc)
    zs, s1, s2, _steps = tilted_discrepancies(model, minor, alpha, budget, u_esc=u_esc, stop=stop,
                                              seed=seed, workers=workers)
    surv1 = proportion(int(s1.sum()), s1.size, f"escape>{u_esc:g}")
    surv2 = proportion(int(s2.sum()), s2.size, f"escape>{2 * u_esc:g}")
    p1, p2 = surv1.value, surv2.value
    if abs(p1 - p2) > 2 * math.hypot(surv1.stderr, surv2.stderr):
        msg = f"survival {p1:.6g} at u_esc vs {p2:.6g} at 2 u_esc"
        if strict_escape:
            raise EscapeAmbiguous(msg)
        notes.append(msg)
    ind = s2.astype(float)
    zp = np.where(zs > 0, zs, 0.0) ** alpha * ind
    zm = np.where(zs < 0, -zs, 0.0) ** alpha * ind

    def combine(x, tag):
        m = float(x.mean())
        se_m = float(x.std(ddof=1) / math.sqrt(x.size))
        val = cinf.value * m
        se = math.hypot(cinf.stderr * m, cinf.value * se_m)
        return Estimate(val, se, tag)

    cp = combine(zp, "goldie*tilted-Z")
    cm = combine(zm, "goldie*tilted-Z")
    if minor.mode == "atom":
        er1 = Estimate(1.0 / minor.theta, 0.0, "exact-geometric")
    else:
        cyc = sample_cycles(model, minor, cycle_budget or budget, seed=seed, workers=workers)
        er1 = Estimate(cyc.mean_length, cyc.mean_length_se, "cycle-average")
    tmod = model.tilted(alpha)
    rho = model.moment_a(alpha - 1.0)
    zbound = 1e-12 * tmod.abs_moment_b(1.0) * rho / (1.0 - rho) if rho < 1 else math.inf
    return ConstantsReport(alpha, cinf, cp, cm, er1, mu, surv1, surv2, u_esc, zbound, stop, notes)


# ---------------------------------------------------------------- dual-measure tail


@dataclass
class TailCurve:
    u: np.ndarray
    p_hat: np.ndarray
    stderr: np.ndarray
    hits: np.ndarray
    beta: float
    functional: str
    stop: str
    complement: str
    alpha: float = math.nan

    @property
    def u_alpha_p(self) -> np.ndarray:
        return self.u**self.alpha * self.p_hat

    def slope(self):
        return fit_power_law(self.u, self.p_hat, self.stderr)

    def rows(self):
        return [(float(u), float(p), float(s), float(c))
                for u, p, s, c in zip(self.u, self.p_hat, self.stderr, self.u_alpha_p)]


_FUNCTIONALS = ("area", "neg_area", "abs_area")


def _g(functional, area, aarea, u):
    if functional == "area":
        return area > u
    if functional == "neg_area":
        return area < -u
    return aarea > u


def _return_radius(minor, d):
    if d is not None:
        return float(d)
    return minor.d if math.isfinite(minor.d) else 1.0


def _with_radius(mpar, d):
    # only the first-return stop reads the radius; split marks keep their own small set
    out = mpar.copy()
    out[1] = d
    return out


def _dual_block(model, minor, alpha, v, tilted, stop_mode, max_steps, d=None):
    base = model.pack
    tl = model.tilted(alpha).pack if tilted else base
    mpar, qa, qw, dpar = minor.pack
    if stop_mode == 1:
        mpar = _with_radius(mpar, _return_radius(minor, d))
    spar, sv, sc = minor.start_pack

    def block(g, cnt):
        return K.dual_cycle(g, cnt, v, alpha, tilted, stop_mode, max_steps, *base, *tl, mpar, qa, qw, dpar,
                            spar, sv, sc)

    return block


def dual_is_tail(model: Model, minor: MinorizationParams, alpha: float, u_grid, beta: float = 0.7,
                 budget: int = 100_000, *, functional: str = "area", stop: str = "regen",
                 complement: str = "auto", seed: int = 0, workers: int = 1, min_hits: int = 100,
                 max_steps: int = 10**8, d: float | None = None) -> TailCurve:
    """Tail of the cycle (or excursion) area under the dual change of measure.

    Each sample runs tilted innovations until ``|X| > u^beta``, then the
    original ones.  With ``stop="return"`` a sample ends on its first return
    to ``[-d, d]`` (``d`` defaults to the small-set radius, or 1 in atom
    mode) and the functional is the excursion area.  A sample that crosses the level before the cycle ends
    carries weight ``exp(-alpha S_T)``.  The complementary event is handled
    either in the same run with weight ``exp(-alpha S_tau)`` (``"literal"``,
    valid without a zero atom) or by an untilted run (``"plain"``).

    Raises
    ------
    BudgetTooSmall
        If some ``u`` sees fewer than ``min_hits`` samples with nonzero
        contribution.
    """
    if not 0 < beta < 1:
        raise ConfigError("beta must lie in (0, 1)")
    if functional not in _FUNCTIONALS:
        raise ConfigError(f"functional must be one of {_FUNCTIONALS}")
    _require_certified(minor)
    stop_mode = {"regen": 0, "return": 1}[stop]
    if complement == "auto":
        complement = "literal" if model.zero_prob == 0 else "plain"
    if complement not in ("literal", "plain"):
        raise ConfigError("complement must be 'auto', 'literal' or 'plain'")
    u = np.asarray(u_grid, dtype=float)
    if np.any(np.diff(u) <= 0) or np.any(u <= 0):
        raise ConfigError("u_grid must be positive and increasing")
    ps, ses, hits = [], [], []
    for i, ui in enumerate(u):
        v = ui**beta
        blk = _dual_block(model, minor, alpha, v, True, stop_mode, max_steps, d)
        area, aarea, logw, reached = concat_blocks(
            run_blocks(blk, seed, f"dual-{stop}-{i}", budget, workers=workers))
        g = _g(functional, area, aarea, ui)
        w = np.exp(logw)
        if complement == "literal":
            contrib = np.where(g, w, 0.0)
            p = float(contrib.mean())
            se = float(contrib.std(ddof=1) / math.sqrt(budget))
            h = int(np.count_nonzero(contrib))
        else:
            c1 = np.where(g & (reached == 1), w, 0.0)
            blk0 = _dual_block(model, minor, alpha, v, False, stop_mode, max_steps, d)
            a0, aa0, _lw0, r0 = concat_blocks(
                run_blocks(blk0, seed, f"dual-plain-{stop}-{i}", budget, workers=workers))
            c2 = (_g(functional, a0, aa0, ui) & (r0 == 0)).astype(float)
            p = float(c1.mean() + c2.mean())
            se = math.hypot(float(c1.std(ddof=1)), float(c2.std(ddof=1))) / math.sqrt(budget)
            h = int(np.count_nonzero(c1) + np.count_nonzero(c2))
        if h < min_hits:
            raise BudgetTooSmall(f"only {h} contributing samples at u={ui:g}")
        ps.append(p)
        ses.append(se)
        hits.append(h)
    return TailCurve(u, np.array(ps), np.array(ses), np.array(hits), beta, functional, stop, complement, alpha)


def plain_mc_tail(model: Model, minor: MinorizationParams, u_grid, budget: int = 100_000, *,
                  functional: str = "area", stop: str = "regen", seed: int = 0, workers: int = 1,
                  alpha: float = math.nan, max_steps: int = 10**8, d: float | None = None) -> TailCurve:
    """Untilted Monte Carlo estimate of the same tail, one shared sample for all ``u``."""
    _require_certified(minor)
    stop_mode = {"regen": 0, "return": 1}[stop]
    blk = _dual_block(model, minor, 1.0, math.inf, False, stop_mode, max_steps, d)
    area, aarea, _lw, _r = concat_blocks(run_blocks(blk, seed, f"plain-{stop}", budget, workers=workers))
    u = np.asarray(u_grid, dtype=float)
    ps, ses, hits = [], [], []
    for ui in u:
        g = _g(functional, area, aarea, ui).astype(float)
        est = proportion(int(g.sum()), g.size)
        ps.append(est.value)
        ses.append(est.stderr)
        hits.append(int(g.sum()))
    return TailCurve(u, np.array(ps), np.array(ses), np.array(hits), 0.0, functional, stop, "none", alpha)
