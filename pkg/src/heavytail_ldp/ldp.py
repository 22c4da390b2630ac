"""Limit measures of multi-jump paths and rare-event probabilities of scaled paths.

A drift-``z`` path with ``j`` up-jumps and ``k`` down-jumps is
``z t + sum_i x_i 1{t >= U_i} - sum_i y_i 1{t >= V_i}`` with uniform jump
times.  Its limit measure weighs the sizes by the power measure
``alpha x^(-alpha-1) dx`` on ``(0, inf)``.  Restricted to sizes above a
floor ``gamma`` that measure has mass ``gamma^(-alpha)``, so

    C(E) = gamma^(-alpha (j+k)) / (j! k!) * P(path in E)

with i.i.d. Pareto(``alpha``, ``gamma``) sizes, which is what the Monte Carlo
estimator samples.  The ``1/(j! k!)`` factor converts the ordered-size
integral into the exchangeable product form.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import _kernels as K
from .errors import BudgetTooSmall, ConfigError, GammaTooLarge, NotSeparated, UnsupportedEvent
from .events import MAX_PRIMITIVES, EventSet, JumpIndexCertificate, barrier_event, event_jump_index, summarize_jumps
from .measure import ConstantsReport
from .model import Model
from .pathspace import StepFn
from .regen import MinorizationParams, _require_certified
from .rng import concat_blocks, run_blocks
from .stats import Estimate, PowerFit, fit_power_law, proportion

# ---------------------------------------------------------------- limit measures


@dataclass(frozen=True)
class LimitMeasureSpec:
    """Jump counts, drift and tail index of a limit measure.

    ``gamma`` is the jump-size floor of the Monte Carlo sampler; ``None``
    means the event's separation radius.
    """

    z: float
    j: int
    k: int = 0
    alpha: float = 2.0
    gamma: float | None = None

    def __post_init__(self):
        if self.j < 0 or self.k < 0:
            raise ConfigError("jump counts must be nonnegative")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if self.gamma is not None and not self.gamma > 0:
            raise ConfigError("gamma must be positive")

    @property
    def jumps(self) -> int:
        return self.j + self.k

    @property
    def one_sided(self) -> bool:
        return self.k == 0


@dataclass
class LimitMeasureEstimate:
    value: float
    stderr: float
    method: str
    spec: LimitMeasureSpec
    gamma: float = math.nan
    radius: float = math.nan
    budget: int = 0
    hits: int = 0
    halved: Estimate | None = None

    def as_estimate(self) -> Estimate:
        return Estimate(self.value, self.stderr, self.method)

    def to_dict(self) -> dict:
        s = self.spec
        out = {"value": self.value, "stderr": self.stderr, "method": self.method,
               "z": s.z, "j": s.j, "k": s.k, "alpha": s.alpha, "gamma": self.gamma,
               "radius": self.radius, "budget": self.budget, "hits": self.hits}
        if self.halved is not None:
            out["gamma_halved"] = self.halved.to_dict()
        return out


def _separation(event: EventSet, spec: LimitMeasureSpec) -> JumpIndexCertificate | None:
    """Certificate for the precondition, or ``None`` when no admissible path reaches the event."""
    try:
        cert = event_jump_index(event, spec.z, one_sided=spec.one_sided, max_jumps=max(spec.jumps, 1))
    except UnsupportedEvent:
        if len(event.primitives()) > MAX_PRIMITIVES:
            raise
        return None
    if cert.j > spec.jumps:
        return cert  # the measure vanishes; no precondition needed
    if cert.j < spec.jumps or not cert.separated or not cert.radius > 0:
        raise NotSeparated(
            f"paths with fewer than {spec.jumps} jumps reach the event (jump index {cert.j}, "
            f"radius {cert.radius:g})")
    return cert


def _jump_samples(g, reps, spec, gamma):
    """Times and signed Pareto sizes, shape ``(reps, j + k)``."""
    J = spec.jumps
    times = g.random((reps, J))
    sizes = gamma * g.random((reps, J)) ** (-1.0 / spec.alpha)
    sizes[:, spec.j:] *= -1.0
    return times, sizes


def _hits_from_samples(event, spec, times, sizes):
    summ = summarize_jumps(times, sizes, spec.z, event.slice_times(), event.band_slopes())
    return np.asarray(event.evaluate(summ), dtype=bool)


def _mc_from_samples(event: EventSet, spec: LimitMeasureSpec, gamma: float, times, sizes) -> Estimate:
    """Limit-measure estimate from explicit jump samples (exchangeable in the jump labels)."""
    hits = _hits_from_samples(event, spec, times, sizes)
    scale = gamma ** (-spec.alpha * spec.jumps) / (math.factorial(spec.j) * math.factorial(spec.k))
    p = proportion(int(hits.sum()), hits.size)
    return Estimate(scale * p.value, scale * p.stderr, "mc")


def _mc(event, spec, gamma, budget, seed, tag, workers):
    def block(g, cnt):
        t, s = _jump_samples(g, cnt, spec, gamma)
        return _hits_from_samples(event, spec, t, s)

    hits = concat_blocks(run_blocks(block, seed, tag, budget, workers=workers))
    scale = gamma ** (-spec.alpha * spec.jumps) / (math.factorial(spec.j) * math.factorial(spec.k))
    p = proportion(int(hits.sum()), hits.size)
    return Estimate(scale * p.value, scale * p.stderr, "mc"), int(hits.sum())


def limit_measure(event: EventSet, spec: LimitMeasureSpec, budget: int = 1_000_000, *, seed: int = 0,
                  method: str = "mc", workers: int = 1, check_gamma: bool = True,
                  quad_tol: float = 1e-11) -> LimitMeasureEstimate:
    """Limit measure of ``event`` for ``spec``.

    Parameters
    ----------
    method
        ``"mc"`` samples Pareto jump sizes above the floor; ``"quadrature"``
        integrates the indicator numerically and is available for one jump
        (any drift) and for two jumps at zero drift.
    check_gamma
        Re-estimate with half the floor from an independent stream and raise
        :class:`GammaTooLarge` if the two disagree by more than three
        combined standard errors.

    Raises
    ------
    NotSeparated
        If paths with fewer jumps come arbitrarily close to the event.
    """
    if spec.jumps == 0:
        inside = bool(event.contains(StepFn(drift=spec.z)))
        return LimitMeasureEstimate(float(inside), 0.0, "dirac", spec, budget=0, hits=int(inside))
    cert = _separation(event, spec)
    if cert is None or cert.j > spec.jumps:
        return LimitMeasureEstimate(0.0, 0.0, "empty", spec)
    radius = cert.radius
    if method == "quadrature":
        val = _quadrature(event, spec, radius, quad_tol)
        return LimitMeasureEstimate(val, 0.0, "quadrature", spec, radius=radius)
    if method != "mc":
        raise ConfigError(f"unknown limit-measure method {method!r}")
    if budget < 1000:
        raise BudgetTooSmall("limit-measure Monte Carlo needs at least 1000 samples")
    # every member with the minimal number of jumps has all jumps at least the radius
    gamma = spec.gamma if spec.gamma is not None else radius
    if not math.isfinite(gamma):
        gamma = 1.0
    est, hits = _mc(event, spec, gamma, budget, seed, "limit-measure", workers)
    halved = None
    if check_gamma:
        halved, _ = _mc(event, spec, gamma / 2, budget, seed, "limit-measure-half", workers)
        if abs(halved.value - est.value) > 3 * math.hypot(halved.stderr, est.stderr):
            raise GammaTooLarge(f"halving gamma moved the estimate from {est.value:.6g} to {halved.value:.6g}")
    return LimitMeasureEstimate(est.value, est.stderr, "mc", spec, gamma, radius, budget, hits, halved)


# ---------------------------------------------------------------- quadrature


def _levels(event):
    out = set()
    for prim in event.primitives():
        for name in ("level", "radius"):
            if hasattr(prim, name):
                out.add(float(getattr(prim, name)))
    return out


def _reference_values(z, times, sizes, free, slices, slopes):
    """Values at every potential extremum of the path without the free jump, tilted by each band slope."""
    keep = [i for i in range(len(times)) if i != free]
    marks = {0.0, 1.0, *slices, *(times[i] for i in range(len(times)))}
    vals = set()
    for c in {0.0, *slopes}:
        for t in marks:
            right = sum(sizes[i] for i in keep if times[i] <= t)
            left = sum(sizes[i] for i in keep if times[i] < t)
            vals.add((z - c) * t + right)
            vals.add((z - c) * t + left)
    return vals


def _indicator_measure(member, wmax, alpha, sign, levels, refs):
    """Lebesgue measure of ``{w in (0, wmax]: member(w)}``.

    The free jump ``s = sign * w^(-1/alpha)`` shifts path values affinely,
    so membership can only change where some reference value plus ``s``
    meets plus or minus a level.  Between consecutive candidates the
    indicator is constant and one midpoint evaluation is exact.
    """
    cuts = {0.0, wmax}
    for lev in levels:
        for v in refs:
            for target in (lev, -lev):
                x = sign * (target - v)
                if x > 0:
                    w = x ** (-alpha)
                    if w < wmax:
                        cuts.add(w)
    cuts = sorted(cuts)
    return sum(b - a for a, b in zip(cuts[:-1], cuts[1:]) if b > a and member(0.5 * (a + b)))


def _quadrature(event, spec, radius, tol):
    alpha = spec.alpha
    wmax = radius ** (-alpha) if radius > 0 and math.isfinite(radius) else 1.0
    signs = [1.0] * spec.j + [-1.0] * spec.k
    slices, slopes = event.slice_times(), event.band_slopes()
    levels = _levels(event)

    def inside(times, sizes):
        summ = summarize_jumps(np.array([times]), np.array([sizes]), spec.z, slices, slopes)
        return bool(np.asarray(event.evaluate(summ))[0])

    def size(w):
        return w ** (-1.0 / alpha)

    def measure_free(times, sizes, free):
        refs = _reference_values(spec.z, times, sizes, free, slices, slopes)

        def member(w):
            trial = list(sizes)
            trial[free] = signs[free] * size(w)
            return inside(times, trial)

        return _indicator_measure(member, wmax, alpha, signs[free], levels, refs)

    knots = sorted({0.0, 1.0, *[float(t) for t in slices if 0 < t < 1]})
    norm = math.factorial(spec.j) * math.factorial(spec.k)
    if spec.jumps == 1:
        def inner(u):
            return measure_free([u], [0.0], 0)

        total = 0.0
        for a, b in zip(knots[:-1], knots[1:]):
            total += integrate.quad(inner, a, b, epsabs=tol, epsrel=tol, limit=200)[0]
        return total / norm
    if spec.jumps == 2 and spec.z == 0.0 and all(s == 0.0 for s in slopes):
        return _two_jump_patterns(measure_free, signs, knots, size, wmax, tol) / norm
    raise UnsupportedEvent("quadrature covers one jump, or two jumps with zero drift and slope-0 bands")


def _two_jump_patterns(measure_free, signs, knots, size, wmax, tol):
    """With zero drift only the ordering of jump times relative to the knots matters."""
    lengths = np.diff(knots)
    total = 0.0
    for a, b in itertools.product(range(len(lengths)), repeat=2):
        if a == b:
            # two jumps in one cell: each order has probability L^2 / 2
            patterns = [(knots[a] + lengths[a] / 3.0, knots[a] + 2.0 * lengths[a] / 3.0),
                        (knots[a] + 2.0 * lengths[a] / 3.0, knots[a] + lengths[a] / 3.0)]
            prob = lengths[a] ** 2 / 2.0
        else:
            patterns = [(knots[a] + 0.5 * lengths[a], knots[b] + 0.5 * lengths[b])]
            prob = lengths[a] * lengths[b]
        for t in patterns:
            def inner(w1, t=t):
                return measure_free(list(t), [signs[0] * size(w1), 0.0], 1)

            total += prob * integrate.quad(inner, 0.0, wmax, epsabs=tol * wmax, epsrel=tol, limit=200)[0]
    return total


# ---------------------------------------------------------------- rare events

METHODS = ("DirectMC", "CycleIS", "Asymptotic")


@dataclass
class RareEventReport:
    """Estimates of ``P(Xbar_n in E)`` keyed by method name."""

    event: EventSet
    n: int
    jump_index: int
    radius: float
    estimates: dict = field(default_factory=dict)
    hits: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        from .events import event_to_dict
        return {"event": event_to_dict(self.event), "n": self.n, "jump_index": self.jump_index,
                "radius": self.radius, "estimates": {k: v.to_dict() for k, v in self.estimates.items()},
                "hits": dict(self.hits), "details": dict(self.details)}


def _mixture_weights(j: int) -> np.ndarray:
    """Probabilities of planting ``0..j`` cycles; most mass on ``j``, some on fewer."""
    if j == 0:
        return np.array([1.0])
    if j == 1:
        return np.array([0.1, 0.9])
    w = np.full(j + 1, 0.2 / j)
    w[0] = 0.05
    w[1:j] = 0.15 / (j - 1)
    w[j] = 0.8
    return w / w.sum()


def _path_kernel(model, minor, event, n, reps, M, wts, v, alpha, x0, seed, tag, workers, z):
    slices = sorted(event.slice_times())
    slopes = event.band_slopes()
    if len(set(slopes)) > 1:
        raise UnsupportedEvent("at most one band slope per event")
    band = slopes[0] if slopes else z
    sidx = np.array([int(math.floor(n * t)) for t in slices], dtype=np.int64)
    base = model.pack
    tl = model.tilted(alpha).pack if M > 0 else base
    mpar, qa, qw, dpar = minor.pack
    spar, sv, sc = minor.start_pack
    fixed = x0 is not None
    xv = float(x0) if fixed else 0.0

    def block(g, cnt):
        out, lw = K.scaled_paths(g, cnt, n, M, wts, v, alpha, xv, fixed, band, sidx, *base, *tl,
                                 mpar, qa, qw, dpar, spar, sv, sc)
        return np.column_stack([out, lw])

    res = concat_blocks(run_blocks(block, seed, tag, reps, workers=workers))
    summ = {"terminal": res[:, 0], "inf": res[:, 1], "sup": res[:, 2],
            "slices": {t: res[:, 5 + i] for i, t in enumerate(slices)},
            "bands": {s: res[:, 3] for s in slopes}}
    hit = np.asarray(event.evaluate(summ), dtype=bool)
    return hit, res[:, -1], res[:, 4]


def _weighted(hit, logw, tag):
    vals = np.where(hit, np.exp(logw), 0.0)
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else math.inf
    return Estimate(float(vals.mean()), se, tag)


def asymptotic_prefactor(event: EventSet, model: Model, constants: ConstantsReport, *, one_sided: bool,
                         budget: int = 1_000_000, seed: int = 0, workers: int = 1,
                         form: str = "per-cycle") -> tuple[Estimate, int, dict]:
    """Constant ``K`` with ``P(Xbar_n in E) ~ K n^(-J (alpha - 1))``.

    ``form="per-cycle"`` divides each cycle tail constant by the mean cycle
    length, the rate at which cycles occur per unit of path time.
    ``form="literal"`` multiplies by it instead, and ``form="bare"`` omits it.

    Returns the prefactor, the jump index and the limit measures used.
    """
    alpha = constants.alpha
    mu = model.mu
    cert = event_jump_index(event, mu, one_sided=one_sided)
    J = cert.j
    if J == 0:
        return Estimate(1.0, 0.0, "nominal"), 0, {}
    if not cert.separated or not cert.radius > 0:
        raise NotSeparated("the event is not bounded away from paths with fewer jumps")
    er1 = constants.E_r1.value
    scale = {"per-cycle": 1.0 / er1, "literal": er1, "bare": 1.0}[form]
    cp, cm = constants.C_plus.value, constants.C_minus.value
    pairs = [(J, 0)] if one_sided else [(l, J - l) for l in range(J, -1, -1)]
    total, var, used = 0.0, 0.0, {}
    for l, m in pairs:
        coef = (cp * scale) ** l * (cm * scale) ** m
        if coef == 0.0:
            continue
        spec = LimitMeasureSpec(mu, l, m, alpha)
        quad_ok = (l + m == 1) or (l + m == 2 and mu == 0.0 and all(s == 0 for s in event.band_slopes()))
        try:
            lm = limit_measure(event, spec, budget, seed=seed, workers=workers,
                               method="quadrature" if quad_ok else "mc")
        except NotSeparated:
            continue  # this sign pattern cannot reach the event with J jumps
        used[f"C_{l},{m}"] = lm.to_dict()
        total += coef * lm.value
        var += (coef * lm.stderr) ** 2
    return Estimate(total, math.sqrt(var), f"asymptotic-{form}"), J, used


def rare_event_probability(model: Model, minor: MinorizationParams, event: EventSet, n: int,
                           methods=("DirectMC",), budget: int = 100_000, *,
                           constants: ConstantsReport | None = None, alpha: float | None = None,
                           x0: float | None = None, beta: float = 0.8, one_sided: bool | None = None,
                           mixture=None, seed: int = 0, workers: int = 1,
                           limit_budget: int = 1_000_000) -> RareEventReport:
    """Estimate ``P(Xbar_n in E)`` by the requested methods.

    ``CycleIS`` plants tilted cycles among the first ``ceil(n / E r_1)``
    cycles; a planted cycle follows the tilted law until ``|X|`` exceeds
    ``v = (r n)^beta`` with ``r`` the event's separation radius, and the
    original law afterwards.  The number of planted cycles is drawn from a
    defensive mixture concentrated on the jump index, and each replication
    carries the exact mixture likelihood ratio.

    ``X_0`` follows the regeneration measure unless ``x0`` is given.
    """
    if n < 1:
        raise ConfigError("n must be at least 1")
    if budget < 100:
        raise BudgetTooSmall("at least 100 replications are required")
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ConfigError(f"unknown methods {sorted(unknown)}")
    _require_certified(minor)
    if one_sided is None:
        one_sided = model.b_nonnegative
    mu = model.mu
    cert = event_jump_index(event, mu, one_sided=one_sided)
    rep = RareEventReport(event, n, cert.j, cert.radius)
    if constants is not None and alpha is None:
        alpha = constants.alpha
    if "DirectMC" in methods:
        hit, _, resid = _path_kernel(model, minor, event, n, budget, 0, np.array([1.0]), math.inf, 1.0, x0,
                                     seed, f"direct-{n}", workers, mu)
        rep.estimates["DirectMC"] = proportion(int(hit.sum()), hit.size, "direct")
        rep.hits["DirectMC"] = int(hit.sum())
        rep.details["mean_abs_residual"] = float(np.abs(resid).mean())
    if "CycleIS" in methods:
        if alpha is None:
            raise ConfigError("CycleIS needs alpha (or a constants report)")
        if cert.j >= 1 and not (cert.separated and cert.radius > 0):
            raise NotSeparated("the event is not bounded away from paths with fewer jumps")
        if minor.mode == "atom":
            er1 = 1.0 / minor.theta
        elif constants is not None:
            er1 = constants.E_r1.value
        else:
            raise ConfigError("CycleIS under grid splitting needs E r_1 from a constants report")
        J = cert.j
        M = int(math.ceil(n / er1)) if J > 0 else 0
        wts = _mixture_weights(J) if mixture is None else np.asarray(mixture, dtype=float)
        if wts.shape != (J + 1,) or np.any(wts < 0) or not math.isclose(wts.sum(), 1.0, rel_tol=1e-9):
            raise ConfigError(f"mixture needs {J + 1} nonnegative weights summing to one")
        if J > 0 and not wts[0] > 0:
            raise ConfigError("the mixture must keep positive weight on planting nothing")
        r = cert.radius if math.isfinite(cert.radius) else 1.0
        v = (r * n) ** beta
        hit, logw, _ = _path_kernel(model, minor, event, n, budget, M, wts, v, alpha, x0, seed,
                                    f"cycle-is-{n}", workers, mu)
        rep.estimates["CycleIS"] = _weighted(hit, logw, "cycle-is")
        rep.hits["CycleIS"] = int(hit.sum())
        rep.details.update(cycles_in_mixture=M, tilt_threshold=v, mixture=wts.tolist())
    if "Asymptotic" in methods:
        if constants is None:
            raise ConfigError("the asymptotic method needs a constants report")
        pref, J, used = asymptotic_prefactor(event, model, constants, one_sided=one_sided,
                                             budget=limit_budget, seed=seed, workers=workers)
        rate = float(n) ** (-J * (constants.alpha - 1.0))
        rep.estimates["Asymptotic"] = Estimate(pref.value * rate, pref.stderr * rate, pref.method)
        rep.details["limit_measures"] = used
    return rep


@dataclass
class RateStudy:
    """Rare-event estimates over an ``n``-grid with a log-log slope fit."""

    n_grid: list
    reports: list
    fit_method: str
    fit: PowerFit
    expected_slope: float
    prefactor: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def rows(self):
        """``(n, p_direct, p_is, p_asymptotic, stderr)``; ``stderr`` belongs to the fitted method."""
        out = []
        for rep in self.reports:
            get = lambda m: rep.estimates[m].value if m in rep.estimates else math.nan
            se = rep.estimates[self.fit_method].stderr if self.fit_method in rep.estimates else math.nan
            out.append((rep.n, get("DirectMC"), get("CycleIS"), get("Asymptotic"), se))
        return out

    def slope_ok(self, tol: float) -> bool:
        return abs(self.fit.slope - self.expected_slope) <= tol

    def to_dict(self) -> dict:
        return {"n_grid": list(self.n_grid), "fit_method": self.fit_method,
                "slope": self.fit.slope, "slope_se": self.fit.slope_se, "r2": self.fit.r2,
                "expected_slope": self.expected_slope, "prefactor": self.prefactor,
                "notes": list(self.notes), "reports": [r.to_dict() for r in self.reports]}


def rate_study(model: Model, minor: MinorizationParams, event: EventSet, n_grid, *, methods=("CycleIS",),
               fit_method: str = "CycleIS", budget: int = 100_000, constants: ConstantsReport | None = None,
               alpha: float | None = None, one_sided: bool | None = None, seed: int = 0,
               workers: int = 1, direct_max_n: int | None = None, **kw) -> RateStudy:
    """Run :func:`rare_event_probability` on each ``n`` and fit ``log p`` against ``log n``.

    ``direct_max_n`` skips DirectMC above that ``n``.
    """
    if fit_method not in methods:
        raise ConfigError("the fitted method must be among the requested methods")
    if one_sided is None:
        one_sided = model.b_nonnegative
    if alpha is None:
        if constants is None:
            raise ConfigError("alpha or a constants report is required")
        alpha = constants.alpha
    reports = []
    for i, n in enumerate(n_grid):
        ms = [m for m in methods if not (m == "DirectMC" and direct_max_n is not None and n > direct_max_n)]
        reports.append(rare_event_probability(model, minor, event, int(n), ms, budget, constants=constants,
                                              alpha=alpha, one_sided=one_sided, seed=seed + i,
                                              workers=workers, **kw))
    J = reports[0].jump_index
    p = [r.estimates[fit_method].value for r in reports]
    se = [r.estimates[fit_method].stderr for r in reports]
    fit = fit_power_law(np.asarray(n_grid, float), np.asarray(p), np.asarray(se))
    return RateStudy(list(n_grid), reports, fit_method, fit, -J * (alpha - 1.0))


# ---------------------------------------------------------------- barrier


@dataclass
class BarrierStudy:
    a_plus: float
    a_minus: float
    jump_index: int
    radius: float
    limit_measure: LimitMeasureEstimate
    asymptotic_constant: Estimate
    literal_constant: Estimate
    bare_constant: Estimate
    study: RateStudy

    def rows(self):
        return self.study.rows()

    def to_dict(self) -> dict:
        return {"a_plus": self.a_plus, "a_minus": self.a_minus, "jump_index": self.jump_index,
                "radius": self.radius, "limit_measure": self.limit_measure.to_dict(),
                "asymptotic_constant": self.asymptotic_constant.to_dict(),
                "literal_constant": self.literal_constant.to_dict(),
                "bare_constant": self.bare_constant.to_dict(), "study": self.study.to_dict()}


def barrier_option_study(model: Model, minor: MinorizationParams, a_minus: float, a_plus: float, n_grid,
                         budget: int = 100_000, *, constants: ConstantsReport, seed: int = 0, workers: int = 1,
                         methods=("CycleIS", "Asymptotic"), direct_max_n: int | None = None,
                         limit_budget: int = 1_000_000, **kw) -> BarrierStudy:
    """Probability that the scaled path ends above ``a_plus`` after dipping below ``-a_minus``.

    Verifies that two jumps are needed and that the event is separated,
    computes the asymptotic constant ``C_{1,1} C_+ C_- / E r_1^2`` and
    estimates the probability on ``n_grid``.
    """
    mu = model.mu
    if not a_plus > max(mu, 0.0):
        raise ConfigError(f"a_plus = {a_plus:g} must exceed max(mu, 0) = {max(mu, 0.0):g}")
    if not a_minus > max(-mu, 0.0):
        raise ConfigError(f"a_minus = {a_minus:g} must exceed max(-mu, 0) = {max(-mu, 0.0):g}")
    event = barrier_event(a_plus, a_minus)
    cert = event_jump_index(event, mu, require_separation=True)
    if cert.j != 2:
        raise UnsupportedEvent(f"barrier event has jump index {cert.j}, expected 2")
    spec = LimitMeasureSpec(mu, 1, 1, constants.alpha)
    lm = limit_measure(event, spec, limit_budget, seed=seed, workers=workers,
                       method="quadrature" if mu == 0.0 else "mc")
    cp, cm, er1 = constants.C_plus, constants.C_minus, constants.E_r1

    def const(scale_pow, tag):
        s = er1.value ** scale_pow
        val = lm.value * cp.value * cm.value * s
        parts = [(e.stderr / e.value) ** 2 for e in (cp, cm, lm.as_estimate()) if e.value]
        rel = math.sqrt(sum(parts))
        return Estimate(val, abs(val) * rel, tag)

    study = rate_study(model, minor, event, n_grid, methods=methods, fit_method="CycleIS", budget=budget,
                       constants=constants, one_sided=False, seed=seed, workers=workers,
                       direct_max_n=direct_max_n, limit_budget=limit_budget, **kw)
    return BarrierStudy(a_plus, a_minus, cert.j, cert.radius, lm, const(-2, "per-cycle"),
                        const(2, "literal"), const(0, "bare"), study)


__all__ = [
    "LimitMeasureSpec", "LimitMeasureEstimate", "limit_measure", "RareEventReport", "rare_event_probability",
    "asymptotic_prefactor", "RateStudy", "rate_study", "BarrierStudy", "barrier_option_study"
]
