"""The affine recursion ``X_{n+1} = A X_n + B`` and its elementary functionals."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, reduce

import numpy as np

from . import _kernels as K
from . import laws as L
from .errors import ConfigError, DegenerateModel, UnstableModel
from .rng import concat_blocks, run_blocks, single_stream, stream


def _as_generator(rng):
    """Accept a Generator, an int seed or a ``(seed, tag)`` pair; return (gen, stamp)."""
    if isinstance(rng, np.random.Generator):
        return rng, None
    if isinstance(rng, (int, np.integer)):
        return single_stream(int(rng), "path"), (int(rng), "path")
    if isinstance(rng, tuple) and len(rng) == 2:
        return single_stream(int(rng[0]), str(rng[1])), (int(rng[0]), str(rng[1]))
    raise ConfigError(f"cannot interpret {rng!r} as a random stream")


class Model:
    """Immutable wrapper around a :class:`~heavytail_ldp.laws.CoupleLaw`.

    Exposes exact moments of the innovation pair and the flat arrays the
    compiled kernels consume.  Construct through :func:`build_model` to get
    the stability and degeneracy checks.
    """

    def __init__(self, law: L.CoupleLaw):
        self.law = law

    def __repr__(self):
        return f"Model({self.law!r})"

    def __eq__(self, other):
        return isinstance(other, Model) and other.law == self.law

    def __hash__(self):
        return hash(self.law)

    # ---------------------------------------------------------- moments
    @property
    def zero_prob(self) -> float:
        """``P(A = 0)``."""
        law = self.law
        if isinstance(law, L.DiscreteJoint):
            return float(law.p[law.a == 0].sum())
        if isinstance(law, L.AtomPlusDensity):
            return law.p0
        return 0.0

    def moment_a(self, s: float) -> float:
        """``E A^s`` for ``s >= 0`` (``0^0 = 1``)."""
        law = self.law
        if isinstance(law, L.DiscreteJoint):
            a, p = law.a, law.p
            if s == 0:
                return float(p.sum())
            pos = a > 0
            return float(np.sum(p[pos] * a[pos] ** s))
        if isinstance(law, L.LognormalNormalIndep):
            return law.a_law.moment(s)
        if s == 0:
            return 1.0
        return (1.0 - law.p0) * law.a.moment(s)

    def dmoment_a(self, s: float) -> float:
        """``E A^s log A`` on ``{A > 0}`` (the derivative of ``moment_a``)."""
        law = self.law
        if isinstance(law, L.DiscreteJoint):
            a, p = law.a, law.p
            pos = a > 0
            return float(np.sum(p[pos] * a[pos] ** s * np.log(a[pos])))
        if isinstance(law, L.LognormalNormalIndep):
            return law.a_law.dmoment(s)
        return (1.0 - law.p0) * law.a.dmoment(s)

    def log_moment_a(self, s: float) -> float:
        m = self.moment_a(s)
        return math.log(m) if m > 0 else -math.inf

    def mean_log_a(self) -> float:
        """``E log A`` (``-inf`` when ``P(A = 0) > 0``)."""
        if self.zero_prob > 0:
            return -math.inf
        return self.dmoment_a(0.0)

    def mean_a(self) -> float:
        return self.moment_a(1.0)

    def mean_b(self) -> float:
        law = self.law
        if isinstance(law, L.DiscreteJoint):
            return float(np.sum(law.p * law.b))
        if isinstance(law, L.LognormalNormalIndep):
            return law.mu_b
        return law.p0 * law.b_at_zero.mean() + (1 - law.p0) * law.b.mean()

    def abs_moment_b(self, m: float) -> float:
        """``E |B|^m``."""
        law = self.law
        if isinstance(law, L.DiscreteJoint):
            return float(np.sum(law.p * np.abs(law.b) ** m))
        if isinstance(law, L.LognormalNormalIndep):
            return law.b_law.abs_moment(m)
        return law.p0 * law.b_at_zero.abs_moment(m) + (1 - law.p0) * law.b.abs_moment(m)

    @property
    def mu(self) -> float:
        """Stationary mean ``E B / (1 - E A)``."""
        return self.mean_b() / (1.0 - self.mean_a())

    @property
    def has_exact_moments(self) -> bool:
        return True

    @property
    def b_nonnegative(self) -> bool:
        """True when ``B >= 0`` almost surely."""
        law = self.law
        if isinstance(law, L.DiscreteJoint):
            return bool(np.all(law.b[law.p > 0] >= 0))
        if isinstance(law, L.LognormalNormalIndep):
            return law.sigma_b == 0 and law.mu_b >= 0
        ok = law.b.support()[0] >= 0
        return ok and (law.p0 == 0 or law.b_at_zero.support()[0] >= 0)

    # ---------------------------------------------------------- tilting
    def tilted_law(self, s: float) -> L.CoupleLaw:
        """Law with density ``a^s / E A^s`` relative to the original one."""
        law = self.law
        if s == 0:
            return law
        if isinstance(law, L.DiscreteJoint):
            a, b, p = law.a, law.b, law.p
            w = np.where(a > 0, p * np.where(a > 0, a, 1.0) ** s, 0.0)
            w = w / w.sum()
            keep = w > 0
            atoms = tuple(zip(a[keep], b[keep], w[keep]))
            # renormalize once more so the atoms sum to one within 1e-12
            tot = sum(x[2] for x in atoms)
            return L.DiscreteJoint(tuple((x[0], x[1], x[2] / tot) for x in atoms))
        if isinstance(law, L.LognormalNormalIndep):
            t = law.a_law.tilt(s)
            return L.LognormalNormalIndep(t.mu, t.sigma, law.mu_b, law.sigma_b)
        return L.AtomPlusDensity(0.0, law.a.tilt(s), law.b, law.b_at_zero)

    def tilted(self, s: float) -> "Model":
        return Model(self.tilted_law(s))

    # ---------------------------------------------------------- kernel packing
    @cached_property
    def pack(self):
        """``(kind, da, db, dc, par)`` for the compiled samplers."""
        law = self.law
        empty = np.zeros(1)
        if isinstance(law, L.DiscreteJoint):
            cum = np.cumsum(law.p)
            cum[-1] = 1.0
            return (L.KIND_DISCRETE, law.a.copy(), law.b.copy(), cum, np.zeros(11))
        if isinstance(law, L.LognormalNormalIndep):
            a, b, b0, p0 = law.a_law, law.b_law, L.Point(0.0), 0.0
        else:
            a, b, b0, p0 = law.a, law.b, law.b_at_zero, law.p0
        par = np.array([p0, a.code, *a.params(), b.code, *b.params(), b0.code, *b0.params()], dtype=float)
        return (L.KIND_DENSITY, empty, empty, empty, par)

    def a_component(self):
        """Law of ``A`` given ``A > 0`` for density families (``None`` for discrete)."""
        law = self.law
        if isinstance(law, L.LognormalNormalIndep):
            return law.a_law
        if isinstance(law, L.AtomPlusDensity):
            return law.a
        return None

    def b_component(self):
        law = self.law
        if isinstance(law, L.LognormalNormalIndep):
            return law.b_law
        if isinstance(law, L.AtomPlusDensity):
            return law.b
        return None

    def to_dict(self) -> dict:
        return L.law_to_dict(self.law)


# ---------------------------------------------------------------- construction


def _fixed_point_of_all(law: L.DiscreteJoint):
    """Return a common fixed point of every atom map, or ``None``."""
    a, b, p = law.a[law.p > 0], law.b[law.p > 0], law.p[law.p > 0]
    del p
    if np.all(a == 1.0) and np.all(b == 0.0):
        return 0.0  # identity: every x is fixed
    for ai, bi in zip(a, b):
        if ai != 1.0:
            x = bi / (1.0 - ai)
            if np.all(np.abs(a * x + b - x) <= 1e-12 * max(1.0, abs(x))):
                return float(x)
            return None
    return None


def build_model(spec, *, strict: bool = True) -> Model:
    """Validate a law and wrap it as a :class:`Model`.

    Parameters
    ----------
    spec
        A ``CoupleLaw`` instance or its JSON dictionary.
    strict
        When False a degenerate law (a common fixed point of every
        innovation map) is accepted.  Useful for deterministic fixtures.

    Raises
    ------
    UnstableModel
        If ``E log A >= 0``.
    DegenerateModel
        If ``P(A x + B = x) = 1`` for some ``x`` and ``strict``.
    """
    law = L.law_from_dict(spec) if isinstance(spec, dict) else spec
    model = Model(law)
    elog = model.mean_log_a()
    if not elog < 0:
        raise UnstableModel(f"E log A = {elog!r} is not negative")
    if strict and isinstance(law, L.DiscreteJoint):
        x = _fixed_point_of_all(law)
        if x is not None:
            raise DegenerateModel(f"every innovation map fixes x = {x!r}")
    return model


# ---------------------------------------------------------------- paths


@dataclass(frozen=True)
class PathSample:
    """A realized path with its innovations.

    ``log_products[k] = sum_{i<k} log a_i`` and ``discrepancies = states *
    exp(-log_products)``.  After a zero innovation the log product is
    ``-inf`` and the discrepancy is ``nan``.
    """

    x0: float
    states: np.ndarray
    a: np.ndarray
    b: np.ndarray
    rng_stamp: tuple | None = None

    @cached_property
    def log_products(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.concatenate(([0.0], np.cumsum(np.log(self.a))))

    @cached_property
    def discrepancies(self) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):
            z = self.states * np.exp(-self.log_products)
        z[~np.isfinite(self.log_products)] = np.nan
        return z

    def replay(self) -> np.ndarray:
        """Recompute the states from ``x0`` and the stored innovations."""
        return K.run_recursion(float(self.x0), self.a, self.b)

    def __len__(self):
        return self.states.shape[0]


def simulate_path(model: Model, n: int, x0: float = 0.0, rng=0) -> PathSample:
    """Simulate ``X_0 = x0, ..., X_n``.

    ``rng`` is a Generator, an integer seed, or ``(seed, tag)``.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    gen, stamp = _as_generator(rng)
    kind, da, db, dc, par = model.pack
    a, b = K.innovations(gen, int(n), kind, da, db, dc, par)
    states = K.run_recursion(float(x0), a, b)
    return PathSample(float(x0), states, a, b, stamp)


def scaled_additive_path(path, n: int | None = None):
    """The step function ``t -> (1/n) sum_{i < floor(n t)} X_i`` on ``[0, 1]``.

    ``path`` is a :class:`PathSample` or an array of states.
    """
    from .pathspace import StepFn

    states = np.asarray(path.states if isinstance(path, PathSample) else path, dtype=float)
    n = states.shape[0] if n is None else int(n)
    if states.shape[0] < n:
        raise ConfigError(f"path has {states.shape[0]} states, need {n}")
    sizes = states[:n] / n
    times = np.arange(1, n + 1) / n
    keep = sizes != 0
    return StepFn(times[keep], sizes[keep])


def sample_stationary(model: Model, m: int, *, burn: int = 1000, x0: float | None = None,
                      seed: int = 0, workers: int = 1) -> np.ndarray:
    """Endpoints of ``m`` independent chains run ``burn`` steps from ``x0`` (default the mean)."""
    kind, da, db, dc, par = model.pack
    start = model.mu if x0 is None else float(x0)

    def block(g, cnt):
        return K.stationary_endpoints(g, cnt, int(burn), start, kind, da, db, dc, par)

    return concat_blocks(run_blocks(block, seed, "stationary", m, workers=workers))


# ---------------------------------------------------------------- diagnostics


@dataclass
class Check:
    name: str
    passed: bool
    value: float = math.nan
    detail: str = ""


@dataclass
class ModelDiagnostics:
    """Numerical checks of the standing assumptions.

    Moments are exact for every supported family, so the "confidence
    interval" of an exact quantity is a point.  The two finiteness proxies
    compare Monte Carlo moments at budget ``m`` and ``2m``.
    """

    alpha: float
    mean_log_a: tuple
    mean_a: float
    mean_b: float
    alpha_moment_residual: float
    epsilon: float
    drift_gamma: float
    drift_rho: float
    drift_radius: float
    lattice_span: float | None
    checks: list = field(default_factory=list)
    warnings: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name) -> Check:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def lattice_span(values, tol: float = 1e-9, max_den: int = 10_000):
    """Span ``h`` with ``values`` inside ``h * Z``, or ``None`` if no such lattice.

    A single nonzero value (or none) is trivially on a lattice.
    """
    v = np.asarray([x for x in values if abs(x) > tol], dtype=float)
    if v.size == 0:
        return 0.0
    base = v[0]
    fracs = []
    for x in v:
        f = Fraction(x / base).limit_denominator(max_den)
        if abs(float(f) - x / base) > tol * max(1.0, abs(x / base)):
            return None
        fracs.append(f)
    num = reduce(math.gcd, (abs(f.numerator) for f in fracs))
    den = reduce(lambda p, q: p * q // math.gcd(p, q), (f.denominator for f in fracs))
    return abs(base) * num / den


def _mc_stability(sample_fn, m, seed, tag):
    """Relative change of a sample mean when the budget doubles."""
    x1 = sample_fn(stream(seed, tag, 0), m)
    x2 = np.concatenate([x1, sample_fn(stream(seed, tag, 1), m)])
    m1, m2 = float(np.mean(x1)), float(np.mean(x2))
    rel = abs(m2 - m1) / max(abs(m2), 1e-300)
    se = float(np.std(x2, ddof=1) / math.sqrt(x2.size)) / max(abs(m2), 1e-300)
    return m2, rel, se


def check_assumptions(model: Model, alpha: float, mc_budget: int = 100_000, *, seed: int = 0,
                      alpha_tol: float = 1e-8) -> ModelDiagnostics:
    """Report on stability, the Kesten moment condition, lattice structure and drift.

    Never raises on a failed check; inspect ``checks`` and ``warnings``.
    """
    if not alpha > 1:
        raise ConfigError("alpha must exceed 1")
    eps = min(1.0, alpha / 2.0)
    elog = model.mean_log_a()
    resid = model.moment_a(alpha) - 1.0
    ea_eps = model.moment_a(eps)
    eb_eps = model.abs_moment_b(eps)
    gam = 0.5 * (1.0 + ea_eps)
    rho = eb_eps + 1.0 - gam
    radius = (rho / (gam - ea_eps)) ** (1.0 / eps) if gam > ea_eps else math.inf

    kind, da, db, dc, par = model.pack

    def draw_a(g, m):
        return K.innovations(g, m, kind, da, db, dc, par)[0]

    def draw_b(g, m):
        return K.innovations(g, m, kind, da, db, dc, par)[1]

    def logplus_moment(g, m):
        a = draw_a(g, m)
        out = np.zeros_like(a)
        big = a > 1
        out[big] = a[big] ** alpha * np.log(a[big])
        return out

    def b_tail_moment(g, m):
        return np.abs(draw_b(g, m)) ** (alpha + eps)

    lp_val, lp_rel, lp_se = _mc_stability(logplus_moment, mc_budget, seed, "diag-logplus")
    bt_val, bt_rel, bt_se = _mc_stability(b_tail_moment, mc_budget, seed, "diag-btail")
    bt_exact = model.abs_moment_b(alpha + eps)

    checks = [
        Check("stability", elog < 0, elog, "E log A < 0"),
        Check("alpha_moment", abs(resid) < alpha_tol, resid, "E A^alpha - 1"),
        Check("logplus_moment", lp_rel < max(4 * lp_se, 0.05), lp_val,
              f"relative shift under doubling {lp_rel:.3g}"),
        Check("b_tail_moment", bool(np.isfinite(bt_exact)) and bt_rel < max(4 * bt_se, 0.05), bt_exact,
              f"exact {bt_exact:.6g}; MC relative shift {bt_rel:.3g}"),
        Check("drift", 0 < gam < 1 and np.isfinite(radius), gam, f"h(x) = |x|^{eps:g} + 1"),
    ]
    warnings = []
    span = None
    law = model.law
    if isinstance(law, L.DiscreteJoint):
        la = np.log(law.a[(law.a > 0) & (law.p > 0)])
        span = lattice_span(la)
        nonarith = span is None
        if not nonarith:
            warnings.append(f"log A is arithmetic with span {span!r}")
        checks.append(Check("nonarithmetic", nonarith, math.nan if span is None else span))
    else:
        checks.append(Check("nonarithmetic", True, math.nan, "continuous A component"))
    return ModelDiagnostics(
        alpha=alpha,
        mean_log_a=(elog, elog, elog),
        mean_a=model.mean_a(),
        mean_b=model.mean_b(),
        alpha_moment_residual=resid,
        epsilon=eps,
        drift_gamma=gam,
        drift_rho=rho,
        drift_radius=radius,
        lattice_span=span,
        checks=checks,
        warnings=warnings,
    )
