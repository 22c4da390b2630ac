"""Splitting-chain regeneration: minorization, split trajectories and i.i.d. cycles."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import stats as sps

from . import _kernels as K
from . import laws as L
from .errors import ConfigError, InvalidMode, NoCompleteCycle, NoMinorization, RejectionStall
from .model import Model, PathSample, _as_generator
from .rng import concat_blocks, run_blocks

MAX_PROPOSALS = 1_000_000
QUAD_NODES = 160


# ---------------------------------------------------------------- minorization


@dataclass(frozen=True)
class MinorizationParams:
    """Small set ``[-d, d]``, mass ``theta`` and regeneration law ``phi``.

    ``mode`` is ``"atom"`` (regenerate exactly when ``A = 0``; ``d = inf``)
    or ``"grid"`` (``phi`` uniform on ``e0``).  ``phi`` is a JSON-style
    description of the law; ``certified`` records the grid verification.
    """

    mode: str
    d: float
    theta: float
    e0: tuple
    phi: dict
    certified: bool = True
    grid: dict = field(default_factory=dict)
    # kernel data for density evaluation (grid mode); excluded from equality
    _quad: tuple = field(default=None, compare=False, repr=False)

    @cached_property
    def pack(self):
        """``(mpar, qa, qw, dpar)`` for the compiled kernels."""
        code = {"atom": 0, "grid": 1, "none": -1}[self.mode]
        d = self.d if math.isfinite(self.d) else 1e308
        mpar = np.array([code, d, self.theta, self.e0[0], self.e0[1]], dtype=float)
        if self._quad is None:
            return mpar, np.zeros(1), np.zeros(1), np.zeros(12)
        qa, qw, dpar = self._quad
        return mpar, qa, qw, dpar

    @cached_property
    def start_pack(self):
        """``(spar, sv, sc)`` describing ``phi`` for the kernels."""
        return pack_start(self.phi)

    def phi_cdf(self, x):
        return _phi_cdf(self.phi, x)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "d": self.d if math.isfinite(self.d) else "inf",
            "theta": self.theta,
            "e0": list(self.e0),
            "phi": self.phi,
            "certified": self.certified,
            "grid": self.grid,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def no_splitting() -> MinorizationParams:
    """Placeholder for kernels that never need split marks."""
    return MinorizationParams("none", 0.0, 0.0, (0.0, 0.0), {"point": {"value": 0.0}})


def pack_start(phi: dict):
    (name, p), = phi.items()
    if name == "uniform":
        return np.array([0.0, p["lo"], p["hi"]]), np.zeros(1), np.ones(1)
    if name == "normal":
        return np.array([1.0, p["mu"], p["sigma"]]), np.zeros(1), np.ones(1)
    if name == "point":
        return np.array([2.0, p["value"], 0.0]), np.zeros(1), np.ones(1)
    if name == "discrete":
        v = np.asarray(p["values"], dtype=float)
        c = np.cumsum(np.asarray(p["probs"], dtype=float))
        c[-1] = 1.0
        return np.array([3.0, 0.0, 0.0]), v, c
    raise ConfigError(f"unknown start law {name!r}")


def _phi_cdf(phi, x):
    (name, p), = phi.items()
    x = np.asarray(x, dtype=float)
    if name == "uniform":
        return np.clip((x - p["lo"]) / (p["hi"] - p["lo"]), 0.0, 1.0)
    if name == "normal":
        return L.Normal(p["mu"], p["sigma"]).cdf(x)
    if name == "point":
        return np.where(x >= p["value"], 1.0, 0.0)
    v = np.asarray(p["values"])
    pr = np.asarray(p["probs"])
    return np.array([pr[v <= xi].sum() for xi in np.atleast_1d(x)]).reshape(x.shape)


def _blaw_to_phi(b) -> dict:
    return L._marginal_to_dict(b)


def density_pack(model: Model):
    """Quadrature nodes and parameters for ``transition_density``."""
    a = model.a_component()
    b = model.b_component()
    if a is None:
        raise InvalidMode("density grid mode needs a continuous A component")
    law = model.law
    p0 = law.p0 if isinstance(law, L.AtomPlusDensity) else 0.0
    b0 = law.b_at_zero if isinstance(law, L.AtomPlusDensity) else L.Point(0.0)
    qa, qw = a.quadrature(QUAD_NODES)
    qw = qw * (1.0 - p0)
    norm = a._norm(a.power + 1) if isinstance(a, L.PowerUniform) else 0.0
    dpar = np.array([a.code, *a.params(), norm, b.code, *b.params(), p0, b0.code, *b0.params()], dtype=float)
    return qa, qw, dpar


def transition_density(model: Model, x, y):
    """``p(x, y)`` on the product of the arrays ``x`` and ``y``."""
    qa, qw, dpar = density_pack(model)
    return K.density_grid(np.atleast_1d(np.asarray(x, float)), np.atleast_1d(np.asarray(y, float)), qa, qw, dpar)


def find_minorization(model: Model, mode: str = "atom", *, d: float = 1.0, e0=(-0.5, 0.5),
                      grid: int = 200, cert_tol: float = 1e-9) -> MinorizationParams:
    """Construct a one-step minorization.

    ``mode="atom"`` uses the zero atom of ``A``.  ``mode="grid"`` takes
    ``theta = |e0| * min p(x, y)`` over a ``grid x grid`` lattice of
    ``[-d, d] x e0`` and certifies it on the staggered midpoint lattice.

    Raises
    ------
    InvalidMode
        Atom mode without a zero atom, or grid mode on a discrete law.
    NoMinorization
        Grid minimum below ``1e-12``.
    """
    if mode == "atom":
        theta = model.zero_prob
        if not theta > 0:
            raise InvalidMode("atom mode needs P(A = 0) > 0")
        law = model.law
        if isinstance(law, L.DiscreteJoint):
            z = law.a == 0
            vals, inv = np.unique(law.b[z], return_inverse=True)
            probs = np.bincount(inv, weights=law.p[z]) / theta
            phi = {"discrete": {"values": vals.tolist(), "probs": probs.tolist()}}
            if vals.size == 1:
                phi = {"point": {"value": float(vals[0])}}
        else:
            phi = _blaw_to_phi(law.b_at_zero)
        return MinorizationParams("atom", math.inf, float(theta), (-math.inf, math.inf), phi)
    if mode != "grid":
        raise InvalidMode(f"unknown minorization mode {mode!r}")
    if not (d > 0 and e0[1] > e0[0]):
        raise ConfigError("grid mode needs d > 0 and a nonempty e0")
    qa, qw, dpar = density_pack(model)
    xs = np.linspace(-d, d, grid)
    ys = np.linspace(e0[0], e0[1], grid)
    dens = K.density_grid(xs, ys, qa, qw, dpar)
    i, j = np.unravel_index(np.argmin(dens), dens.shape)
    pmin = float(dens[i, j])
    if pmin < 1e-12:
        raise NoMinorization(f"transition density minimum {pmin!r} at x={xs[i]!r}, y={ys[j]!r}")
    width = e0[1] - e0[0]
    theta = width * pmin
    xm = 0.5 * (xs[1:] + xs[:-1])
    ym = 0.5 * (ys[1:] + ys[:-1])
    mid = K.density_grid(xm, ym, qa, qw, dpar)
    slack = float(width * mid.min() - theta)
    meta = {
        "nx": grid,
        "ny": grid,
        "density_min": pmin,
        "argmin": [float(xs[i]), float(ys[j])],
        "midpoint_slack": slack,
        "quad_nodes": QUAD_NODES,
    }
    phi = {"uniform": {"lo": float(e0[0]), "hi": float(e0[1])}}
    return MinorizationParams("grid", float(d), float(theta), (float(e0[0]), float(e0[1])), phi,
                              slack >= -cert_tol, meta, (qa, qw, dpar))


def minorization_from_dict(model: Model, d: dict) -> MinorizationParams:
    """Build from a config block ``{"mode": "atom"}`` or ``{"mode": "grid", "d":..., "e0":..., "grid":...}``."""
    d = dict(d)
    mode = d.pop("mode", "atom")
    allowed = {"atom": set(), "grid": {"d", "e0", "grid"}}
    if mode not in allowed:
        raise ConfigError(f"unknown minorization mode {mode!r}")
    extra = set(d) - allowed[mode]
    if extra:
        raise ConfigError(f"unknown minorization keys {sorted(extra)}")
    if "e0" in d:
        d["e0"] = tuple(d["e0"])
    return find_minorization(model, mode, **d)


def _require_certified(minor: MinorizationParams):
    if minor.mode == "grid" and not minor.certified:
        raise NoMinorization("minorization failed its midpoint certification")
    if minor.mode == "none":
        raise InvalidMode("this operation needs a minorization")


# ---------------------------------------------------------------- split chains


@dataclass(frozen=True)
class SplitTrajectory:
    """A path with split marks.

    ``eta[n] = 1`` marks the step ``n -> n+1`` as a regeneration;
    ``regen_times`` lists the resulting ``r_i = n + 1``.
    """

    base: PathSample
    eta: np.ndarray
    regen_times: np.ndarray
    minor: MinorizationParams

    @property
    def states(self):
        return self.base.states

    @property
    def truncated(self) -> bool:
        """True when states remain after the last regeneration."""
        last = int(self.regen_times[-1]) if self.regen_times.size else 0
        return last < self.states.shape[0]


def _x0(minor, x0_law, gen):
    if isinstance(x0_law, str):
        if x0_law != "phi":
            raise ConfigError("x0_law is a number or 'phi'")
        spar, sv, sc = minor.start_pack
        return float(K.draw_start(gen, spar, sv, sc))
    return float(x0_law)


def simulate_split_chain(model: Model, minor: MinorizationParams, horizon: int, x0_law="phi",
                         rng=0) -> SplitTrajectory:
    """Forward simulation of the split chain.

    From ``x`` in the small set a ``theta``-coin decides between a draw from
    ``phi`` (a regeneration) and a draw from the residual kernel, sampled by
    rejection against the full kernel.  In atom mode both are exact: the
    coin is the zero atom.  Innovations are ``nan`` on ``phi`` draws.
    """
    _require_certified(minor)
    if horizon < 1:
        raise ConfigError("horizon must be >= 1")
    gen, stamp = _as_generator(rng)
    kind, da, db, dc, par = model.pack
    mpar, qa, qw, dpar = minor.pack
    spar, sv, sc = minor.start_pack
    x0 = _x0(minor, x0_law, gen)
    x, a, b, eta, status, props = K.split_chain_forward(
        gen, int(horizon), x0, kind, da, db, dc, par, mpar, qa, qw, dpar, spar, sv, sc, MAX_PROPOSALS
    )
    if status == 1:
        raise RejectionStall(f"residual sampler exceeded {MAX_PROPOSALS} proposals")
    in_small = np.abs(x[:-1]) <= minor.d
    regen = np.flatnonzero((eta == 1) & in_small) + 1
    return SplitTrajectory(PathSample(x0, x, a, b, stamp), eta, regen, minor)


# ---------------------------------------------------------------- cycles


@dataclass(frozen=True)
class CycleStats:
    """Complete cycles of a trajectory, plus the trailing partial cycle."""

    areas: np.ndarray
    abs_areas: np.ndarray
    lengths: np.ndarray
    starts: np.ndarray
    residual_states: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def count(self) -> int:
        return int(self.lengths.size)

    @property
    def mean_length(self) -> float:
        return float(self.lengths.mean())

    @property
    def mean_length_se(self) -> float:
        if self.count < 2:
            return math.inf
        return float(self.lengths.std(ddof=1) / math.sqrt(self.count))

    def mean_length_ci(self, level: float = 0.95):
        q = sps.norm.ppf(0.5 + level / 2)
        m, s = self.mean_length, self.mean_length_se
        return (m - q * s, m + q * s)

    @property
    def residual_area(self) -> float:
        return float(np.sum(self.residual_states))

    def total(self) -> float:
        """Complete-cycle areas then the residual, summed in that order."""
        acc = 0.0
        for v in self.areas:
            acc += v
        return acc + self.residual_area

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["cycle_index", "length", "area", "abs_area"])
            for i, (n, a, b) in enumerate(zip(self.lengths, self.areas, self.abs_areas)):
                w.writerow([i + 1, int(n), repr(float(a)), repr(float(b))])


def extract_cycles(traj, regen_times=None) -> CycleStats:
    """Split a trajectory into complete cycles ``[r_{i-1}, r_i)`` with ``r_0 = 0``.

    Accepts a :class:`SplitTrajectory` or ``(states, regen_times)``.
    """
    if regen_times is None:
        states = np.asarray(traj.states, dtype=float)
        regen = np.asarray(traj.regen_times, dtype=np.int64)
    else:
        states = np.asarray(traj, dtype=float)
        regen = np.asarray(regen_times, dtype=np.int64)
    regen = regen[regen <= states.shape[0]]
    if regen.size == 0:
        raise NoCompleteCycle("no regeneration inside the horizon")
    bounds = np.concatenate(([0], regen))
    if np.any(np.diff(bounds) <= 0):
        raise ConfigError("regeneration times must be strictly increasing and positive")
    areas = np.add.reduceat(states[: bounds[-1]], bounds[:-1])
    abs_areas = np.add.reduceat(np.abs(states[: bounds[-1]]), bounds[:-1])
    return CycleStats(areas, abs_areas, np.diff(bounds), states[bounds[:-1]], states[bounds[-1] :])


def sample_cycles(model: Model, minor: MinorizationParams, m: int, *, stop: str = "regen", seed: int = 0,
                  workers: int = 1, max_steps: int = 10**8) -> CycleStats:
    """``m`` independent cycles started from ``phi``.

    Split marks are drawn retrospectively from realized transitions, which
    gives the same cycle law as :func:`simulate_split_chain` at a fraction
    of the cost.  ``stop="return"`` ends excursions on return to ``[-d, d]``.
    """
    _require_certified(minor)
    stop_mode = {"regen": 0, "return": 1}[stop]
    kind, da, db, dc, par = model.pack
    mpar, qa, qw, dpar = minor.pack
    spar, sv, sc = minor.start_pack

    def block(g, cnt):
        return K.cycles_retro(g, cnt, stop_mode, max_steps, kind, da, db, dc, par, mpar, qa, qw, dpar,
                              spar, sv, sc)

    length, area, aarea, start, status = concat_blocks(run_blocks(block, seed, f"cycles-{stop}", m,
                                                                  workers=workers))
    if status.any():
        raise NoCompleteCycle(f"{int(status.sum())} cycles did not finish within {max_steps} steps")
    return CycleStats(area, aarea, length, start)


@dataclass
class TailTestReport:
    slope: float
    intercept: float
    r2: float
    kmax: int
    passed: bool
    degenerate: bool


def cycle_length_tail_test(stats_or_lengths, *, min_count: int = 5, r2_gate: float = 0.95) -> TailTestReport:
    """Least-squares fit of ``log P(length > k)`` against ``k``.

    Passes with a negative slope and ``R^2`` above ``r2_gate`` (geometric
    decay).  Constant lengths are reported as degenerate and pass.
    """
    lengths = np.asarray(getattr(stats_or_lengths, "lengths", stats_or_lengths))
    n = lengths.size
    if np.all(lengths == lengths[0]):
        return TailTestReport(-math.inf, 0.0, 1.0, int(lengths[0]), True, True)
    counts = np.bincount(lengths)
    surv = n - np.cumsum(counts)  # surv[k] = #{length > k}
    ks = np.flatnonzero(surv >= min_count)
    ks = ks[ks >= int(lengths.min()) - 1] if ks.size else ks
    if ks.size < 3:
        return TailTestReport(math.nan, math.nan, 0.0, int(lengths.max()), False, False)
    y = np.log(surv[ks] / n)
    fit = sps.linregress(ks, y)
    r2 = fit.rvalue**2
    return TailTestReport(float(fit.slope), float(fit.intercept), float(r2), int(ks[-1]),
                          bool(fit.slope < 0 and r2 > r2_gate), False)
