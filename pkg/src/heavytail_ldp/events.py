"""Path events built from a small set of primitives, and their jump geometry.

The jump index of an event is the least number of jumps a drift-``z``
step path needs to enter it.  For a fixed jump count, the path
``z t + sum_i s_i 1{t_i <= t}`` evaluated at any of the points

    0, 1, fixed slice times, t_i- and t_i

is affine in ``(t, s)`` once the order of the jump times relative to the
slice times is fixed.  Every primitive is then one linear constraint, or a
choice among linear constraints (which point realizes a running sup, say),
so feasibility reduces to a finite family of linear programs.

The separation radius is found the same way: any path within M1' distance
``rho`` of the event satisfies a relaxed event in which levels move by
``rho``, slice times widen to windows of half-width ``rho`` and bands
widen by ``rho (1 + |slope|)``.  Infeasibility of the relaxed event with
one jump fewer certifies the radius.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .errors import ConfigError, NotSeparated, UnsupportedEvent
from .pathspace import StepFn

MAX_PRIMITIVES = 6


# ---------------------------------------------------------------- the language


class EventSet:
    """Base class; use the primitives and :class:`And` / :class:`Or`."""

    def contains(self, xi: StepFn) -> bool:
        return bool(self.evaluate(summarize_stepfn(xi, self.slice_times(), self.band_slopes())))

    def evaluate(self, summary: dict) -> np.ndarray:
        """Membership from path summaries (see :func:`summarize_stepfn`)."""
        raise NotImplementedError

    def primitives(self) -> list:
        return [self]

    def slice_times(self) -> list:
        return sorted({p.t for p in self.primitives() if isinstance(p, TimeSlice)})

    def band_slopes(self) -> list:
        return sorted({p.slope for p in self.primitives() if isinstance(p, BandAround)})

    def dnf(self) -> list:
        """Disjunction of conjunctions, each a tuple of primitives."""
        return [(self,)]

    def __and__(self, other):
        return And(self, other)

    def __or__(self, other):
        return Or(self, other)


@dataclass(frozen=True)
class TerminalAtLeast(EventSet):
    level: float

    def evaluate(self, s):
        return s["terminal"] >= self.level


@dataclass(frozen=True)
class TerminalAtMost(EventSet):
    level: float

    def evaluate(self, s):
        return s["terminal"] <= self.level


@dataclass(frozen=True)
class RunningSupAtLeast(EventSet):
    level: float

    def evaluate(self, s):
        return s["sup"] >= self.level


@dataclass(frozen=True)
class RunningInfAtMost(EventSet):
    level: float

    def evaluate(self, s):
        return s["inf"] <= self.level


@dataclass(frozen=True)
class TimeSlice(EventSet):
    """``xi(t) >= level`` (or ``<= level`` with ``above=False``)."""

    t: float
    level: float
    above: bool = True

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ConfigError("slice time must lie in [0, 1]")

    def evaluate(self, s):
        v = s["slices"][self.t]
        return v >= self.level if self.above else v <= self.level


@dataclass(frozen=True)
class BandAround(EventSet):
    """``sup_t |xi(t) - slope * t| <= radius``."""

    slope: float
    radius: float

    def evaluate(self, s):
        return s["bands"][self.slope] <= self.radius


@dataclass(frozen=True, init=False)
class And(EventSet):
    children: tuple

    def __init__(self, *children):
        object.__setattr__(self, "children", tuple(children))

    def evaluate(self, s):
        out = True
        for c in self.children:
            out = np.logical_and(out, c.evaluate(s))
        return out

    def primitives(self):
        return [p for c in self.children for p in c.primitives()]

    def dnf(self):
        return [sum(combo, ()) for combo in itertools.product(*(c.dnf() for c in self.children))]


@dataclass(frozen=True, init=False)
class Or(EventSet):
    children: tuple

    def __init__(self, *children):
        object.__setattr__(self, "children", tuple(children))

    def evaluate(self, s):
        out = False
        for c in self.children:
            out = np.logical_or(out, c.evaluate(s))
        return out

    def primitives(self):
        return [p for c in self.children for p in c.primitives()]

    def dnf(self):
        return [conj for c in self.children for conj in c.dnf()]


def barrier_event(a_plus: float, a_minus: float) -> EventSet:
    """``{xi(1) >= a_plus} and {inf xi <= -a_minus}``."""
    return And(TerminalAtLeast(a_plus), RunningInfAtMost(-a_minus))


# ---------------------------------------------------------------- JSON

_LEAVES = {
    "terminal_at_least": TerminalAtLeast,
    "terminal_at_most": TerminalAtMost,
    "sup_at_least": RunningSupAtLeast,
    "inf_at_most": RunningInfAtMost,
}


def event_from_dict(d) -> EventSet:
    """Parse e.g. ``{"and": [{"terminal_at_least": 1}, {"inf_at_most": -1}]}``."""
    if not isinstance(d, dict) or len(d) != 1:
        raise ConfigError(f"an event is an object with exactly one key, got {d!r}")
    (key, val), = d.items()
    if key in _LEAVES:
        return _LEAVES[key](float(val))
    if key in ("and", "or"):
        if not isinstance(val, list) or not val:
            raise ConfigError(f"'{key}' takes a nonempty list")
        kids = [event_from_dict(v) for v in val]
        return And(*kids) if key == "and" else Or(*kids)
    if key == "time_slice":
        keys = set(val)
        if keys not in ({"t", "at_least"}, {"t", "at_most"}):
            raise ConfigError("time_slice takes 't' and one of 'at_least' / 'at_most'")
        if "at_least" in val:
            return TimeSlice(float(val["t"]), float(val["at_least"]), True)
        return TimeSlice(float(val["t"]), float(val["at_most"]), False)
    if key == "band":
        if set(val) != {"slope", "radius"}:
            raise ConfigError("band takes 'slope' and 'radius'")
        return BandAround(float(val["slope"]), float(val["radius"]))
    raise ConfigError(f"unknown event primitive {key!r}")


def event_to_dict(e: EventSet) -> dict:
    for name, cls in _LEAVES.items():
        if type(e) is cls:
            return {name: e.level}
    if isinstance(e, (And, Or)):
        return {"and" if isinstance(e, And) else "or": [event_to_dict(c) for c in e.children]}
    if isinstance(e, TimeSlice):
        return {"time_slice": {"t": e.t, ("at_least" if e.above else "at_most"): e.level}}
    if isinstance(e, BandAround):
        return {"band": {"slope": e.slope, "radius": e.radius}}
    raise TypeError(e)


# ---------------------------------------------------------------- summaries


def summarize_stepfn(xi: StepFn, slice_times=(), band_slopes=()) -> dict:
    return {
        "terminal": xi.terminal,
        "inf": xi.inf(),
        "sup": xi.sup(),
        "slices": {t: float(xi(t)) for t in slice_times},
        "bands": {z: xi.sup_deviation(z) for z in band_slopes},
    }


def summarize_jumps(times: np.ndarray, sizes: np.ndarray, drift: float, slice_times=(), band_slopes=()) -> dict:
    """Vectorized summaries for many pure-jump-plus-drift paths.

    ``times`` and ``sizes`` have shape ``(R, J)``; jumps need not be sorted
    but are assumed to occur at distinct times within a row (jumps sharing a
    time are treated as consecutive, so a cancelling pair shows up as a spike).
    """
    times = np.atleast_2d(np.asarray(times, dtype=float))
    sizes = np.atleast_2d(np.asarray(sizes, dtype=float))
    R = times.shape[0]
    order = np.argsort(times, axis=1, kind="stable")
    t = np.take_along_axis(times, order, axis=1)
    s = np.take_along_axis(sizes, order, axis=1)
    cum = np.cumsum(s, axis=1)
    before = cum - s
    zeros = np.zeros((R, 1))
    ones = np.ones((R, 1))

    def points(slope):
        d = drift - slope
        after = d * t + cum
        left = d * t + before
        return np.concatenate([zeros, left, after, d * ones + cum[:, -1:] if s.shape[1] else d * ones], axis=1)

    pts = points(0.0)
    terminal = pts[:, -1]
    slices = {}
    for tau in slice_times:
        slices[tau] = drift * tau + np.where(t <= tau, s, 0.0).sum(axis=1)
    bands = {z: np.abs(points(z)).max(axis=1) for z in band_slopes}
    return {"terminal": terminal, "inf": pts.min(axis=1), "sup": pts.max(axis=1), "slices": slices, "bands": bands}


# ---------------------------------------------------------------- linear programs


@dataclass
class _Affine:
    coef: np.ndarray
    const: float = 0.0


class _Layout:
    """Variables ``t_1..t_j, s_1..s_j, margin`` of the feasibility LP."""

    def __init__(self, j, drift, fixed):
        self.j = j
        self.z = drift
        self.fixed = fixed  # sorted fixed times strictly inside (0, 1)
        self.n = 2 * j + 1

    def zero(self):
        return _Affine(np.zeros(self.n))

    def t(self, i):
        a = self.zero()
        a.coef[i] = 1.0
        return a

    def value_after(self, i):  # xi(t_i)
        a = self.zero()
        a.coef[i] = self.z
        a.coef[self.j : self.j + i + 1] = 1.0
        return a

    def value_before(self, i):  # xi(t_i-)
        a = self.zero()
        a.coef[i] = self.z
        a.coef[self.j : self.j + i] = 1.0
        return a

    def terminal(self):
        a = self.zero()
        a.coef[self.j : 2 * self.j] = 1.0
        a.const = self.z
        return a

    def at_fixed(self, q, slots):
        """``xi(f_q)`` when jump ``i`` sits in slot ``slots[i]`` (slot k spans [f_k, f_{k+1}])."""
        a = self.zero()
        a.const = self.z * self.fixed[q]
        for i, k in enumerate(slots):
            if k <= q:  # jump at or before f_q  (f_0 = 0 is slot 0's start)
                a.coef[self.j + i] = 1.0
        return a

    def witnesses(self, slots, window=None):
        """Candidate points ``(affine value, time-constraint rows)``.

        With ``window=(lo, hi)`` only points inside the window are returned;
        for jump points the window becomes extra linear constraints.
        """
        out = []
        fx = self.fixed
        allpts = [(0.0, self.zero()), (1.0, self.terminal())]
        allpts += [(fx[q], self.at_fixed(q, slots)) for q in range(len(fx))]
        for tm, val in allpts:
            if window is None or window[0] - 1e-15 <= tm <= window[1] + 1e-15:
                out.append((val, []))
        for i in range(self.j):
            extra = []
            if window is not None:
                extra = [(self.t(i), window[0], window[1])]
            out.append((self.value_after(i), extra))
            out.append((self.value_before(i), extra))
        return out


def _slot_patterns(j, nslots):
    return list(itertools.combinations_with_replacement(range(nslots), j))


def _fixed_times(conj, rho):
    pts = set()
    for p in conj:
        if isinstance(p, TimeSlice):
            if rho > 0:
                pts.update((max(0.0, p.t - rho), min(1.0, p.t + rho)))
            else:
                pts.add(p.t)
    return sorted(x for x in pts if 0.0 < x < 1.0)


def _solve(conj, j, drift, rho, one_sided, want_witness=False):
    """Feasibility of one conjunction with ``j`` jumps; returns (feasible, witness)."""
    fixed = _fixed_times(conj, rho)
    lay = _Layout(j, drift, fixed)
    bounds_f = [0.0] + fixed + [1.0]
    nslots = len(bounds_f) - 1
    mg = 2 * j  # margin variable index
    for slots in _slot_patterns(j, nslots):
        base_ub, base_rhs = [], []

        def le(aff, rhs, margin=True):
            # aff <= rhs  (with margin: aff + m <= rhs)
            row = aff.coef.copy()
            if margin:
                row[mg] += 1.0
            base_ub.append(row)
            base_rhs.append(rhs - aff.const)

        def ge(aff, rhs, margin=True):
            le(_Affine(-aff.coef, -aff.const), -rhs, margin)

        # slot and order constraints on jump times
        for i, k in enumerate(slots):
            lo, hi = bounds_f[k], bounds_f[k + 1]
            ge(lay.t(i), lo, margin=k > 0)
            le(lay.t(i), hi, margin=False)
            if i > 0:
                ge(_Affine(lay.t(i).coef - lay.t(i - 1).coef), 0.0)
            if one_sided:
                ge(_Affine(lay.zero().coef + np.eye(lay.n)[j + i]), 0.0)
        choice_sets = []
        for p in conj:
            if isinstance(p, TerminalAtLeast):
                ge(lay.terminal(), p.level - rho)
            elif isinstance(p, TerminalAtMost):
                le(lay.terminal(), p.level + rho)
            elif isinstance(p, RunningSupAtLeast):
                choice_sets.append([(w, ex, p.level - rho, True) for w, ex in lay.witnesses(slots)])
            elif isinstance(p, RunningInfAtMost):
                choice_sets.append([(w, ex, p.level + rho, False) for w, ex in lay.witnesses(slots)])
            elif isinstance(p, TimeSlice):
                if rho > 0:
                    win = (max(0.0, p.t - rho), min(1.0, p.t + rho))
                    lvl = p.level - rho if p.above else p.level + rho
                    choice_sets.append([(w, ex, lvl, p.above) for w, ex in lay.witnesses(slots, win)])
                else:
                    q = fixed.index(p.t) if p.t in fixed else None
                    if q is None:
                        val = lay.zero() if p.t == 0.0 else lay.terminal()
                        if p.t == 0.0:
                            # xi(0) is the total of jumps placed at time 0
                            choice_sets.append(_time_zero_choices(lay, p))
                            continue
                    else:
                        val = lay.at_fixed(q, slots)
                    (ge if p.above else le)(val, p.level)
            elif isinstance(p, BandAround):
                width = p.radius + rho * (1.0 + abs(p.slope))
                for w, tm in _all_points_with_time(lay, slots):
                    dev = _Affine(w.coef - p.slope * tm.coef, w.const - p.slope * tm.const)
                    le(dev, width)
                    ge(dev, -width)
            else:  # pragma: no cover - And/Or never reach here
                raise UnsupportedEvent(f"unexpected primitive {p!r}")
        for combo in itertools.product(*choice_sets) if choice_sets else [()]:
            A = list(base_ub)
            b = list(base_rhs)
            for w, extra, lvl, above in combo:
                row = (-w.coef if above else w.coef).copy()
                row[mg] += 1.0
                A.append(row)
                b.append((-(lvl - w.const)) if above else (lvl - w.const))
                for tv, lo, hi in extra:
                    A.append(-tv.coef)
                    b.append(-lo)
                    A.append(tv.coef.copy())
                    b.append(hi)
            bounds = [(0.0, 1.0)] * j + [(None, None)] * j + [(0.0, 1.0)]
            c = np.zeros(lay.n)
            c[mg] = -1.0
            res = linprog(c, A_ub=np.array(A) if A else None, b_ub=np.array(b) if b else None,
                          bounds=bounds, method="highs")
            if res.status == 0:
                wit = None
                if want_witness:
                    x = res.x
                    wit = StepFn(x[:j], x[j : 2 * j], drift)
                return True, wit
    return False, None


def _time_zero_choices(lay, p):
    # xi(0) equals the sum of the first k jumps when exactly those sit at t = 0
    out = []
    for k in range(lay.j + 1):
        val = lay.zero()
        val.coef[lay.j : lay.j + k] = 1.0
        extra = [(lay.t(i), 0.0, 0.0) for i in range(k)]
        out.append((val, extra, p.level, p.above))
    return out


def _all_points_with_time(lay, slots):
    """Every evaluation point with its time as an affine expression."""
    pts = []
    one = lay.zero()
    one.const = 1.0
    pts.append((lay.zero(), lay.zero()))
    pts.append((lay.terminal(), one))
    for q, f in enumerate(lay.fixed):
        tm = lay.zero()
        tm.const = f
        pts.append((lay.at_fixed(q, slots), tm))
    for i in range(lay.j):
        pts.append((lay.value_after(i), lay.t(i)))
        pts.append((lay.value_before(i), lay.t(i)))
    return pts


def _feasible(event, j, drift, rho, one_sided, want_witness=False):
    for conj in event.dnf():
        ok, wit = _solve(conj, j, drift, rho, one_sided, want_witness)
        if ok:
            return True, wit
    return False, None


@dataclass
class JumpIndexCertificate:
    """Result of :func:`event_jump_index`.

    ``radius`` is a lower bound on the M1' distance from the event to every
    drift path with fewer than ``j`` jumps (``inf`` when ``j == 0``);
    ``witness`` is a member of the event with at most ``j`` jumps.
    """

    j: int
    radius: float
    separated: bool
    witness: StepFn | None
    drift: float
    one_sided: bool
    notes: list = field(default_factory=list)


def event_jump_index(event: EventSet, z: float, *, one_sided: bool = False, max_jumps: int = 6,
                     require_separation: bool = False, rho_max: float = 1e3,
                     rho_tol: float = 1e-7) -> JumpIndexCertificate:
    """Least number of jumps for a drift-``z`` step path to lie in ``event``.

    Parameters
    ----------
    one_sided
        Only nonnegative jumps (the one-sided index).
    require_separation
        Raise :class:`NotSeparated` instead of returning a zero radius.
    """
    prims = event.primitives()
    if len(prims) > MAX_PRIMITIVES:
        raise UnsupportedEvent(f"{len(prims)} primitives exceed the budget of {MAX_PRIMITIVES}")
    found = None
    for j in range(max_jumps + 1):
        ok, wit = _feasible(event, j, z, 0.0, one_sided, want_witness=True)
        if ok:
            found = (j, wit)
            break
    if found is None:
        raise UnsupportedEvent(f"no path with at most {max_jumps} jumps lies in the event")
    j, wit = found
    if j == 0:
        return JumpIndexCertificate(0, float("inf"), True, StepFn(drift=z), z, one_sided)
    infeasible = lambda rho: not _feasible(event, j - 1, z, rho, one_sided)[0]
    if not infeasible(rho_tol):
        if require_separation:
            raise NotSeparated("paths with fewer jumps come arbitrarily close to the event")
        return JumpIndexCertificate(j, 0.0, False, wit, z, one_sided)
    lo, hi = rho_tol, 1.0
    while infeasible(hi):
        lo, hi = hi, 2 * hi
        if hi > rho_max:
            return JumpIndexCertificate(j, float("inf"), True, wit, z, one_sided)
    while hi - lo > rho_tol * max(1.0, lo):
        mid = 0.5 * (lo + hi)
        if infeasible(mid):
            lo = mid
        else:
            hi = mid
    return JumpIndexCertificate(j, lo, True, wit, z, one_sided)
