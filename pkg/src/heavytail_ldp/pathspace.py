"""Step-plus-drift paths on ``[0, 1]`` and the Skorokhod-type distances between them.

A :class:`StepFn` is ``xi(t) = drift * t + sum_{t_i <= t} s_i`` with the
convention ``xi(0-) = 0``; a nonzero starting value is stored as a jump at
time 0.

Distances are computed with a discrete Frechet dynamic program on sampled
graphs, using the ground metric ``max(|dx|, |dt|)``:

* ``m1prime_distance`` samples the completed graph, which includes the
  vertical segment of every jump and the segment from ``(0, 0)`` to
  ``(xi(0), 0)``.  Because monotone traversals of the two graphs are exactly
  the parametric representations, the DP on samples with spacing ``h``
  overestimates the distance by at most ``h``.
* ``j1_distance`` samples only the graph of the function itself, so a jump
  is a pair of consecutive points with no interior.  A matching may not
  travel along a jump, which is what separates it from the M1' distance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .errors import ConfigError, ResolutionOverflow

MAX_SAMPLES = 10_000_000


@dataclass(frozen=True, eq=False)
class StepFn:
    """Piecewise-linear path with finitely many jumps.

    Parameters
    ----------
    times, sizes
        Jump times in ``[0, 1]`` and nonzero sizes.  Duplicate times are
        merged and zero-size jumps dropped.
    drift
        Slope of the continuous part.
    initial
        Value at time 0 beyond any jump listed at 0.
    """

    times: np.ndarray
    sizes: np.ndarray
    drift: float = 0.0

    def __init__(self, times=(), sizes=(), drift: float = 0.0, initial: float = 0.0):
        t = np.asarray(times, dtype=float).ravel()
        s = np.asarray(sizes, dtype=float).ravel()
        if t.shape != s.shape:
            raise ConfigError("times and sizes must have equal length")
        if initial != 0.0:
            t = np.concatenate(([0.0], t))
            s = np.concatenate(([float(initial)], s))
        if t.size and (t.min() < 0.0 or t.max() > 1.0 or not np.all(np.isfinite(s))):
            raise ConfigError("jump times must lie in [0, 1] with finite sizes")
        order = np.argsort(t, kind="stable")
        t, s = t[order], s[order]
        if t.size > 1 and np.any(np.diff(t) == 0):
            ut, inv = np.unique(t, return_inverse=True)
            s = np.bincount(inv, weights=s)
            t = ut
        keep = s != 0.0
        object.__setattr__(self, "times", t[keep])
        object.__setattr__(self, "sizes", s[keep])
        object.__setattr__(self, "drift", float(drift))

    # ------------------------------------------------------------ evaluation
    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="right")
        cum = np.concatenate(([0.0], np.cumsum(self.sizes)))
        return self.drift * t + cum[idx]

    def left_limit(self, t):
        t = np.asarray(t, dtype=float)
        idx = np.searchsorted(self.times, t, side="left")
        cum = np.concatenate(([0.0], np.cumsum(self.sizes)))
        return self.drift * t + cum[idx]

    @property
    def n_jumps(self) -> int:
        return int(self.times.size)

    @property
    def initial(self) -> float:
        return float(self(0.0))

    @property
    def terminal(self) -> float:
        return float(self(1.0))

    def _extreme_points(self):
        ts = np.concatenate(([0.0], self.times, [1.0]))
        vals = np.concatenate((self(ts), self.left_limit(self.times[self.times > 0])))
        return vals

    def sup(self) -> float:
        """``sup_{t in [0,1]} xi(t)`` (left limits included as limit points)."""
        return float(self._extreme_points().max())

    def inf(self) -> float:
        return float(self._extreme_points().min())

    def sup_deviation(self, slope: float) -> float:
        """``sup_t |xi(t) - slope * t|``."""
        other = StepFn(self.times, self.sizes, self.drift - slope)
        pts = other._extreme_points()
        return float(np.abs(pts).max())

    def __eq__(self, other):
        return (
            isinstance(other, StepFn)
            and self.drift == other.drift
            and np.array_equal(self.times, other.times)
            and np.array_equal(self.sizes, other.sizes)
        )

    def __repr__(self):
        jumps = ", ".join(f"({t:g}, {s:g})" for t, s in zip(self.times, self.sizes))
        return f"StepFn(drift={self.drift:g}, jumps=[{jumps}])"

    def with_drift(self, drift: float) -> "StepFn":
        return StepFn(self.times, self.sizes, drift)

    # ------------------------------------------------------------ serialization
    def to_dict(self) -> dict:
        return {
            "drift": self.drift,
            "jumps": [{"t": float(t), "size": float(s)} for t, s in zip(self.times, self.sizes)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StepFn":
        extra = set(d) - {"drift", "jumps", "initial"}
        if extra:
            raise ConfigError(f"unknown StepFn keys {sorted(extra)}")
        jumps = d.get("jumps", [])
        for j in jumps:
            if set(j) != {"t", "size"}:
                raise ConfigError(f"each jump needs exactly 't' and 'size', got {sorted(j)}")
        return cls(
            [j["t"] for j in jumps],
            [j["size"] for j in jumps],
            float(d.get("drift", 0.0)),
            float(d.get("initial", 0.0)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "StepFn":
        return cls.from_dict(json.loads(text))


# ---------------------------------------------------------------- graphs


@dataclass(frozen=True)
class CompletedGraph:
    """Vertices ``(x, t)`` of the completed graph in traversal order.

    Starts at the anchor ``(0, 0)``; each jump contributes a vertical
    segment from the left limit to the new value.
    """

    vertices: np.ndarray  # shape (k, 2), columns (x, t)

    @classmethod
    def of(cls, xi: StepFn) -> "CompletedGraph":
        pts = [(0.0, 0.0)]
        level = 0.0
        for t, s in zip(xi.times, xi.sizes):
            pts.append((level + xi.drift * t, t))
            level += s
            pts.append((level + xi.drift * t, t))
        pts.append((level + xi.drift, 1.0))
        v = np.array(pts)
        # drop consecutive duplicates
        keep = np.ones(len(v), dtype=bool)
        keep[1:] = np.any(v[1:] != v[:-1], axis=1)
        return cls(v[keep])

    def length(self) -> float:
        d = np.abs(np.diff(self.vertices, axis=0)).max(axis=1)
        return float(d.sum())

    def sample(self, h: float) -> np.ndarray:
        """Points along the polyline with L-infinity spacing at most ``h``."""
        return _densify(self.vertices, h, np.ones(len(self.vertices) - 1, dtype=bool))


def _densify(v: np.ndarray, h: float, fill: np.ndarray) -> np.ndarray:
    if len(v) == 1:
        return v.copy()
    seg = np.abs(np.diff(v, axis=0)).max(axis=1)
    counts = np.where(fill, np.maximum(1, np.ceil(seg / h).astype(np.int64)), 1)
    total = int(counts.sum()) + 1
    if total > MAX_SAMPLES:
        raise ResolutionOverflow(f"{total} graph samples exceed the limit {MAX_SAMPLES}")
    out = np.empty((total, 2))
    pos = 0
    for i in range(len(v) - 1):
        c = counts[i]
        frac = np.arange(c) / c
        out[pos : pos + c] = v[i] + frac[:, None] * (v[i + 1] - v[i])
        pos += c
    out[pos] = v[-1]
    return out


def _function_graph(xi: StepFn) -> tuple[np.ndarray, np.ndarray]:
    """Vertices of the plain graph, with a flag for segments that may be filled."""
    pts = [(xi.initial, 0.0)]
    fill = []
    level = xi.initial
    for t, s in zip(xi.times, xi.sizes):
        if t == 0.0:
            continue
        pts.append((level + xi.drift * t, t))
        fill.append(True)
        level += s
        pts.append((level + xi.drift * t, t))
        fill.append(False)
    pts.append((level + xi.drift, 1.0))
    fill.append(True)
    return np.array(pts), np.array(fill, dtype=bool)


def _refine(sample_a, sample_b, eps: float) -> float:
    if not eps > 0:
        raise ConfigError("eps must be > 0")
    h = eps / 2.0
    prev = K.discrete_frechet_linf(sample_a(h), sample_b(h))
    while True:
        h /= 2.0
        cur = K.discrete_frechet_linf(sample_a(h), sample_b(h))
        if abs(cur - prev) < eps / 4.0:
            return float(min(cur, prev))
        prev = cur


def m1prime_distance(xi: StepFn, zeta: StepFn, eps: float = 1e-2) -> float:
    """M1' distance within ``eps``."""
    if xi == zeta:
        return 0.0
    ga, gb = CompletedGraph.of(xi), CompletedGraph.of(zeta)
    return _refine(ga.sample, gb.sample, eps)


def j1_distance(xi: StepFn, zeta: StepFn, eps: float = 1e-2) -> float:
    """J1 distance within the sampling resolution ``eps``."""
    if xi == zeta:
        return 0.0
    va, fa = _function_graph(xi)
    vb, fb = _function_graph(zeta)
    return _refine(lambda h: _densify(va, h, fa), lambda h: _densify(vb, h, fb), eps)


def uniform_distance(xi: StepFn, zeta: StepFn) -> float:
    """``sup_t |xi(t) - zeta(t)|`` (exact)."""
    diff = StepFn(
        np.concatenate((xi.times, zeta.times)),
        np.concatenate((xi.sizes, -zeta.sizes)),
        xi.drift - zeta.drift,
    )
    return diff.sup_deviation(0.0)


# ---------------------------------------------------------------- jump geometry


def extract_big_jumps(xi: StepFn, c: float, signed: bool = False) -> StepFn:
    """Pure-jump path keeping jumps of size ``>= c`` (``|size| >= c`` when ``signed``)."""
    if not c > 0:
        raise ConfigError("c must be > 0")
    keep = np.abs(xi.sizes) >= c if signed else xi.sizes >= c
    return StepFn(xi.times[keep], xi.sizes[keep])


def _candidate_values(xi: StepFn, grid: int) -> np.ndarray:
    """Values at ``0-`` and at left limits and values of candidate times, in time order."""
    ts = xi.times
    if xi.drift != 0.0:
        ts = np.union1d(ts, np.linspace(0.0, 1.0, grid + 1))
    else:
        ts = np.union1d(ts, [0.0, 1.0])
    vals = [0.0]
    for t in ts:
        if t > 0.0:
            vals.append(float(xi.left_limit(t)))
        vals.append(float(xi(t)))
    return np.asarray(vals)


def min_jumps_to_reach(xi: StepFn, delta: float, signed: bool = False, grid: int = 400) -> int:
    """Longest chain of times with successive increments exceeding ``delta`` in size.

    Returns the largest ``k`` with ``t_0 < ... < t_k`` such that
    ``|xi(t_i) - xi(t_{i-1})| > delta`` (alternating in sign when
    ``signed``).  Left limits and ``xi(0-) = 0`` are admissible points.
    Drift paths are probed on a time grid of ``grid`` cells, which can only
    undercount.
    """
    if not delta > 0:
        raise ConfigError("delta must be > 0")
    v = _candidate_values(xi, grid)
    n = v.size
    if not signed:
        best = np.zeros(n, dtype=np.int64)
        for i in range(1, n):
            ok = np.abs(v[i] - v[:i]) > delta
            if ok.any():
                best[i] = best[:i][ok].max() + 1
        return int(best.max())
    # up[i] / dn[i]: longest alternating chain ending at i with a last step up / down
    up = np.zeros(n, dtype=np.int64)
    dn = np.zeros(n, dtype=np.int64)
    # a chain may start anywhere, so a zero entry doubles as "start here"
    for i in range(1, n):
        rise = v[i] - v[:i] > delta
        fall = v[:i] - v[i] > delta
        if rise.any():
            up[i] = dn[:i][rise].max() + 1
        if fall.any():
            dn[i] = up[:i][fall].max() + 1
    return int(max(up.max(), dn.max()))
