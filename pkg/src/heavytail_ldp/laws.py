"""Distribution families for the innovation pair (A, B).

The family set is closed on purpose: each member has closed-form moments
``E A^s`` and an exact exponential tilt, which the change-of-measure
estimators rely on.

Families
--------
DiscreteJoint
    Finitely many atoms ``(a, b, p)``.
LognormalNormalIndep
    ``log A ~ N(mu_a, sigma_a^2)`` independent of ``B ~ N(mu_b, sigma_b^2)``.
AtomPlusDensity
    ``P(A = 0) = p0`` with ``B | A = 0`` drawn from ``b_at_zero``; on
    ``A > 0`` the pair is independent with marginals ``a`` and ``b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import integrate, special

from .errors import ConfigError, UntiltableFamily

# kernel codes
A_LOGNORMAL, A_POWER = 0, 1
B_NORMAL, B_UNIFORM, B_POINT = 0, 1, 2
KIND_DISCRETE, KIND_DENSITY = 0, 1


# ---------------------------------------------------------------- B marginals


@dataclass(frozen=True)
class Normal:
    mu: float = 0.0
    sigma: float = 1.0

    code = B_NORMAL

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ConfigError("Normal sigma must be >= 0")

    def params(self):
        return (self.mu, self.sigma)

    def mean(self) -> float:
        return self.mu

    def abs_moment(self, m: float) -> float:
        if self.sigma == 0:
            return abs(self.mu) ** m
        if self.mu == 0:
            # E|N(0, s^2)|^m = s^m 2^{m/2} Gamma((m+1)/2) / sqrt(pi)
            return self.sigma**m * 2 ** (m / 2) * special.gamma((m + 1) / 2) / math.sqrt(math.pi)
        f = lambda x: abs(x) ** m * math.exp(-0.5 * ((x - self.mu) / self.sigma) ** 2)
        lo, hi = self.mu - 40 * self.sigma, self.mu + 40 * self.sigma
        pts = [0.0] if lo < 0 < hi else None
        val, _ = integrate.quad(f, lo, hi, points=pts, limit=200)
        return val / (self.sigma * math.sqrt(2 * math.pi))

    def sample(self, gen, n):
        return self.mu + self.sigma * gen.standard_normal(n)

    def cdf(self, x):
        if self.sigma == 0:
            return np.where(np.asarray(x) >= self.mu, 1.0, 0.0)
        return special.ndtr((np.asarray(x) - self.mu) / self.sigma)

    def support(self):
        if self.sigma == 0:
            return (self.mu, self.mu)
        return (-math.inf, math.inf)


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    code = B_UNIFORM

    def __post_init__(self):
        if not self.hi > self.lo:
            raise ConfigError("Uniform requires hi > lo")

    def params(self):
        return (self.lo, self.hi)

    def mean(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def abs_moment(self, m: float) -> float:
        def prim(x):  # antiderivative of |x|^m
            return math.copysign(abs(x) ** (m + 1) / (m + 1), x)

        return (prim(self.hi) - prim(self.lo)) / (self.hi - self.lo)

    def sample(self, gen, n):
        return self.lo + (self.hi - self.lo) * gen.random(n)

    def cdf(self, x):
        return np.clip((np.asarray(x) - self.lo) / (self.hi - self.lo), 0.0, 1.0)

    def support(self):
        return (self.lo, self.hi)


@dataclass(frozen=True)
class Point:
    value: float

    code = B_POINT

    def params(self):
        return (self.value, 0.0)

    def mean(self) -> float:
        return self.value

    def abs_moment(self, m: float) -> float:
        return abs(self.value) ** m

    def sample(self, gen, n):
        return np.full(n, float(self.value))

    def cdf(self, x):
        return np.where(np.asarray(x) >= self.value, 1.0, 0.0)

    def support(self):
        return (self.value, self.value)


BLaw = Union[Normal, Uniform, Point]


# ---------------------------------------------------------------- A marginals


@dataclass(frozen=True)
class Lognormal:
    """``log A ~ N(mu, sigma^2)``."""

    mu: float
    sigma: float

    code = A_LOGNORMAL

    def __post_init__(self):
        if not self.sigma > 0:
            raise ConfigError("Lognormal sigma must be > 0")

    def params(self):
        return (self.mu, self.sigma, 0.0)

    def moment(self, s: float) -> float:
        return math.exp(self.mu * s + 0.5 * self.sigma**2 * s**2)

    def dmoment(self, s: float) -> float:
        """``E A^s log A``."""
        return (self.mu + self.sigma**2 * s) * self.moment(s)

    def mean_log(self) -> float:
        return self.mu

    def tilt(self, s: float) -> "Lognormal":
        return Lognormal(self.mu + s * self.sigma**2, self.sigma)

    def pdf(self, a):
        a = np.asarray(a, dtype=float)
        out = np.zeros_like(a)
        pos = a > 0
        z = (np.log(a[pos]) - self.mu) / self.sigma
        out[pos] = np.exp(-0.5 * z * z) / (a[pos] * self.sigma * math.sqrt(2 * math.pi))
        return out

    def sample(self, gen, n):
        return np.exp(self.mu + self.sigma * gen.standard_normal(n))

    def quadrature(self, n: int = 96):
        """Nodes/weights with ``sum w g(a) ~= E g(A)`` (Gauss-Hermite in log A)."""
        t, w = np.polynomial.hermite.hermgauss(n)
        return np.exp(self.mu + self.sigma * math.sqrt(2.0) * t), w / math.sqrt(math.pi)

    def support(self):
        return (0.0, math.inf)


@dataclass(frozen=True)
class PowerUniform:
    """Density proportional to ``a^power`` on ``[lo, hi]`` (``power=0`` is uniform)."""

    lo: float
    hi: float
    power: float = 0.0

    code = A_POWER

    def __post_init__(self):
        if not (0 <= self.lo < self.hi):
            raise ConfigError("PowerUniform requires 0 <= lo < hi")
        if self.lo == 0 and self.power <= -1:
            raise ConfigError("PowerUniform with lo = 0 needs power > -1")

    def params(self):
        return (self.lo, self.hi, self.power)

    def _norm(self, c: float) -> float:
        # int_lo^hi a^{c-1} da
        if abs(c) < 1e-14:
            return math.log(self.hi / self.lo)
        lo_term = self.lo**c if self.lo > 0 else 0.0
        return (self.hi**c - lo_term) / c

    def _dnorm(self, c: float) -> float:
        # d/dc int_lo^hi a^{c-1} da = int a^{c-1} log a da
        def term(x):
            return x**c * math.log(x) if x > 0 else 0.0

        if abs(c) < 1e-14:
            return 0.5 * (math.log(self.hi) ** 2 - math.log(self.lo) ** 2)
        lo_c = self.lo**c if self.lo > 0 else 0.0
        return (term(self.hi) - term(self.lo)) / c - (self.hi**c - lo_c) / c**2

    def moment(self, s: float) -> float:
        k = self.power + 1
        return self._norm(k + s) / self._norm(k)

    def dmoment(self, s: float) -> float:
        k = self.power + 1
        return self._dnorm(k + s) / self._norm(k)

    def mean_log(self) -> float:
        return self.dmoment(0.0)

    def tilt(self, s: float) -> "PowerUniform":
        return PowerUniform(self.lo, self.hi, self.power + s)

    def pdf(self, a):
        a = np.asarray(a, dtype=float)
        inside = (a >= self.lo) & (a <= self.hi) & (a > 0)
        out = np.zeros_like(a)
        out[inside] = a[inside] ** self.power / self._norm(self.power + 1)
        return out

    def sample(self, gen, n):
        u = gen.random(n)
        c = self.power + 1
        if abs(c) < 1e-14:
            return self.lo * (self.hi / self.lo) ** u
        lo_c = self.lo**c if self.lo > 0 else 0.0
        return (lo_c + u * (self.hi**c - lo_c)) ** (1.0 / c)

    def quadrature(self, n: int = 96):
        x, w = np.polynomial.legendre.leggauss(n)
        a = 0.5 * (self.hi - self.lo) * x + 0.5 * (self.hi + self.lo)
        return a, 0.5 * (self.hi - self.lo) * w * self.pdf(a)

    def support(self):
        return (self.lo, self.hi)


ALaw = Union[Lognormal, PowerUniform]


# ---------------------------------------------------------------- joint families


@dataclass(frozen=True)
class DiscreteJoint:
    """Atoms ``(a, b, p)`` of the joint law of ``(A, B)``."""

    atoms: tuple

    def __post_init__(self):
        atoms = tuple((float(a), float(b), float(p)) for a, b, p in self.atoms)
        object.__setattr__(self, "atoms", atoms)
        if not atoms:
            raise ConfigError("DiscreteJoint needs at least one atom")
        ps = np.array([p for _, _, p in atoms])
        if np.any(ps < 0) or np.any(ps > 1):
            raise ConfigError("atom probabilities must lie in [0, 1]")
        if abs(ps.sum() - 1.0) > 1e-12:
            raise ConfigError(f"atom probabilities sum to {ps.sum()!r}, not 1")
        if any(a < 0 for a, _, _ in atoms):
            raise ConfigError("support of A must lie in [0, inf)")

    @property
    def a(self):
        return np.array([x[0] for x in self.atoms])

    @property
    def b(self):
        return np.array([x[1] for x in self.atoms])

    @property
    def p(self):
        return np.array([x[2] for x in self.atoms])


@dataclass(frozen=True)
class LognormalNormalIndep:
    mu_a: float
    sigma_a: float
    mu_b: float
    sigma_b: float

    def __post_init__(self):
        if not self.sigma_a > 0:
            raise ConfigError("sigma_a must be > 0")
        if not self.sigma_b >= 0:
            raise ConfigError("sigma_b must be >= 0")

    @property
    def a_law(self) -> Lognormal:
        return Lognormal(self.mu_a, self.sigma_a)

    @property
    def b_law(self) -> Normal:
        return Normal(self.mu_b, self.sigma_b)


@dataclass(frozen=True)
class AtomPlusDensity:
    p0: float
    a: ALaw
    b: BLaw
    b_at_zero: BLaw

    def __post_init__(self):
        if not 0 <= self.p0 < 1:
            raise ConfigError("p0 must lie in [0, 1)")


CoupleLaw = Union[DiscreteJoint, LognormalNormalIndep, AtomPlusDensity]


# ---------------------------------------------------------------- (de)serialization

_B_NAMES = {"normal": Normal, "uniform": Uniform, "point": Point}
_A_NAMES = {"lognormal": Lognormal, "power_uniform": PowerUniform, "uniform": PowerUniform}


def _marginal_from_dict(d, table, what):
    if not isinstance(d, dict) or len(d) != 1:
        raise ConfigError(f"{what} must be an object with exactly one law name, got {d!r}")
    (name, params), = d.items()
    if name not in table:
        raise ConfigError(f"unknown {what} law {name!r}; expected one of {sorted(table)}")
    try:
        if isinstance(params, dict):
            return table[name](**params)
        if isinstance(params, (list, tuple)):
            return table[name](*params)
        return table[name](params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for {what} law {name!r}: {exc}") from None


def _marginal_to_dict(law):
    if isinstance(law, Normal):
        return {"normal": {"mu": law.mu, "sigma": law.sigma}}
    if isinstance(law, Uniform):
        return {"uniform": {"lo": law.lo, "hi": law.hi}}
    if isinstance(law, Point):
        return {"point": {"value": law.value}}
    if isinstance(law, Lognormal):
        return {"lognormal": {"mu": law.mu, "sigma": law.sigma}}
    if isinstance(law, PowerUniform):
        return {"power_uniform": {"lo": law.lo, "hi": law.hi, "power": law.power}}
    raise TypeError(law)


def law_from_dict(d: dict) -> CoupleLaw:
    """Parse the ``"model"`` object of a run config."""
    if not isinstance(d, dict) or "family" not in d:
        raise ConfigError("model must be an object with a 'family' key")
    fam = d["family"]
    rest = {k: v for k, v in d.items() if k != "family"}
    if fam == "discrete":
        if set(rest) != {"atoms"}:
            raise ConfigError(f"discrete model takes exactly 'atoms', got {sorted(rest)}")
        return DiscreteJoint(tuple(tuple(x) for x in rest["atoms"]))
    if fam == "lognormal_normal":
        keys = {"mu_a", "sigma_a", "mu_b", "sigma_b"}
        if set(rest) != keys:
            raise ConfigError(f"lognormal_normal model takes {sorted(keys)}, got {sorted(rest)}")
        return LognormalNormalIndep(**{k: float(v) for k, v in rest.items()})
    if fam == "atom_plus_density":
        keys = {"p0", "a", "b", "b_at_zero"}
        if set(rest) != keys:
            raise ConfigError(f"atom_plus_density model takes {sorted(keys)}, got {sorted(rest)}")
        return AtomPlusDensity(
            float(rest["p0"]),
            _marginal_from_dict(rest["a"], _A_NAMES, "a"),
            _marginal_from_dict(rest["b"], _B_NAMES, "b"),
            _marginal_from_dict(rest["b_at_zero"], _B_NAMES, "b_at_zero"),
        )
    raise ConfigError(f"unknown model family {fam!r}")


def law_to_dict(law: CoupleLaw) -> dict:
    if isinstance(law, DiscreteJoint):
        return {"family": "discrete", "atoms": [list(x) for x in law.atoms]}
    if isinstance(law, LognormalNormalIndep):
        return {
            "family": "lognormal_normal",
            "mu_a": law.mu_a,
            "sigma_a": law.sigma_a,
            "mu_b": law.mu_b,
            "sigma_b": law.sigma_b,
        }
    if isinstance(law, AtomPlusDensity):
        return {
            "family": "atom_plus_density",
            "p0": law.p0,
            "a": _marginal_to_dict(law.a),
            "b": _marginal_to_dict(law.b),
            "b_at_zero": _marginal_to_dict(law.b_at_zero),
        }
    raise UntiltableFamily(f"unknown family {type(law).__name__}")
