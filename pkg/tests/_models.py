"""Model configurations shared by the test modules."""

import math

SQRT_08 = math.sqrt(0.8)

TWO_POINT = {"family": "discrete", "atoms": [[2.0, 1.0, 0.3], [0.5, 1.0, 0.7]]}
TWO_POINT_ALPHA = math.log2(7.0 / 3.0)

LOGNORMAL_NORMAL = {"family": "lognormal_normal", "mu_a": -0.6, "sigma_a": SQRT_08, "mu_b": 0.0, "sigma_b": 1.0}


def lognormal_location(p0: float, alpha: float, sigma: float) -> float:
    """Location making ``(1 - p0) E[LN^alpha] = 1`` for a lognormal multiplier."""
    return (math.log(1.0 / (1.0 - p0)) - 0.5 * sigma**2 * alpha**2) / alpha


def atom_model(p0: float, sigma: float, b: dict, b_at_zero: dict | None = None, alpha: float = 1.5) -> dict:
    return {"family": "atom_plus_density", "p0": p0,
            "a": {"lognormal": {"mu": lognormal_location(p0, alpha, sigma), "sigma": sigma}},
            "b": b, "b_at_zero": b if b_at_zero is None else b_at_zero}


UNIFORM01 = {"uniform": {"lo": 0.0, "hi": 1.0}}
STD_NORMAL = {"normal": {"mu": 0.0, "sigma": 1.0}}

# atom at zero with probability 0.2, B >= 0, Kesten index 1.5
ONE_SIDED = atom_model(0.2, 0.5, UNIFORM01)
# atom at zero with probability 0.5, symmetric B, Kesten index 1.5
TWO_SIDED = atom_model(0.5, 0.5, STD_NORMAL)
# no atom: lognormal multiplier, B uniform on [0, 1], Kesten index 1.5
NO_ATOM = {"family": "atom_plus_density", "p0": 0.0,
           "a": {"lognormal": {"mu": -0.5 * 0.25 * 1.5, "sigma": 0.5}},
           "b": UNIFORM01, "b_at_zero": {"point": {"value": 0.0}}}
