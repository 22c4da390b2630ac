"""Decay-rate experiments for path events: one-sided terminal level and two-sided barrier.

Prints the per-n table, the fitted log-log slope against its theoretical
value, and for the barrier the three placements of the mean cycle length in
the asymptotic constant.

    python scripts/rate_experiments.py one-sided --budget 100000
    python scripts/rate_experiments.py barrier --budget 200000
"""

import argparse
import math
import sys
from pathlib import Path

from heavytail_ldp.events import TerminalAtLeast
from heavytail_ldp.ldp import barrier_option_study, rate_study
from heavytail_ldp.measure import estimate_cycle_constants, solve_alpha
from heavytail_ldp.model import build_model
from heavytail_ldp.regen import find_minorization

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from _models import ONE_SIDED, TWO_SIDED  # noqa: E402


def table(rows):
    print(f"{'n':>6} {'direct':>12} {'cycle-IS':>12} {'asymptotic':>12} {'stderr':>10}")
    for n, d, c, a, se in rows:
        print(f"{n:>6} {d:>12.4e} {c:>12.4e} {a:>12.4e} {se:>10.2e}")


def one_sided(args):
    model = build_model(ONE_SIDED)
    minor = find_minorization(model, "atom")
    alpha = solve_alpha(model).alpha
    consts = estimate_cycle_constants(model, minor, alpha, args.constants_budget, seed=args.seed)
    grid = [2**k for k in range(7, 12)]
    study = rate_study(model, minor, TerminalAtLeast(args.level), grid,
                       methods=("DirectMC", "CycleIS", "Asymptotic"), budget=args.budget, constants=consts,
                       beta=0.7, seed=args.seed, workers=args.workers, direct_max_n=256)
    table(study.rows())
    f = study.fit
    print(f"slope {f.slope:.4f} +/- {f.slope_se:.4f}; expected {study.expected_slope:.4f}")


def barrier(args):
    model = build_model(TWO_SIDED)
    minor = find_minorization(model, "atom")
    alpha = solve_alpha(model).alpha
    consts = estimate_cycle_constants(model, minor, alpha, args.constants_budget, seed=args.seed)
    grid = [2**k for k in range(7, 12)]
    st = barrier_option_study(model, minor, args.level, args.level, grid, args.budget, constants=consts,
                              seed=args.seed, workers=args.workers)
    table(st.rows())
    f = st.study.fit
    print(f"slope {f.slope:.4f} +/- {f.slope_se:.4f}; expected {st.study.expected_slope:.4f}")
    n = grid[-1]
    rate = n ** (-2 * (alpha - 1))
    for name, c in (("per-cycle", st.asymptotic_constant), ("literal", st.literal_constant),
                    ("bare", st.bare_constant)):
        print(f"{name:>10} constant {c.value:.4e}  ->  {c.value * rate:.4e} at n={n}")


def parse_args(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("experiment", choices=["one-sided", "barrier"])
    p.add_argument("--budget", type=int, default=100_000)
    p.add_argument("--constants-budget", type=int, default=200_000)
    p.add_argument("--level", type=float, default=math.nan,
                   help="terminal level (one-sided, default 24) or barrier level (default 2)")
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args(argv)
    if math.isnan(args.level):
        args.level = 24.0 if args.experiment == "one-sided" else 2.0
    return args


if __name__ == "__main__":
    a = parse_args()
    (one_sided if a.experiment == "one-sided" else barrier)(a)
