"""Cycle-area tail curve under the dual change of measure, against the plateau constant.

    python scripts/tail_experiment.py --budget 200000
"""

import argparse
import sys
from pathlib import Path

import numpy as np

from heavytail_ldp.measure import dual_is_tail, estimate_cycle_constants, solve_alpha
from heavytail_ldp.model import build_model
from heavytail_ldp.regen import find_minorization

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from _models import ONE_SIDED  # noqa: E402


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--budget", type=int, default=200_000)
    p.add_argument("--beta", type=float, default=0.7)
    p.add_argument("--seed", type=int, default=41)
    args = p.parse_args(argv)
    model = build_model(ONE_SIDED)
    minor = find_minorization(model, "atom")
    alpha = solve_alpha(model).alpha
    curve = dual_is_tail(model, minor, alpha, np.logspace(2.5, 4.5, 5), args.beta, args.budget, seed=args.seed)
    consts = estimate_cycle_constants(model, minor, alpha, args.budget, seed=args.seed + 1)
    print(f"{'u':>10} {'P(area > u)':>14} {'stderr':>10} {'u^alpha P':>10}")
    for u, pr, se, c in curve.rows():
        print(f"{u:>10.1f} {pr:>14.4e} {se:>10.2e} {c:>10.3f}")
    f = curve.slope()
    print(f"slope {f.slope:.4f} +/- {f.slope_se:.4f} (alpha = {alpha:.4f})")
    print(f"C+ = {consts.C_plus.value:.3f} +/- {consts.C_plus.stderr:.3f}")


if __name__ == "__main__":
    main()
