"""Small configs for every subcommand, shared by the CLI and acceptance tests."""

from _models import ONE_SIDED, TWO_POINT, TWO_SIDED

SMALL = {
    "simulate": {"model": TWO_POINT, "experiment": {"n": 200}, "seed": 1},
    "calibrate-alpha": {"model": TWO_POINT},
    "estimate-constants": {"model": ONE_SIDED, "experiment": {"budget": 10_000, "c_inf_budget": 20_000},
                           "seed": 2},
    "tail-curve": {"model": ONE_SIDED, "experiment": {"u_grid": [30, 100], "budget": 10_000,
                                                       "plain_budget": 10_000}, "seed": 3},
    "rare-event": {"model": ONE_SIDED,
                   "experiment": {"event": {"terminal_at_least": 10}, "n_grid": [16, 32], "budget": 5000,
                                  "methods": ["DirectMC", "CycleIS", "Asymptotic"], "constants_budget": 10_000,
                                  "limit_budget": 10_000},
                   "seed": 4},
    "barrier": {"model": TWO_SIDED,
                "experiment": {"a_plus": 2.0, "a_minus": 2.0, "n_grid": [32, 64], "budget": 5000,
                               "constants_budget": 10_000, "limit_budget": 10_000},
                "seed": 5},
    "limit-measure": {"experiment": {"event": {"terminal_at_least": 2}, "j": 1, "budget": 20_000},
                      "alpha": 1.5, "seed": 6},
    "m1-distance": {"experiment": {"xi": {"jumps": [{"t": 0.5, "size": 1.0}]},
                                   "zeta": {"jumps": [{"t": 0.49, "size": 0.5}, {"t": 0.5, "size": 0.5}]}}},
    "diagnose": {"model": ONE_SIDED, "experiment": {"mc_budget": 5000, "cycles": 5000}, "seed": 7},
}
