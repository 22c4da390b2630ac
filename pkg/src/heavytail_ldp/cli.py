"""Command-line entry point: ``heavytail-ldp <command> config.json``.

Every run reads one JSON config, rejects unknown keys, writes the resolved
config with all defaults filled in, its CSV/JSON results and a manifest
(config hash, stage wall times, random-stream ledger, output checksums).
Exit status is 0 on success, 2 for an invalid configuration or model and 3
when an estimator refuses to produce a result.
"""

from __future__ import annotations

import argparse
import copy
import csv
import dataclasses
import hashlib
import json
import math
import os
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import ldp, measure, model as model_mod, pathspace, regen
from .errors import ConfigError, DegenerateModel, LdpError, UnstableModel
from .events import EventSet, event_from_dict, event_to_dict
from .laws import law_from_dict
from .rng import record_streams
from .stats import Estimate

ENV_OUT = "HEAVYTAIL_LDP_OUT"
CSV_VERSION = "1"
REQUIRED = object()

TOP_LEVEL = ("model", "minorization", "alpha", "experiment", "seed", "workers", "out")
# settings that may change how a run is executed but never its numbers
EXECUTION_ONLY = ("workers", "out")

EXPERIMENTS = {
    "simulate": {"n": 100, "x0": 0.0},
    "calibrate-alpha": {"tol": 1e-14},
    "estimate-constants": {"budget": 200_000, "c_inf_budget": 1_000_000, "u_esc": None, "stop": "regen",
                           "cycle_budget": None, "strict_escape": True},
    "tail-curve": {"u_grid": REQUIRED, "beta": 0.7, "budget": 100_000, "functional": "area", "stop": "regen",
                   "complement": "auto", "plain_budget": 0, "d": None, "min_hits": 100},
    "rare-event": {"event": REQUIRED, "n_grid": REQUIRED, "methods": ["DirectMC", "CycleIS"],
                   "budget": 100_000, "beta": 0.8, "x0": None, "direct_max_n": None, "mixture": None,
                   "one_sided": None, "fit_method": None, "constants_budget": 200_000,
                   "limit_budget": 1_000_000},
    "barrier": {"a_plus": REQUIRED, "a_minus": REQUIRED, "n_grid": REQUIRED, "budget": 100_000,
                "methods": ["CycleIS", "Asymptotic"], "beta": 0.8, "direct_max_n": None,
                "constants_budget": 200_000, "limit_budget": 1_000_000},
    "limit-measure": {"event": REQUIRED, "z": 0.0, "j": REQUIRED, "k": 0, "gamma": None,
                      "budget": 1_000_000, "method": "mc", "check_gamma": True},
    "m1-distance": {"xi": REQUIRED, "zeta": REQUIRED, "eps": 1e-2, "j1": True},
    "diagnose": {"mc_budget": 100_000, "cycles": 100_000},
}
NEEDS_MODEL = {c for c in EXPERIMENTS if c not in ("limit-measure", "m1-distance")}


# ---------------------------------------------------------------- formatting


def fmt(x) -> str:
    """17 significant digits for floats; plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return format(x, ".17g")
    return str(x)


def plain(obj):
    """Convert reports, estimates and numpy values into JSON-ready Python objects."""
    if isinstance(obj, (str, bool, type(None))):
        return obj
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return [plain(v) for v in obj.tolist()]
    if isinstance(obj, dict):
        return {str(k): plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain(v) for v in obj]
    if isinstance(obj, EventSet):
        return event_to_dict(obj)
    if hasattr(obj, "to_dict"):
        return plain(obj.to_dict())
    if dataclasses.is_dataclass(obj):
        return {f.name: plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON text with floats at 17 significant digits; non-finite floats become strings."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(dumps(v, indent, _level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + dumps(v, indent, _level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, float):
        return fmt(obj) if math.isfinite(obj) else json.dumps(fmt(obj))
    return json.dumps(obj)


def write_json(path: Path, obj) -> Path:
    path.write_text(dumps(plain(obj)) + "\n", encoding="utf-8")
    return path


def write_csv(path: Path, header, rows) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


# ---------------------------------------------------------------- config


def _line_of(text: str, key: str) -> int | None:
    needle = json.dumps(key)
    for i, line in enumerate(text.splitlines(), 1):
        if needle in line:
            return i
    return None


class _Source:
    """Config text, kept to point error messages at a line."""

    def __init__(self, path: str, text: str):
        self.path = path
        self.text = text

    def error(self, msg: str, key: str | None = None) -> ConfigError:
        line = _line_of(self.text, key) if key is not None else None
        where = f"{self.path}:{line}" if line else self.path
        return ConfigError(f"{where}: {msg}")


def load_config(path: str) -> tuple[dict, _Source]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})") from None
    src = _Source(path, text)
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: invalid JSON ({exc.msg})") from None
    if not isinstance(raw, dict):
        raise src.error("top level must be a JSON object")
    return raw, src


def resolve_config(command: str, raw: dict, src: _Source, *, seed=None, workers=None, out=None) -> dict:
    """Validate ``raw`` and fill every default; command-line flags override the file."""
    if command not in EXPERIMENTS:
        raise ConfigError(f"unknown command {command!r}")
    for key in raw:
        if key not in TOP_LEVEL:
            raise src.error(f"unknown key {key!r}", key)
    cfg: dict = {}
    if command in NEEDS_MODEL:
        if "model" not in raw:
            raise src.error(f"'{command}' needs a 'model' block")
    if "model" in raw:
        try:
            law = law_from_dict(raw["model"])
        except ConfigError as exc:
            raise src.error(f"model: {exc}", "model") from None
        cfg["model"] = model_mod.Model(law).to_dict()
    cfg["minorization"] = _resolve_minorization(raw.get("minorization"), cfg.get("model"), src)
    alpha = raw.get("alpha", "auto")
    if alpha != "auto" and not isinstance(alpha, (int, float)):
        raise src.error("alpha must be a number or \"auto\"", "alpha")
    cfg["alpha"] = alpha
    exp = raw.get("experiment", {})
    if not isinstance(exp, dict):
        raise src.error("experiment must be an object", "experiment")
    defaults = EXPERIMENTS[command]
    for key in exp:
        if key not in defaults:
            raise src.error(f"unknown experiment key {key!r} for '{command}'", key)
    resolved = {}
    for key, default in defaults.items():
        if key in exp:
            resolved[key] = exp[key]
        elif default is REQUIRED:
            raise src.error(f"experiment key {key!r} is required for '{command}'", "experiment")
        else:
            resolved[key] = copy.deepcopy(default)
    cfg["experiment"] = resolved
    cfg["seed"] = int(seed if seed is not None else raw.get("seed", 0))
    cfg["workers"] = int(workers if workers is not None else raw.get("workers", 1))
    if cfg["workers"] < 1:
        raise src.error("workers must be at least 1", "workers")
    cfg["out"] = str(out or raw.get("out") or os.environ.get(ENV_OUT) or "heavytail_ldp_out")
    return cfg


def _resolve_minorization(block, model_dict, src):
    if block is None:
        if model_dict is None:
            return None
        has_atom = model_mod.Model(law_from_dict(model_dict)).zero_prob > 0
        block = {"mode": "atom"} if has_atom else {"mode": "grid"}
    if not isinstance(block, dict):
        raise src.error("minorization must be an object", "minorization")
    mode = block.get("mode", "atom")
    if mode == "grid":
        full = {"mode": "grid", "d": 1.0, "e0": [-0.5, 0.5], "grid": 200}
    elif mode in ("atom", "none"):
        full = {"mode": mode}
    else:
        raise src.error(f"unknown minorization mode {mode!r}", "mode")
    for key, val in block.items():
        if key not in full:
            raise src.error(f"unknown minorization key {key!r} for mode {mode!r}", key)
        full[key] = val
    return full


def config_hash(cfg: dict) -> str:
    core = {k: v for k, v in cfg.items() if k not in EXECUTION_ONLY}
    return hashlib.sha256(dumps(plain(core)).encode()).hexdigest()


# ---------------------------------------------------------------- run context


class Run:
    """Mutable state of one command execution."""

    def __init__(self, command: str, cfg: dict, src: _Source):
        self.command = command
        self.cfg = cfg
        self.src = src
        self.exp = cfg["experiment"]
        self.seed = cfg["seed"]
        self.workers = cfg["workers"]
        self.out = Path(cfg["out"])
        self.stages: dict[str, float] = {}
        self.outputs: list[Path] = []
        self._model = None
        self._minor = None
        self._alpha = None

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.stages[name] = self.stages.get(name, 0.0) + time.perf_counter() - t0

    def json(self, name: str, obj) -> None:
        self.outputs.append(write_json(self.out / name, obj))

    def csv(self, name: str, header, rows) -> None:
        self.outputs.append(write_csv(self.out / name, header, rows))

    @property
    def model(self) -> model_mod.Model:
        if self._model is None:
            with self.stage("model"):
                self._model = model_mod.build_model(self.cfg["model"])
        return self._model

    @property
    def minor(self) -> regen.MinorizationParams:
        if self._minor is None:
            block = self.cfg["minorization"]
            with self.stage("minorization"):
                if block["mode"] == "none":
                    self._minor = regen.no_splitting()
                else:
                    self._minor = regen.minorization_from_dict(self.model, block)
        return self._minor

    @property
    def alpha(self) -> float:
        if self._alpha is None:
            a = self.cfg["alpha"]
            if a == "auto":
                with self.stage("alpha"):
                    self._alpha = measure.solve_alpha(self.model).alpha
            else:
                self._alpha = float(a)
        return self._alpha

    def constants(self, budget: int) -> measure.ConstantsReport:
        with self.stage("constants"):
            rep = measure.estimate_cycle_constants(self.model, self.minor, self.alpha, int(budget),
                                                   seed=self.seed, workers=self.workers)
        self.json("constants.json", rep)
        return rep

    def event(self, key: str = "event") -> EventSet:
        try:
            return event_from_dict(self.exp[key])
        except (ConfigError, KeyError, TypeError) as exc:
            raise self.src.error(f"{key}: {exc}", key) from None

    def require(self, cond: bool, msg: str, key: str) -> None:
        if not cond:
            raise self.src.error(msg, key)


# ---------------------------------------------------------------- commands


def cmd_simulate(run: Run) -> None:
    e = run.exp
    n = int(e["n"])
    run.require(n >= 1, "n must be at least 1", "n")
    with run.stage("simulate"):
        path = model_mod.simulate_path(run.model, n, float(e["x0"]), rng=(run.seed, "simulate"))
    run.csv("states.csv", ("k", "x"), [(k, x) for k, x in enumerate(path.states)])
    xi = model_mod.scaled_additive_path(path)
    run.json("summary.json", {"n": n, "x0": float(e["x0"]), "mu": run.model.mu,
                              "scaled_terminal": xi.terminal, "scaled_sup": xi.sup(), "scaled_inf": xi.inf(),
                              "mean_state": float(np.mean(path.states))})


def cmd_calibrate_alpha(run: Run) -> None:
    with run.stage("alpha"):
        cal = measure.solve_alpha(run.model, tol=float(run.exp["tol"]))
    run.json("alpha.json", cal)


def cmd_estimate_constants(run: Run) -> None:
    e = run.exp
    with run.stage("c_infinity"):
        cinf = measure.estimate_C_infinity(run.model, run.alpha, int(e["c_inf_budget"]), seed=run.seed,
                                           workers=run.workers)
    with run.stage("constants"):
        rep = measure.estimate_cycle_constants(
            run.model, run.minor, run.alpha, int(e["budget"]), c_inf=cinf, u_esc=e["u_esc"], stop=e["stop"],
            seed=run.seed, workers=run.workers, cycle_budget=e["cycle_budget"],
            strict_escape=bool(e["strict_escape"]))
    run.json("constants.json", {"constants": rep, "c_infinity": cinf})


def cmd_tail_curve(run: Run) -> None:
    e = run.exp
    run.require(e["functional"] in ("area", "neg_area", "abs_area"), "unknown functional", "functional")
    run.require(e["stop"] in ("regen", "return"), "stop must be 'regen' or 'return'", "stop")
    u = [float(x) for x in e["u_grid"]]
    with run.stage("dual_is"):
        curve = measure.dual_is_tail(run.model, run.minor, run.alpha, u, float(e["beta"]), int(e["budget"]),
                                     functional=e["functional"], stop=e["stop"], complement=e["complement"],
                                     seed=run.seed, workers=run.workers, min_hits=int(e["min_hits"]),
                                     d=e["d"])
    header = ("u", "p_hat", "stderr", "u_alpha_p")
    run.csv("tail_curve.csv", header, curve.rows())
    report = {"alpha": run.alpha, "beta": curve.beta, "functional": curve.functional, "stop": curve.stop,
              "complement": curve.complement, "slope": curve.slope(), "hits": curve.hits}
    if int(e["plain_budget"]) > 0:
        with run.stage("plain_mc"):
            pc = measure.plain_mc_tail(run.model, run.minor, u, int(e["plain_budget"]),
                                       functional=e["functional"], stop=e["stop"], seed=run.seed,
                                       workers=run.workers, alpha=run.alpha, d=e["d"])
        run.csv("tail_curve_plain.csv", header, pc.rows())
        report["plain_hits"] = pc.hits
    run.json("tail_curve.json", report)


RATE_HEADER = ("n", "p_direct", "p_is", "p_asymptotic", "stderr")


def cmd_rare_event(run: Run) -> None:
    e = run.exp
    event = run.event()
    methods = tuple(e["methods"])
    unknown = set(methods) - set(ldp.METHODS)
    run.require(not unknown and methods, f"methods must be drawn from {list(ldp.METHODS)}", "methods")
    fit = e["fit_method"] or next(m for m in ("CycleIS", "DirectMC", "Asymptotic") if m in methods)
    need_constants = "Asymptotic" in methods or ("CycleIS" in methods and run.minor.mode != "atom")
    constants = run.constants(e["constants_budget"]) if need_constants else None
    with run.stage("rare_event"):
        study = ldp.rate_study(run.model, run.minor, event, [int(n) for n in e["n_grid"]], methods=methods,
                               fit_method=fit, budget=int(e["budget"]), constants=constants, alpha=run.alpha,
                               one_sided=e["one_sided"], seed=run.seed, workers=run.workers,
                               direct_max_n=e["direct_max_n"], beta=float(e["beta"]), x0=e["x0"],
                               mixture=e["mixture"], limit_budget=int(e["limit_budget"]))
    run.csv("rare_event.csv", RATE_HEADER, study.rows())
    run.json("rare_event.json", study)


def cmd_barrier(run: Run) -> None:
    e = run.exp
    constants = run.constants(e["constants_budget"])
    with run.stage("barrier"):
        rep = ldp.barrier_option_study(run.model, run.minor, float(e["a_minus"]), float(e["a_plus"]),
                                       [int(n) for n in e["n_grid"]], int(e["budget"]), constants=constants,
                                       seed=run.seed, workers=run.workers, methods=tuple(e["methods"]),
                                       direct_max_n=e["direct_max_n"], beta=float(e["beta"]),
                                       limit_budget=int(e["limit_budget"]))
    run.csv("barrier.csv", RATE_HEADER, rep.rows())
    run.json("barrier.json", rep)


def cmd_limit_measure(run: Run) -> None:
    e = run.exp
    if run.cfg["alpha"] == "auto" and "model" not in run.cfg:
        raise run.src.error("limit-measure needs a numeric alpha or a model", "alpha")
    spec = ldp.LimitMeasureSpec(float(e["z"]), int(e["j"]), int(e["k"]), run.alpha,
                                None if e["gamma"] is None else float(e["gamma"]))
    with run.stage("limit_measure"):
        est = ldp.limit_measure(run.event(), spec, int(e["budget"]), seed=run.seed, method=e["method"],
                                workers=run.workers, check_gamma=bool(e["check_gamma"]))
    run.json("limit_measure.json", est)


def _stepfn(run: Run, key: str) -> pathspace.StepFn:
    val = run.exp[key]
    if isinstance(val, str):
        p = Path(val)
        if not p.is_absolute():
            p = Path(run.src.path).parent / p
        try:
            val = json.loads(p.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise run.src.error(f"{key}: cannot load step function from {p} ({exc})", key) from None
    try:
        return pathspace.StepFn.from_dict(val)
    except (ConfigError, KeyError, TypeError, ValueError) as exc:
        raise run.src.error(f"{key}: {exc}", key) from None


def cmd_m1_distance(run: Run) -> None:
    e = run.exp
    xi, zeta = _stepfn(run, "xi"), _stepfn(run, "zeta")
    eps = float(e["eps"])
    run.require(eps > 0, "eps must be positive", "eps")
    with run.stage("distance"):
        d = pathspace.m1prime_distance(xi, zeta, eps)
        out = {"m1prime": d, "eps": eps}
        if e["j1"]:
            out["j1"] = pathspace.j1_distance(xi, zeta, eps)
    print(f"m1prime_distance = {fmt(d)} +/- {fmt(eps)}")
    run.json("distance.json", out)


def cmd_diagnose(run: Run) -> None:
    e = run.exp
    report = {}
    with run.stage("assumptions"):
        diag = model_mod.check_assumptions(run.model, run.alpha, int(e["mc_budget"]), seed=run.seed)
    report["assumptions"] = diag
    report["passed"] = diag.passed
    report["minorization"] = run.minor.to_dict()
    if run.minor.mode != "none" and int(e["cycles"]) > 0:
        with run.stage("cycles"):
            stats = regen.sample_cycles(run.model, run.minor, int(e["cycles"]), seed=run.seed,
                                        workers=run.workers)
            tail = regen.cycle_length_tail_test(stats)
        report["cycles"] = {"count": stats.count, "mean_length": Estimate(stats.mean_length, stats.mean_length_se,
                                                                          "cycle-average"),
                            "tail_test": tail}
    run.json("diagnose.json", report)


COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate-alpha": cmd_calibrate_alpha,
    "estimate-constants": cmd_estimate_constants,
    "tail-curve": cmd_tail_curve,
    "rare-event": cmd_rare_event,
    "barrier": cmd_barrier,
    "limit-measure": cmd_limit_measure,
    "m1-distance": cmd_m1_distance,
    "diagnose": cmd_diagnose,
}


# ---------------------------------------------------------------- entry point


def run(command: str, config_path: str, *, seed=None, workers=None, out=None) -> dict:
    """Execute ``command`` on the config file and return the manifest."""
    raw, src = load_config(config_path)
    cfg = resolve_config(command, raw, src, seed=seed, workers=workers, out=out)
    r = Run(command, cfg, src)
    r.out.mkdir(parents=True, exist_ok=True)
    echo = {k: v for k, v in cfg.items() if k not in EXECUTION_ONLY}
    r.outputs.append(write_json(r.out / "resolved_config.json", echo))
    t0 = time.perf_counter()
    with record_streams() as ledger:
        COMMANDS[command](r)
    manifest = {
        "command": command,
        "config_hash": config_hash(cfg),
        "csv_version": CSV_VERSION,
        "seed": cfg["seed"],
        "workers": cfg["workers"],
        "wall_seconds": {"total": time.perf_counter() - t0, **r.stages},
        "streams": ledger,
        "outputs": [{"file": p.name, "sha256": sha256(p), "bytes": p.stat().st_size} for p in r.outputs],
    }
    write_json(r.out / "manifest.json", manifest)
    return manifest


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="heavytail-ldp", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True, metavar="command")
    for name in COMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("config", help="path to the JSON run config")
        sp.add_argument("--seed", type=int, default=None, help="override the config seed")
        sp.add_argument("--workers", type=int, default=None, help="worker threads (results do not depend on it)")
        sp.add_argument("--out", default=None, help=f"output directory (fallback: ${ENV_OUT})")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        manifest = run(args.command, args.config, seed=args.seed, workers=args.workers, out=args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (UnstableModel, DegenerateModel) as exc:
        # a model that fails its assumptions is a validation failure, not an estimator one
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except LdpError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(f"wrote {len(manifest['outputs'])} files (config {manifest['config_hash'][:12]})")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
