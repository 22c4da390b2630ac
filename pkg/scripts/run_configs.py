"""Run every config in ``scripts/configs`` through the command-line tool.

The subcommand is read from the file name prefix; outputs land in
``<out>/<config stem>/``.

    python scripts/run_configs.py --out runs [--only barrier] [--workers 4]
"""

import argparse
import sys
from pathlib import Path

from heavytail_ldp.cli import main

HERE = Path(__file__).resolve().parent
PREFIXES = {
    "simulate": "simulate", "calibrate": "calibrate-alpha", "constants": "estimate-constants",
    "tail_curve": "tail-curve", "rare_event": "rare-event", "barrier": "barrier",
    "limit_measure": "limit-measure", "m1": "m1-distance", "diagnose": "diagnose",
}


def command_for(path: Path) -> str:
    for prefix, command in PREFIXES.items():
        if path.stem.startswith(prefix):
            return command
    raise SystemExit(f"no subcommand for {path.name}")


def parse_args(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs", help="parent output directory")
    p.add_argument("--only", default=None, help="run configs whose stem contains this text")
    p.add_argument("--workers", default="1")
    return p.parse_args(argv)


def run(args) -> int:
    failures = 0
    for cfg in sorted((HERE / "configs").glob("*.json")):
        if args.only and args.only not in cfg.stem:
            continue
        command = command_for(cfg)
        print(f"== {command} {cfg.name}", flush=True)
        code = main([command, str(cfg), "--out", str(Path(args.out) / cfg.stem), "--workers", args.workers])
        failures += code != 0
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(run(parse_args()))
