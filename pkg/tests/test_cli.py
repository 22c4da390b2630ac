import csv
import json

import pytest

from heavytail_ldp.cli import EXPERIMENTS, fmt, main

from _cli_configs import SMALL
from _models import ONE_SIDED, TWO_POINT


def _write(tmp_path, cfg, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(cfg, indent=2))
    return p


def _run(tmp_path, command, cfg, *extra, out="out"):
    path = _write(tmp_path, cfg)
    code = main([command, str(path), "--out", str(tmp_path / out), *extra])
    return code, tmp_path / out


def test_every_command_has_a_small_config():
    assert set(SMALL) == set(EXPERIMENTS)


@pytest.mark.parametrize("command", sorted(SMALL))
def test_commands_run(tmp_path, command):
    code, out = _run(tmp_path, command, SMALL[command])
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == command
    files = {o["file"] for o in manifest["outputs"]}
    assert "resolved_config.json" in files
    for name in files:
        assert (out / name).exists()


def test_simulate_output(tmp_path):
    code, out = _run(tmp_path, "simulate", SMALL["simulate"])
    rows = list(csv.reader((out / "states.csv").open()))
    assert rows[0] == ["k", "x"]
    assert len(rows) == 1 + 201
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["streams"] and manifest["csv_version"] == "1"


def test_resolved_config_round_trip(tmp_path):
    code, out = _run(tmp_path, "tail-curve", SMALL["tail-curve"])
    echo = json.loads((out / "resolved_config.json").read_text())
    assert echo["experiment"]["beta"] == 0.7
    assert "workers" not in echo and "out" not in echo
    code2, out2 = _run(tmp_path, "tail-curve", echo, out="again")
    assert code2 == 0
    assert (out / "tail_curve.csv").read_bytes() == (out2 / "tail_curve.csv").read_bytes()


def test_tail_curve_header(tmp_path):
    _, out = _run(tmp_path, "tail-curve", SMALL["tail-curve"])
    header = (out / "tail_curve.csv").read_text().splitlines()[0]
    assert header == "u,p_hat,stderr,u_alpha_p"


@pytest.mark.parametrize("cfg", [
    {"model": TWO_POINT, "experiment": {"n": 10, "typo": 1}},
    {"model": TWO_POINT, "experiment": {"n": 10}, "extra": 1},
    {"model": {"family": "discrete", "atoms": [[2.0, 1.0, 0.9], [0.5, 1.0, 0.1]]}},
    {"experiment": {"n": 10}},
])
def test_config_errors_exit_two(tmp_path, cfg, capsys):
    code, _ = _run(tmp_path, "simulate", cfg)
    assert code == 2
    assert "error" in capsys.readouterr().err


def test_error_names_the_line(tmp_path, capsys):
    text = '{\n  "model": {"family": "discrete",\n   "atoms": [[2.0, 1.0, 0.3], [0.5, 1.0, 0.7]]},\n  "experimnt": {}\n}\n'
    p = tmp_path / "bad.json"
    p.write_text(text)
    assert main(["simulate", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "bad.json:4: unknown key 'experimnt'" in capsys.readouterr().err


def test_missing_required_key(tmp_path):
    cfg = {"model": ONE_SIDED, "experiment": {"budget": 1000}}
    assert _run(tmp_path, "tail-curve", cfg)[0] == 2


def test_estimator_refusal_exits_three(tmp_path, capsys):
    cfg = {"model": ONE_SIDED, "experiment": {"u_grid": [1e9], "budget": 200}}
    code, _ = _run(tmp_path, "tail-curve", cfg)
    assert code == 3
    assert "BudgetTooSmall" in capsys.readouterr().err


def test_m1_distance_prints(tmp_path, capsys):
    code, _ = _run(tmp_path, "m1-distance", SMALL["m1-distance"])
    assert code == 0
    assert "m1prime_distance = " in capsys.readouterr().out


@pytest.mark.parametrize("command", ["simulate", "tail-curve", "rare-event"])
def test_workers_and_reruns_are_bit_identical(tmp_path, command):
    digests = []
    for i, workers in enumerate(["1", "3", "1"]):
        _, out = _run(tmp_path, command, SMALL[command], "--workers", workers, out=f"o{i}")
        manifest = json.loads((out / "manifest.json").read_text())
        digests.append({o["file"]: o["sha256"] for o in manifest["outputs"]})
    assert digests[0] == digests[1] == digests[2]


def test_seed_override_changes_output(tmp_path):
    _, a = _run(tmp_path, "simulate", SMALL["simulate"], out="a")
    _, b = _run(tmp_path, "simulate", SMALL["simulate"], "--seed", "99", out="b")
    assert (a / "states.csv").read_bytes() != (b / "states.csv").read_bytes()


def test_output_dir_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("HEAVYTAIL_LDP_OUT", str(tmp_path / "env"))
    p = _write(tmp_path, SMALL["calibrate-alpha"])
    assert main(["calibrate-alpha", str(p)]) == 0
    assert (tmp_path / "env" / "alpha.json").exists()


def test_seventeen_digits():
    assert fmt(0.1) == "0.10000000000000001"
    assert float(fmt(2.0 / 3.0)) == 2.0 / 3.0
    assert fmt(float("inf")) == "inf" and fmt(True) == "true"
