import json
import math

import numpy as np
import pytest

from pqvar.cli import main


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def test_unknown_command_exits_one(capsys):
    assert main(["frobnicate"]) == 1
    assert "unknown command" in capsys.readouterr().err


def test_malformed_config_exits_one(tmp_path, capsys):
    bad = tmp_path / "cfg.json"
    bad.write_text("{not json")
    assert main(["condition-check", "--config", str(bad)]) == 1
    assert "malformed config" in capsys.readouterr().err


def test_condition_check_feasible(capsys, tmp_path):
    code = main(["condition-check", "--p", "1.4", "--q", "1",
                 "--out", str(tmp_path)])
    out = capsys.readouterr().out
    assert code == 0
    assert "feasible" in out
    lo, hi = 2 * (1 - 1 / 1.4), 1 / 1.4
    assert repr(lo) in out and repr(hi) in out
    payload = read_json(tmp_path / "condition.json")
    assert abs(payload["alpha_interval"][0] - 4 / 7) < 1e-12
    assert abs(payload["alpha_interval"][1] - 5 / 7) < 1e-12


def test_condition_check_infeasible_exits_two(capsys):
    assert main(["condition-check", "--p", "2", "--q", "1"]) == 2
    assert "infeasible" in capsys.readouterr().out
    assert main(["condition-check", "--p", "2", "--q", "1", "--force"]) == 0


def test_condition_check_config_file_with_flag_override(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"p": 2.0, "q": 1.0}))
    # flag overrides the config file's infeasible p
    assert main(["condition-check", "--config", str(cfg), "--p", "1.2"]) == 0
    assert main(["condition-check", "--config", str(cfg)]) == 2
    capsys.readouterr()


def test_simulate_writes_paths_and_summary(tmp_path):
    out = tmp_path / "sim"
    code = main(["simulate", "--steps", "64", "--seeds", "3", "--seed", "7",
                 "--out", str(out)])
    assert code == 0
    files = sorted(p.name for p in out.iterdir())
    assert files == ["path_0000.csv", "path_0001.csv", "path_0002.csv",
                     "simulate_summary.json"]
    summary = read_json(out / "simulate_summary.json")
    assert len(summary["final_values"]) == 3
    assert summary["config"]["seed"] == 7
    header = (out / "path_0000.csv").read_text().splitlines()[0]
    assert header == "t,x,m,v,qv"


def test_byte_identical_reruns(tmp_path):
    out = tmp_path / "runs"
    args = ["simulate", "--steps", "128", "--seeds", "2", "--seed", "3",
            "--out", str(out)]
    assert main(args) == 0
    names = ("path_0000.csv", "path_0001.csv", "simulate_summary.json")
    first = {n: (out / n).read_bytes() for n in names}
    assert main(args) == 0
    for n in names:
        assert (out / n).read_bytes() == first[n]


def test_young1d_closed_form_and_refusal(tmp_path, capsys):
    code = main(["young1d", "--f", "polynomial(0,1)", "--g", "polynomial(0,0,1)",
                 "--a", "0", "--b", "1", "--out", str(tmp_path)])
    assert code == 0
    payload = read_json(tmp_path / "young1d.json")
    assert abs(payload["value"] - 2 / 3) < 1e-3
    assert payload["verdict"] == "converged"

    assert main(["young1d", "--f", "polynomial(0,1)", "--g", "polynomial(0,1)",
                 "--p", "2", "--q", "2"]) == 2
    assert main(["young1d", "--f", "polynomial(0,1)", "--g", "polynomial(0,1)",
                 "--p", "2", "--q", "2", "--force"]) == 0
    capsys.readouterr()


def test_young2d_command(tmp_path, capsys):
    code = main(["young2d", "--F", "xy", "--G", "xy", "--rect", "0,1,0,1",
                 "--out", str(tmp_path)])
    assert code == 0
    payload = read_json(tmp_path / "young2d.json")
    assert abs(payload["value"] - 0.25) < 1e-3
    assert main(["young2d", "--F", "xy", "--G", "xy", "--p", "2", "--q", "1"]) == 2
    capsys.readouterr()


def test_young2d_jump_detection(tmp_path, capsys):
    code = main(["young2d", "--F", "one", "--G", "xy", "--rect", "0,1,0,1",
                 "--jump-eps", "0.5", "--out", str(tmp_path)])
    assert code == 0
    payload = read_json(tmp_path / "young2d.json")
    assert payload["jumps"] == {"H": [], "Hprime": []}
    capsys.readouterr()


def test_variation_command_function_input(tmp_path, capsys):
    code = main(["variation", "--function", "xysin",
                 "--grid", "0.05,1,16,0,1,2", "--p", "1.5", "--q", "1",
                 "--out", str(tmp_path)])
    assert code == 0
    payload = read_json(tmp_path / "variation.json")
    assert payload["exponents"] == [1.5, 1.0]
    assert payload["value"] > 0
    assert payload["exactness"] in ("exact-on-grid", "lower-bound")
    capsys.readouterr()


def test_variation_command_csv_roundtrip(tmp_path, capsys):
    csv = tmp_path / "path.csv"
    csv.write_text("x,value\n0.0,0.0\n1.0,1.0\n2.0,-1.0\n3.0,2.0\n")
    code = main(["variation", "--path-csv", str(csv), "--p", "2",
                 "--out", str(tmp_path)])
    assert code == 0
    payload = read_json(tmp_path / "variation.json")
    assert payload["value"] == 14.0
    capsys.readouterr()


def test_localtime_command(tmp_path, capsys):
    code = main(["localtime", "--steps", "256", "--levels", "32",
                 "--seed", "2", "--out", str(tmp_path)])
    assert code == 0
    meta = read_json(tmp_path / "localtime_0000.json")
    assert meta["convention"] == "tanaka-no-half"
    assert meta["max_jump_part"] == 0.0
    from pqvar.pathcore import SampledField
    fld = SampledField.from_csv(str(tmp_path / "localtime_0000.csv"))
    assert fld.values.shape[1] == 33
    capsys.readouterr()


def test_ito_check_command(tmp_path, capsys):
    code = main(["ito-check", "--mode", "time-independent", "--function",
                 "polynomial(0,1)", "--seeds", "2", "--out", str(tmp_path)])
    assert code == 0
    med = read_json(tmp_path / "ito_medians.json")
    assert all(m <= 1e-12 for m in med["median_residuals"])
    rep = read_json(tmp_path / "ito_0001.json")
    assert rep["residual"] <= 1e-12
    capsys.readouterr()


def test_examples_tanaka_writes_reports(tmp_path, capsys):
    code = main(["examples", "--name", "tanaka", "--seeds", "10",
                 "--out", str(tmp_path)])
    assert code == 0
    reports = sorted(tmp_path.glob("tanaka_*.json"))
    assert len(reports) == 10
    payload = read_json(reports[0])
    assert "residual" in payload
    capsys.readouterr()


def test_examples_mollifier(tmp_path, capsys):
    code = main(["examples", "--name", "mollifier", "--out", str(tmp_path)])
    assert code == 0
    rows = read_json(tmp_path / "mollifier.json")["sup_distance_per_order"]
    sups = [s for _, s in rows]
    assert sups[0] > sups[1] > sups[2]
    capsys.readouterr()
