"""Command line interface: exit codes, outputs, and overrides."""

import json

import pytest

from mfbsde.cli import main

TINY = """
[scenario]
name = tiny
T = 1.0
terminal = w
f = 1.0*zbar
[constants]
C = 1.0
gamma = 1.0
alpha = 0.0
xi_bound = 4.0
[solver]
steps = 8
paths = 300
seed = 3
n_windows = 1
override_epsilon = true
track_ball = false
"""


@pytest.fixture()
def tiny_cfg(tmp_path):
    p = tmp_path / "tiny.cfg"
    p.write_text(TINY)
    return p


def test_version_flag(capsys):
    assert main(["--version"]) == 0
    assert "mfbsde" in capsys.readouterr().out


def test_no_command_is_usage_error(capsys):
    assert main([]) == 2


def test_unknown_flag_is_usage_error(capsys):
    assert main(["solve", "--no-such-flag"]) == 2


def test_unknown_solver_is_usage_error(tiny_cfg, capsys):
    assert main(["solve", "--config", str(tiny_cfg), "--solver", "nope"]) == 2


def test_missing_config_exits_2(tmp_path, capsys):
    rc = main(["solve", "--config", str(tmp_path / "ghost.cfg")])
    assert rc == 2
    assert "not found" in capsys.readouterr().err


def test_alpha_out_of_range_exits_2(tmp_path, capsys):
    p = tmp_path / "bad.cfg"
    p.write_text(TINY.replace("alpha = 0.0", "alpha = 1.0"))
    rc = main(["certify", "--config", str(p), "--out-dir", str(tmp_path)])
    assert rc == 2
    assert "alpha" in capsys.readouterr().err


def test_solver_scenario_mismatch_exits_2(tiny_cfg, tmp_path, capsys):
    # the shift solvers need a split (f1, f2) generator pair
    rc = main(
        ["solve", "--config", str(tiny_cfg), "--solver", "shift",
         "--out-dir", str(tmp_path / "out")]
    )
    assert rc == 2
    assert "error:" in capsys.readouterr().err


def test_certify_writes_reports(tiny_cfg, tmp_path, capsys):
    out = tmp_path / "certs"
    rc = main(["certify", "--config", str(tiny_cfg), "--out-dir", str(out),
               "--prefix", "t"])
    assert rc == 0
    assert (out / "t_certificate.txt").exists()
    assert (out / "t_certificate.json").exists()
    captured = capsys.readouterr().out
    assert "window width eps" in captured
    assert "wrote" in captured


def test_solve_writes_outputs(tiny_cfg, tmp_path, capsys):
    out = tmp_path / "out"
    rc = main(["solve", "--config", str(tiny_cfg), "--out-dir", str(out),
               "--prefix", "demo"])
    assert rc == 0
    csv_path = out / "demo_result.csv"
    json_path = out / "demo_result.json"
    assert csv_path.exists() and json_path.exists()
    assert csv_path.read_text().startswith("# manifest_sha256=")
    captured = capsys.readouterr().out
    assert "solver=global scenario=tiny" in captured
    assert "state mean at t=0" in captured


def test_solve_overrides_reach_manifest(tiny_cfg, tmp_path):
    out = tmp_path / "out"
    rc = main(["solve", "--config", str(tiny_cfg), "--out-dir", str(out),
               "--seed", "9", "--paths", "250", "--steps", "6"])
    assert rc == 0
    payload = json.loads((out / "run_result.json").read_text())
    man = payload["manifest"]
    assert (man["seed"], man["n_steps"], man["n_paths"]) == (9, 6, 250)
    assert len(payload["times"]) == 7


def test_solve_solver_choice_named_in_manifest(tiny_cfg, tmp_path):
    out = tmp_path / "out"
    rc = main(["solve", "--config", str(tiny_cfg), "--out-dir", str(out),
               "--solver", "picard"])
    assert rc == 0
    payload = json.loads((out / "run_result.json").read_text())
    assert payload["manifest"]["selector"] == "picard"


def test_validate_subset(capsys):
    rc = main(["validate", "--criteria", "1,2"])
    out = capsys.readouterr().out.splitlines()
    assert rc == 0
    assert len(out) == 2
    assert out[0].startswith("PASS criterion 1:")
    assert out[1].startswith("PASS criterion 2:")


def test_validate_json_report(tmp_path, capsys):
    report = tmp_path / "v.json"
    rc = main(["validate", "--criteria", "1", "--json", str(report)])
    assert rc == 0
    rows = json.loads(report.read_text())
    assert len(rows) == 1
    assert rows[0]["criterion"] == 1 and rows[0]["passed"] is True


def test_validate_rejects_bad_list(capsys):
    assert main(["validate", "--criteria", "1,zebra"]) == 2
    assert "bad --criteria" in capsys.readouterr().err


def test_validate_rejects_unknown_ids(capsys):
    assert main(["validate", "--criteria", "99"]) == 2
    assert "unknown criteria" in capsys.readouterr().err


def test_bench_runs_small(tiny_cfg, capsys):
    rc = main(["bench", "--config", str(tiny_cfg), "--paths", "200"])
    assert rc == 0
    out = capsys.readouterr().out
    assert "scenario=tiny" in out
    assert "paths=     200" in out
