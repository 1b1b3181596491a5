"""Config parsing, run manifests, and the CSV/JSON output writers."""

import dataclasses
import hashlib
import json
from pathlib import Path

import numpy as np
import pytest

from mfbsde import (
    InvalidInput,
    build_grid,
    certify,
    example_22,
    linear_scenario,
    load_config,
    simulate_brownian,
)
from mfbsde.config import (
    OutputOptions,
    RunManifest,
    manifest_for,
    write_certificate_files,
    write_result_csv,
    write_result_json,
)
from mfbsde.meanfield import global_solve
from mfbsde.solver import SolverConfig

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

MINIMAL = """
[scenario]
T = 2.0
terminal = w
f = 0.0
[constants]
C = 1.0
gamma = 1.0
xi_bound = 1.0
[solver]
"""


def _write(tmp_path, text, name="case.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return p


# ---------------------------------------------------------------- parsing

@pytest.mark.parametrize(
    "fname", sorted(p.name for p in CONFIG_DIR.glob("*.cfg"))
)
def test_shipped_configs_parse(fname):
    scenario, solver, options, text = load_config(CONFIG_DIR / fname)
    assert scenario.T > 0
    assert scenario.terminal is not None
    assert (scenario.f is not None) or (
        scenario.f1 is not None and scenario.f2 is not None
    )
    assert solver.n_steps > 0 and solver.n_paths > 0
    assert options.prefix
    assert text.strip()


def test_shipped_config_count():
    assert len(list(CONFIG_DIR.glob("*.cfg"))) == 5


def test_ex22_fields():
    scenario, solver, options, _ = load_config(CONFIG_DIR / "ex22.cfg")
    assert scenario.name == "ex2.2"
    assert (scenario.n, scenario.d) == (1, 1)
    assert scenario.T == 1.0
    assert (scenario.C, scenario.gamma, scenario.alpha) == (0.2, 0.4, 0.0)
    assert scenario.xi_bound == 1.0
    assert scenario.ctilde == 5.0
    assert scenario.forms == frozenset({"quad-growth", "global-ode"})
    assert scenario.f is not None and scenario.f1 is None and scenario.f2 is None
    assert solver.n_steps == 80
    assert solver.n_paths == 20_000
    assert solver.seed == 7
    assert solver.n_windows == 4
    assert solver.override_epsilon is True
    assert solver.track_ball is False
    assert (options.directory, options.prefix) == ("out", "ex22")


def test_linear_fields():
    scenario, solver, _, _ = load_config(CONFIG_DIR / "linear.cfg")
    assert scenario.name == "linear-meanz"
    assert scenario.xi_bound == 4.0
    assert solver.tol_fp == 1e-4
    assert solver.n_windows == 2


def test_defaults_fill_in(tmp_path):
    scenario, solver, options, _ = load_config(_write(tmp_path, MINIMAL, "mini.cfg"))
    # scenario name falls back to the file stem
    assert scenario.name == "mini"
    assert (scenario.n, scenario.d) == (1, 1)
    assert scenario.alpha == 0.0
    assert scenario.ctilde is None
    assert scenario.forms == frozenset()
    assert (solver.n_steps, solver.n_paths, solver.seed) == (100, 50_000, 0)
    assert solver.tol_fp == 1e-3
    assert solver.z_clamp == 100.0
    assert solver.override_epsilon is False
    assert solver.track_ball is True
    assert solver.n_windows is None and solver.window_width is None
    assert solver.basis.degree == 3 and solver.basis.ridge == 1e-8
    assert options == OutputOptions()


def test_split_pair_config(tmp_path):
    text = MINIMAL.replace("f = 0.0", "f1 = abs(y)\nf2 = abs(ybar)")
    scenario, _, _, _ = load_config(_write(tmp_path, text))
    assert scenario.f is None
    assert scenario.f1 is not None and scenario.f2 is not None


@pytest.mark.parametrize("drop", ["scenario", "constants", "solver"])
def test_missing_section_rejected(tmp_path, drop):
    text = MINIMAL.replace(f"[{drop}]", f"[{drop}_typo]")
    with pytest.raises(InvalidInput, match=rf"missing \[{drop}\]"):
        load_config(_write(tmp_path, text))


def test_missing_required_key(tmp_path):
    text = MINIMAL.replace("T = 2.0", "")
    with pytest.raises(InvalidInput, match="missing config key 'T'"):
        load_config(_write(tmp_path, text))


def test_generator_required(tmp_path):
    text = MINIMAL.replace("f = 0.0", "")
    with pytest.raises(InvalidInput, match="f1, f2"):
        load_config(_write(tmp_path, text))


def test_generator_exclusive(tmp_path):
    text = MINIMAL.replace("f = 0.0", "f = 0.0\nf1 = 1.0\nf2 = 0.0")
    with pytest.raises(InvalidInput):
        load_config(_write(tmp_path, text))


def test_bad_int_value(tmp_path):
    text = MINIMAL + "steps = soon\n"
    with pytest.raises(InvalidInput, match="bad value for 'steps'"):
        load_config(_write(tmp_path, text))


def test_bad_bool_value(tmp_path):
    text = MINIMAL + "override_epsilon = maybe\n"
    with pytest.raises(InvalidInput, match="override_epsilon"):
        load_config(_write(tmp_path, text))


def test_bool_spellings(tmp_path):
    for raw, expected in [("yes", True), ("on", True), ("0", False), ("Off", False)]:
        text = MINIMAL + f"override_epsilon = {raw}\n"
        _, solver, _, _ = load_config(_write(tmp_path, text))
        assert solver.override_epsilon is expected


def test_missing_file_rejected(tmp_path):
    with pytest.raises(InvalidInput, match="not found"):
        load_config(tmp_path / "nope.cfg")


def test_malformed_ini_rejected(tmp_path):
    with pytest.raises(InvalidInput, match="malformed config"):
        load_config(_write(tmp_path, "steps = 3\nno section header anywhere\n"))


# --------------------------------------------------------------- manifests

def test_manifest_digest_round_trip(tmp_path):
    path = _write(tmp_path, MINIMAL)
    _, solver, _, text = load_config(path)
    man = manifest_for(path, text, solver, "global")
    assert man.config_sha256 == hashlib.sha256(text.encode()).hexdigest()
    assert man.seed == solver.seed and man.n_steps == solver.n_steps
    # digest is a pure function of the fields
    again = manifest_for(path, text, solver, "global")
    assert again.digest == man.digest
    d = man.as_dict()
    assert d["manifest_sha256"] == man.digest
    json.dumps(d)  # serialisable


def test_manifest_digest_sensitivity(tmp_path):
    path = _write(tmp_path, MINIMAL)
    _, solver, _, text = load_config(path)
    man = manifest_for(path, text, solver, "global")
    assert manifest_for(path, text, solver, "picard").digest != man.digest
    bumped = dataclasses.replace(man, seed=man.seed + 1)
    assert bumped.digest != man.digest


# ----------------------------------------------------------- output writers

@pytest.fixture(scope="module")
def small_run(tmp_path_factory):
    scenario = linear_scenario()
    solver = SolverConfig(
        n_steps=10,
        n_paths=400,
        seed=5,
        tol_fp=1e-3,
        n_windows=1,
        override_epsilon=True,
        track_ball=False,
    )
    ensemble = simulate_brownian(build_grid(scenario.T, 10), 1, 400, 5)
    result = global_solve(scenario, ensemble, solver)
    manifest = RunManifest(
        config_path="configs/linear.cfg",
        config_sha256=hashlib.sha256(b"stub").hexdigest(),
        selector="global",
        seed=5,
        n_steps=10,
        n_paths=400,
        package_version="0.0-test",
    )
    return result, manifest


def test_write_result_csv(small_run, tmp_path):
    result, manifest = small_run
    out = tmp_path / "run.csv"
    write_result_csv(out, result, manifest)
    lines = out.read_text().splitlines()
    assert lines[0] == f"# manifest_sha256={manifest.digest}"
    assert lines[1] == "t,m_y1,sd_y1,m_z1,mean_z_sq"
    times = result.m_y.times()
    assert len(lines) == 2 + len(times)
    # repr() formatting keeps the grid exactly recoverable
    got_t = np.array([float(row.split(",")[0]) for row in lines[2:]])
    assert np.array_equal(got_t, times)
    for row in lines[2:]:
        assert all(np.isfinite(float(cell)) for cell in row.split(","))


def test_write_result_csv_with_envelope(small_run, tmp_path):
    result, manifest = small_run
    out = tmp_path / "run_env.csv"
    write_result_csv(out, result, manifest, alpha_fn=lambda t: 2.0 * np.ones_like(t))
    lines = out.read_text().splitlines()
    assert lines[1].endswith(",alpha_bound")
    assert all(float(row.split(",")[-1]) == 2.0 for row in lines[2:])


def test_write_result_json(small_run, tmp_path):
    result, manifest = small_run
    out = tmp_path / "run.json"
    write_result_json(out, result, manifest)
    payload = json.loads(out.read_text())
    assert payload["manifest"]["manifest_sha256"] == manifest.digest
    assert payload["manifest"]["selector"] == "global"
    assert len(payload["times"]) == len(result.m_y.times())
    # stitched runs carry one trace per window
    assert payload["trace"][0]["converged"] is True
    assert payload["windows"] == [[0, 10]]


def test_write_certificate_files(small_run, tmp_path):
    _, manifest = small_run
    cert = certify(example_22())
    txt, js = write_certificate_files(tmp_path / "certs", "ex22", cert, manifest)
    assert txt.exists() and js.exists()
    body = txt.read_text()
    assert "window width eps" in body
    assert manifest.digest in body
    payload = json.loads(js.read_text())
    assert payload["manifest"]["manifest_sha256"] == manifest.digest
    assert payload["ctilde"] == 5.0
