"""Run configuration files, manifests, and output writers.

Config files are INI-style text with four sections::

    [scenario]
    name = ex2.2
    n = 1
    d = 1
    T = 1.0
    terminal = sin(w)
    ; terminal_clamp = 1.0          (optional)
    f = 1 + s + abs(y) + abs(ybar) + 0.5*norm2(z)^2 + abs(sin(norm2(zbar)))
    ; or a split pair:  f1 = ...  /  f2 = ...
    ; components of a vector generator are separated by ';'
    forms = quad-growth global-ode

    [constants]
    C = 0.2
    gamma = 0.4
    alpha = 0.0
    xi_bound = 1.0
    ; ctilde = 5.0                  (optional envelope constant)

    [solver]
    steps = 100
    paths = 100000
    seed = 7
    basis_degree = 3
    ridge = 1e-8
    tol_fp = 1e-3
    max_outer = 30
    ; n_windows = 4
    ; window_width = 0.25
    override_epsilon = true
    z_clamp = 100.0

    [output]
    dir = out
    prefix = run

Every output file embeds the SHA-256 manifest hash of (config text, solver
settings, seed, selector), so results can be traced back to their inputs.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import dsl
from .errors import InvalidInput
from .regression import RegressionBasis
from .scenario import ScenarioSpec
from .solver import SolverConfig

__all__ = [
    "OutputOptions",
    "RunManifest",
    "load_config",
    "manifest_for",
    "write_result_csv",
    "write_certificate_files",
    "write_result_json",
]


@dataclass(frozen=True)
class OutputOptions:
    directory: str = "out"
    prefix: str = "run"


def _get(section, key, conv, default=None, required=False):
    if key not in section or section[key].strip() == "":
        if required:
            raise InvalidInput(f"missing config key '{key}'")
        return default
    raw = section[key].strip()
    try:
        if conv is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return conv(raw)
    except ValueError as exc:
        raise InvalidInput(f"bad value for '{key}': {raw!r}") from exc


def load_config(path) -> tuple[ScenarioSpec, SolverConfig, OutputOptions, str]:
    """Parse a config file into a scenario, solver settings, and output
    options.  Returns the raw text as well (it feeds the manifest hash)."""
    p = Path(path)
    if not p.exists():
        raise InvalidInput(f"config file {p} not found")
    text = p.read_text()
    cp = configparser.ConfigParser(inline_comment_prefixes=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise InvalidInput(f"malformed config: {exc}") from exc
    for sect in ("scenario", "constants", "solver"):
        if sect not in cp:
            raise InvalidInput(f"missing [{sect}] section")

    sc = cp["scenario"]
    cs = cp["constants"]
    sv = cp["solver"]
    out = cp["output"] if "output" in cp else {}

    f_text = _get(sc, "f", str)
    f1_text = _get(sc, "f1", str)
    f2_text = _get(sc, "f2", str)
    forms = tuple(_get(sc, "forms", str, default="").split())

    scenario = ScenarioSpec(
        name=_get(sc, "name", str, default=p.stem),
        n=_get(sc, "n", int, default=1),
        d=_get(sc, "d", int, default=1),
        T=_get(sc, "T", float, required=True),
        terminal=dsl.parse(_get(sc, "terminal", str, required=True), dsl.TERMINAL_VARS),
        terminal_clamp=_get(sc, "terminal_clamp", float),
        f=dsl.parse(f_text) if f_text else None,
        f1=dsl.parse(f1_text) if f1_text else None,
        f2=dsl.parse(f2_text) if f2_text else None,
        C=_get(cs, "C", float, required=True),
        gamma=_get(cs, "gamma", float, required=True),
        alpha=_get(cs, "alpha", float, default=0.0),
        xi_bound=_get(cs, "xi_bound", float, required=True),
        ctilde=_get(cs, "ctilde", float),
        forms=frozenset(forms),
    )

    basis = RegressionBasis(
        degree=_get(sv, "basis_degree", int, default=3),
        n_bins=_get(sv, "basis_bins", int, default=1),
        ridge=_get(sv, "ridge", float, default=1e-8),
    )
    solver = SolverConfig(
        n_steps=_get(sv, "steps", int, default=100),
        n_paths=_get(sv, "paths", int, default=50_000),
        seed=_get(sv, "seed", int, default=0),
        basis=basis,
        tol_inner=_get(sv, "tol_inner", float, default=1e-10),
        max_inner=_get(sv, "max_inner", int, default=60),
        tol_fp=_get(sv, "tol_fp", float, default=1e-3),
        max_outer=_get(sv, "max_outer", int, default=30),
        z_clamp=_get(sv, "z_clamp", float, default=100.0),
        n_windows=_get(sv, "n_windows", int),
        window_width=_get(sv, "window_width", float),
        override_epsilon=_get(sv, "override_epsilon", bool, default=False),
        track_ball=_get(sv, "track_ball", bool, default=True),
        bmo_budget=_get(sv, "bmo_budget", float),
    )
    options = OutputOptions(
        directory=_get(out, "dir", str, default="out"),
        prefix=_get(out, "prefix", str, default="run"),
    )
    return scenario, solver, options, text


@dataclass(frozen=True)
class RunManifest:
    """Provenance record embedded in every output file."""

    config_path: str
    config_sha256: str
    selector: str
    seed: int
    n_steps: int
    n_paths: int
    package_version: str

    @property
    def digest(self) -> str:
        body = json.dumps(dataclasses.asdict(self), sort_keys=True)
        return hashlib.sha256(body.encode()).hexdigest()

    def as_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["manifest_sha256"] = self.digest
        return d


def manifest_for(path, text: str, solver: SolverConfig, selector: str) -> RunManifest:
    from . import __version__

    return RunManifest(
        config_path=str(path),
        config_sha256=hashlib.sha256(text.encode()).hexdigest(),
        selector=selector,
        seed=solver.seed,
        n_steps=solver.n_steps,
        n_paths=solver.n_paths,
        package_version=__version__,
    )


def _fmt(x: float) -> str:
    # shortest round-trip decimal form keeps reruns byte-identical
    return repr(float(x))


def write_result_csv(path, result, manifest: RunManifest, alpha_fn=None) -> None:
    """Node-indexed summary: time, mean/sd of the state, mean integrand,
    mean squared integrand magnitude, and the envelope bound when known.
    One data row per grid node."""
    times = result.m_y.times()
    my = result.m_y.values.reshape(len(times), -1)
    mz = result.m_z.values.reshape(len(times), -1)
    P = result.y.n_paths
    sd = result.y.values.reshape(P, len(times), -1).std(axis=0)
    zsq = np.mean(
        np.sum(result.z.values.reshape(P, len(times), -1) ** 2, axis=2), axis=0
    )
    env = alpha_fn(times) if alpha_fn is not None else None

    buf = io.StringIO()
    buf.write(f"# manifest_sha256={manifest.digest}\n")
    writer = csv.writer(buf, lineterminator="\n")
    header = (
        ["t"]
        + [f"m_y{k + 1}" for k in range(my.shape[1])]
        + [f"sd_y{k + 1}" for k in range(sd.shape[1])]
        + [f"m_z{k + 1}" for k in range(mz.shape[1])]
        + ["mean_z_sq"]
        + (["alpha_bound"] if env is not None else [])
    )
    writer.writerow(header)
    for i, t in enumerate(times):
        row = (
            [_fmt(t)]
            + [_fmt(v) for v in my[i]]
            + [_fmt(v) for v in sd[i]]
            + [_fmt(v) for v in mz[i]]
            + [_fmt(zsq[i])]
            + ([_fmt(env[i])] if env is not None else [])
        )
        writer.writerow(row)
    Path(path).write_text(buf.getvalue())


def write_result_json(path, result, manifest: RunManifest) -> None:
    payload = result.as_dict()
    payload["manifest"] = manifest.as_dict()
    Path(path).write_text(json.dumps(payload, indent=1))


def write_certificate_files(out_dir, prefix: str, cert, manifest: RunManifest) -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    txt = out / f"{prefix}_certificate.txt"
    js = out / f"{prefix}_certificate.json"
    txt.write_text(
        cert.report_text() + f"\n  manifest sha256               : {manifest.digest}\n"
    )
    payload = cert.as_dict()
    payload["manifest"] = manifest.as_dict()
    js.write_text(json.dumps(payload, indent=1))
    return txt, js
