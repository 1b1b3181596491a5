"""Acceptance criteria: one callable per criterion, shared by the test
suite and the ``validate`` CLI command.

Each criterion returns a :class:`CriterionResult` with a machine-readable
pass/fail, its runtime, the effective tolerances (environment overrides via
``MFBSDE_TOL_<KEY>`` are honoured and reported), and enough detail to see
*why* it passed or failed.  Heavy runs shared between criteria are cached
module-wide.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field as dc_field
from pathlib import Path

import numpy as np

from . import oracle
from .certificates import build_chain, certify, ode_bound
from .config import RunManifest, write_result_csv
from .core import Window, build_grid, simulate_brownian
from .meanfield import global_solve, local_solve, multidim_solve, picard_global, shift_solve_simple
from .scenario import (
    FORM_SPLIT_QUADRATIC,
    ScenarioSpec,
    example_21,
    example_22,
    example_41,
    linear_scenario,
)
from .solver import SolverConfig
from . import dsl

__all__ = ["CriterionResult", "run_criterion", "run_all", "CRITERIA"]

_FIXTURE_DIR = Path(__file__).resolve().parents[2] / "tests" / "fixtures"
_cache: dict = {}


@dataclass
class CriterionResult:
    cid: int
    name: str
    passed: bool
    runtime: float
    limit: float | None
    details: dict = dc_field(default_factory=dict)
    tolerances: dict = dc_field(default_factory=dict)

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lim = f"/{self.limit:.0f}s" if self.limit else ""
        over = [k for k, v in self.tolerances.items() if v.get("overridden")]
        note = f" [tolerance overrides: {', '.join(over)}]" if over else ""
        return f"{status} criterion {self.cid}: {self.name} ({self.runtime:.2f}s{lim}){note}"

    def as_dict(self) -> dict:
        return {
            "criterion": self.cid,
            "name": self.name,
            "passed": self.passed,
            "runtime_seconds": self.runtime,
            "runtime_limit_seconds": self.limit,
            "details": _plain(self.details),
            "tolerances": self.tolerances,
        }


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    return obj


def _tol(key: str, default: float, tolerances: dict) -> float:
    env = os.environ.get(f"MFBSDE_TOL_{key.upper()}")
    value = float(env) if env is not None else default
    tolerances[key] = {"value": value, "default": default, "overridden": env is not None}
    return value


# ---------------------------------------------------------------------------
# criterion 1: certificate algebra on random parameter tuples
# ---------------------------------------------------------------------------


def criterion_1() -> CriterionResult:
    tols: dict = {}
    t_linear = _tol("c1_linear_identity", 1e-12, tols)
    t_root = _tol("c1_root_identity", 1e-10, tols)
    rng = np.random.default_rng(20240819)
    n_tuples = 1000
    t0 = time.perf_counter()
    worst_lin = 0.0
    worst_root = 0.0
    min_delta = math.inf
    ceiling_ok = True
    for _ in range(n_tuples):
        C = rng.uniform(0.0, 2.0)
        gamma = rng.uniform(0.5, 4.0)
        alpha = rng.uniform(0.0, 0.9)
        xi = rng.uniform(0.0, 1.0)
        T = rng.uniform(0.25, 2.0)
        ch = build_chain(C, gamma, alpha, xi, T)
        min_delta = min(min_delta, ch.Delta)
        worst_lin = max(
            worst_lin, abs(ch.one_minus_delta_A - ch.one_minus_delta_A_closed)
        )
        worst_root = max(worst_root, ch.root_residual)
        if ch.A > ch.A_ceiling * (1.0 + 1e-12):
            ceiling_ok = False
    runtime = time.perf_counter() - t0
    passed = (
        min_delta >= 0.0
        and worst_lin <= t_linear
        and worst_root <= t_root
        and ceiling_ok
        and runtime < 1.0
    )
    return CriterionResult(
        1,
        "certificate algebra on 1000 random parameter tuples",
        passed,
        runtime,
        1.0,
        details={
            "tuples": n_tuples,
            "min_discriminant": min_delta,
            "max_linear_identity_error": worst_lin,
            "max_root_identity_residual": worst_root,
            "root_ceiling_respected": ceiling_ok,
        },
        tolerances=tols,
    )


# ---------------------------------------------------------------------------
# criterion 2: ODE envelope closed form vs numerical integration
# ---------------------------------------------------------------------------


def _rk4_envelope(ctilde: np.ndarray, T: np.ndarray, n_steps: int, n_out: int):
    """Backward-in-time RK4 for ``a' = -c - 3c*a`` on the normalised clock,
    in extended precision; returns values at ``n_out + 1`` evenly spaced
    times (t = T down to 0) per parameter pair."""
    c = np.asarray(ctilde, dtype=np.longdouble)
    Tl = np.asarray(T, dtype=np.longdouble)
    a = c.copy()  # value at t = T
    h = np.longdouble(1.0) / n_steps
    keep = n_steps // n_out
    out = np.empty((n_out + 1, c.size), dtype=np.longdouble)
    out[0] = a

    def f(v):
        return Tl * (c + 3.0 * c * v)

    for step in range(1, n_steps + 1):
        k1 = f(a)
        k2 = f(a + 0.5 * h * k1)
        k3 = f(a + 0.5 * h * k2)
        k4 = f(a + h * k3)
        a = a + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if step % keep == 0:
            out[step // keep] = a
    return out


def criterion_2() -> CriterionResult:
    tols: dict = {}
    t_sup = _tol("c2_sup_error", 1e-8, tols)
    t0 = time.perf_counter()
    combos = [(c, T) for c in (0.5, 1.0, 2.0) for T in (0.5, 1.0, 2.0)]
    cs = np.array([c for c, _ in combos])
    Ts = np.array([T for _, T in combos])
    n_out = 100
    numeric = _rk4_envelope(cs, Ts, 20_000, n_out)
    worst = 0.0
    for j, (c, T) in enumerate(combos):
        fn, _ = ode_bound(c, T)
        # normalised clock sigma runs t = T -> 0
        t_nodes = T * (1.0 - np.linspace(0.0, 1.0, n_out + 1))
        closed = fn(t_nodes)
        worst = max(worst, float(np.max(np.abs(closed - numeric[:, j].astype(np.float64)))))
    runtime = time.perf_counter() - t0
    passed = worst <= t_sup and runtime < 1.0
    return CriterionResult(
        2,
        "ODE envelope closed form vs fourth-order integration",
        passed,
        runtime,
        1.0,
        details={"combos": combos, "sup_error": worst},
        tolerances=tols,
    )


# ---------------------------------------------------------------------------
# criterion 3 (and 10): linear mean-field problem vs closed form
# ---------------------------------------------------------------------------

_C3_SEED = 31003


def _c3_setup():
    scenario = linear_scenario(
        a=0.0, b=0.0, c=0.0, dbar=1.0, g=0.0, terminal="w", T=1.0, name="linear-meanz"
    )
    config = SolverConfig(
        n_steps=100,
        n_paths=100_000,
        seed=_C3_SEED,
        n_windows=4,
        override_epsilon=True,
        track_ball=False,
        tol_fp=1e-4,
    )
    return scenario, config


def _c3_run():
    scenario, config = _c3_setup()
    grid = build_grid(scenario.T, config.n_steps)
    ensemble = simulate_brownian(grid, scenario.d, config.n_paths, config.seed)
    return scenario, config, global_solve(scenario, ensemble, config)


def _c3_manifest(config: SolverConfig) -> RunManifest:
    return RunManifest(
        config_path="<criterion-3>",
        config_sha256="0" * 64,
        selector="global",
        seed=config.seed,
        n_steps=config.n_steps,
        n_paths=config.n_paths,
        package_version="acceptance",
    )


def _c3_csv_bytes() -> bytes:
    scenario, config, result = _c3_run()
    import tempfile

    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "c3.csv"
        write_result_csv(out, result, _c3_manifest(config))
        data = out.read_bytes()
    return data


def criterion_3() -> CriterionResult:
    tols: dict = {}
    t_my = _tol("c3_mean_y", 0.02, tols)
    t_mz = _tol("c3_mean_z", 0.03, tols)
    t0 = time.perf_counter()
    if "c3" not in _cache:
        _cache["c3"] = _c3_run()
    scenario, config, result = _cache["c3"]
    runtime = time.perf_counter() - t0
    times = result.m_y.times()
    my_err = float(np.max(np.abs(result.m_y.values[:, 0] - (scenario.T - times))))
    mz_err = float(np.max(np.abs(result.m_z.values[:, 0, 0] - 1.0)))
    passed = my_err <= t_my and mz_err <= t_mz and runtime < 60.0
    return CriterionResult(
        3,
        "linear mean-integrand problem vs closed form (N=100, 1e5 paths)",
        passed,
        runtime,
        60.0,
        details={
            "sup_error_mean_y": my_err,
            "sup_error_mean_z": mz_err,
            "windows": result.windows,
            "iterations_per_window": [t.iterations for t in result.trace],
        },
        tolerances=tols,
    )


# ---------------------------------------------------------------------------
# criterion 4: mean shift leaves the integrand untouched
# ---------------------------------------------------------------------------


def criterion_4() -> CriterionResult:
    tols: dict = {}
    t_y = _tol("c4_mean_abs_y", 0.02, tols)
    t0 = time.perf_counter()
    scenario = ScenarioSpec(
        name="shift-identity",
        n=1,
        d=1,
        T=1.0,
        terminal=dsl.parse("w", dsl.TERMINAL_VARS),
        f1=dsl.parse("0"),
        f2=dsl.parse("norm2(z)^2"),
        C=1.0,
        gamma=1.0,
        alpha=0.0,
        xi_bound=4.0,
        forms=frozenset({FORM_SPLIT_QUADRATIC}),
    )
    config = SolverConfig(
        n_steps=60, n_paths=60_000, seed=31004, track_ball=False,
        override_epsilon=True,
    )
    grid = build_grid(scenario.T, config.n_steps)
    ensemble = simulate_brownian(grid, scenario.d, config.n_paths, config.seed)
    result = shift_solve_simple(scenario, ensemble, config)
    runtime = time.perf_counter() - t0

    z_same = result.z.values.tobytes() == result.extras["z_before_shift"].tobytes()
    times = result.m_y.times()
    target = ensemble.levels[:, :, 0] + (scenario.T - times)[None, :]
    err = float(np.max(np.mean(np.abs(result.y.values[:, :, 0] - target), axis=0)))
    passed = z_same and err <= t_y and runtime < 60.0
    return CriterionResult(
        4,
        "mean shift: integrand bit-identical, state matches closed form",
        passed,
        runtime,
        60.0,
        details={
            "z_bitwise_identical": z_same,
            "sup_mean_abs_error_y": err,
        },
        tolerances=tols,
    )


# ---------------------------------------------------------------------------
# criteria 5 and 6: Picard vs stitched fixed point, envelope violation rate
# ---------------------------------------------------------------------------

_C5_SEED = 31005


def _c5_runs():
    if "c5" in _cache:
        return _cache["c5"]
    scenario = example_22()
    config = SolverConfig(
        n_steps=80,
        n_paths=40_000,
        seed=_C5_SEED,
        tol_fp=1e-3,
        max_outer=40,
        n_windows=4,
        override_epsilon=True,
        track_ball=False,
    )
    grid = build_grid(scenario.T, config.n_steps)
    ensemble = simulate_brownian(grid, scenario.d, config.n_paths, config.seed)
    stitched = global_solve(scenario, ensemble, config)
    picard = picard_global(scenario, ensemble, config)
    _cache["c5"] = (scenario, config, stitched, picard)
    return _cache["c5"]


def criterion_5() -> CriterionResult:
    tols: dict = {}
    t_extra = _tol("c5_extra_relative", 0.01, tols)
    t0 = time.perf_counter()
    scenario, config, stitched, picard = _c5_runs()
    runtime = time.perf_counter() - t0
    ref = stitched.m_y.values[:, 0]
    other = picard.m_y.values[:, 0]
    bound = 2.0 * config.tol_fp + t_extra * np.maximum(1.0, np.abs(ref))
    gaps = np.abs(ref - other)
    worst = float(np.max(gaps - bound))
    passed = worst <= 0.0
    return CriterionResult(
        5,
        "Picard scheme matches the stitched fixed point (time-dependent driver)",
        passed,
        runtime,
        None,
        details={
            "max_gap": float(np.max(gaps)),
            "max_gap_minus_bound": worst,
            "picard_iterations": picard.trace.iterations,
            "stitched_iterations": [t.iterations for t in stitched.trace],
        },
        tolerances=tols,
    )


def criterion_6() -> CriterionResult:
    tols: dict = {}
    t_rate = _tol("c6_violation_rate", 0.005, tols)
    t0 = time.perf_counter()
    scenario, config, stitched, picard = _c5_runs()
    runtime = time.perf_counter() - t0
    rate = float(stitched.flags["alpha_envelope_rate"])
    passed = rate < t_rate
    return CriterionResult(
        6,
        "ODE envelope violation rate below Monte Carlo tolerance",
        passed,
        runtime,
        None,
        details={
            "violation_rate": rate,
            "ctilde": stitched.certificate.ctilde,
            "lambda": stitched.certificate.lam,
        },
        tolerances=tols,
    )


# ---------------------------------------------------------------------------
# criteria 7 and 8: power-growth driver vs lattice fixture; contraction window
# ---------------------------------------------------------------------------

_C7_SEED = 31007


def _c7_scenario() -> ScenarioSpec:
    return example_21(alpha=0.5, T=0.5, C=0.25, gamma=1.0)


def criterion_7() -> CriterionResult:
    tols: dict = {}
    t_my = _tol("c7_mean_y", 0.02, tols)
    fixture = oracle.load_fixture(_FIXTURE_DIR / "ex21_lattice.json")
    t0 = time.perf_counter()
    scenario = _c7_scenario()
    config = SolverConfig(
        n_steps=100,
        n_paths=60_000,
        seed=_C7_SEED,
        tol_fp=5e-4,
        n_windows=2,
        override_epsilon=True,
        track_ball=False,
    )
    grid = build_grid(scenario.T, config.n_steps)
    ensemble = simulate_brownian(grid, scenario.d, config.n_paths, config.seed)
    result = global_solve(scenario, ensemble, config)
    runtime = time.perf_counter() - t0

    # compare at the fixture's (coarser) nodes; both grids are uniform on
    # [0, T], so matching times sit at integer index ratios
    times = result.m_y.times()
    fix_t = fixture["times"]
    fix_my = fixture["m_y"]
    idx = np.round(fix_t / scenario.T * (len(times) - 1)).astype(int)
    aligned = np.abs(times[idx] - fix_t) < 1e-12
    my_main = result.m_y.values[idx, 0]
    scale = max(1.0, float(np.max(np.abs(fix_my))))
    err = float(np.max(np.abs(my_main - fix_my))) / scale
    passed = bool(np.all(aligned)) and err <= t_my and runtime < 120.0
    return CriterionResult(
        7,
        "power-growth driver vs pinned lattice reference",
        passed,
        runtime,
        120.0,
        details={
            "relative_sup_error_mean_y": err,
            "fixture_nodes": int(len(fix_t)),
            "fixture_lattice_steps": fixture["n_steps"],
            "nodes_aligned": bool(np.all(aligned)),
        },
        tolerances=tols,
    )


def criterion_8() -> CriterionResult:
    tols: dict = {}
    t0 = time.perf_counter()
    scenario = _c7_scenario()
    config = SolverConfig(
        n_steps=100,
        n_paths=40_000,
        seed=31008,
        tol_fp=1e-7,
        max_outer=25,
        override_epsilon=True,
        track_ball=True,
    )
    grid = build_grid(scenario.T, config.n_steps)
    ensemble = simulate_brownian(grid, scenario.d, config.n_paths, config.seed)
    cert = certify(scenario)
    # the analytic window width underflows doubles for these constants (its
    # logarithm is reported below); the contraction evidence is collected on
    # the final quarter-horizon window under the explicit override flag
    window = Window(50, 100)
    result = local_solve(
        scenario, ensemble, config, window=window, certificate=cert
    )
    runtime = time.perf_counter() - t0
    ratios = result.trace.ratios
    consecutive = 0
    best = 0
    for r in ratios:
        consecutive = consecutive + 1 if r < 1.0 else 0
        best = max(best, consecutive)
    passed = result.trace.converged and best >= 3
    return CriterionResult(
        8,
        "contraction ratios below one on the terminal window",
        passed,
        runtime,
        None,
        details={
            "ratios": [round(r, 5) for r in ratios],
            "max_consecutive_below_one": best,
            "iterations": result.trace.iterations,
            "window_width": window.width(grid),
            "certified_width_log": cert.chain.log_eps,
            "certified_width_underflows": cert.chain.eps_underflow,
        },
        tolerances=tols,
    )


# ---------------------------------------------------------------------------
# criterion 9: multi-dimensional split solve
# ---------------------------------------------------------------------------


def criterion_9() -> CriterionResult:
    tols: dict = {}
    t_ratio = _tol("c9_mean_ratio", 0.9, tols)
    t0 = time.perf_counter()
    scenario = example_41()
    config = SolverConfig(
        n_steps=50,
        n_paths=30_000,
        seed=31009,
        tol_fp=1e-3,
        max_outer=20,
        n_windows=1,
        override_epsilon=True,
        track_ball=False,
    )
    grid = build_grid(scenario.T, config.n_steps)
    ensemble = simulate_brownian(grid, scenario.d, config.n_paths, config.seed)
    result = multidim_solve(scenario, ensemble, config)
    runtime = time.perf_counter() - t0
    trace = result.trace[0] if isinstance(result.trace, list) else result.trace
    ratios = trace.ratios
    tail = ratios[-3:] if len(ratios) >= 3 else ratios
    avg_tail = float(np.mean(tail)) if tail else math.inf
    passed = trace.converged and trace.iterations <= 20 and avg_tail < t_ratio
    return CriterionResult(
        9,
        "vector split solve: contraction of the state-freezing iteration",
        passed,
        runtime,
        None,
        details={
            "iterations": trace.iterations,
            "ratios": [round(r, 5) for r in ratios],
            "avg_last3_ratio": avg_tail,
            "converged": trace.converged,
        },
        tolerances=tols,
    )


# ---------------------------------------------------------------------------
# criterion 10: byte-identical reruns
# ---------------------------------------------------------------------------


def criterion_10() -> CriterionResult:
    tols: dict = {}
    t0 = time.perf_counter()
    if "c3_csv" not in _cache:
        _cache["c3_csv"] = _c3_csv_bytes()
    first = _cache["c3_csv"]
    second = _c3_csv_bytes()
    runtime = time.perf_counter() - t0
    passed = first == second
    return CriterionResult(
        10,
        "identical config and seed give byte-identical CSV output",
        passed,
        runtime,
        None,
        details={"bytes": len(first), "identical": passed},
        tolerances=tols,
    )


CRITERIA = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
}


def run_criterion(cid: int) -> CriterionResult:
    if cid not in CRITERIA:
        raise KeyError(f"no criterion {cid}")
    return CRITERIA[cid]()


def run_all(ids=None) -> list[CriterionResult]:
    results = []
    for cid in sorted(ids or CRITERIA):
        results.append(run_criterion(cid))
    return results
