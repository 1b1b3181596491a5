"""Mean-field solvers: frozen-mean fixed point, Picard scheme, mean shifts.

The quadratic drivers couple each path to the ensemble through the means of
the state and of the martingale integrand.  All solvers share one backward
regression engine and differ only in what they freeze between sweeps:

* ``gamma_map`` / ``local_solve`` freeze the mean curves and iterate the
  frozen-mean solve to its fixed point on one window;
* ``global_solve`` stitches windows backward across the horizon;
* ``picard_global`` iterates the linearised scheme whose source term is the
  previous iterate's full driver increment;
* ``shift_solve_simple`` / ``shift_fixed_point`` handle split generators
  ``f1 + mean(f2)`` where the mean shift moves the state but leaves the
  integrand untouched;
* ``multidim_solve`` handles vector-valued split generators with a
  z-Lipschitz first part, iterating the mean-integrand curve inside and the
  frozen state outside.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import dsl
from .certificates import Certificate, certify
from .core import (
    MeanCurve,
    PathEnsemble,
    ProcessGrid,
    Window,
    ensemble_mean,
)
from .diagnostics import (
    bmo2_estimate,
    bmo_budget_global,
    build_report,
    check_alpha_envelope,
)
from .errors import (
    InvalidInput,
    MaxIterations,
    NonContraction,
    WindowTooWide,
)
from .scenario import (
    FORM_GLOBAL_ODE,
    FORM_SPLIT_LIPSCHITZ,
    FORM_SPLIT_QUADRATIC,
    ScenarioSpec,
)
from .solver import BackwardSolver, SolverConfig, frozen_mean_driver

__all__ = [
    "FixedPointTrace",
    "SolveResult",
    "gamma_map",
    "local_solve",
    "global_solve",
    "picard_global",
    "shift_solve_simple",
    "shift_fixed_point",
    "multidim_solve",
]

_ALPHA_RATE_TOLERANCE = 0.005  # flagged when the envelope violation rate exceeds this


@dataclass
class FixedPointTrace:
    """Per-iterate record of one fixed-point run."""

    y_distances: list[float] = field(default_factory=list)
    z_distances: list[float] = field(default_factory=list)
    mean_distances: list[float] = field(default_factory=list)
    ratios: list[float] = field(default_factory=list)
    ball_sup: list[float] = field(default_factory=list)
    ball_bmo: list[float] = field(default_factory=list)
    ball_ok: list[bool] = field(default_factory=list)
    wall_times: list[float] = field(default_factory=list)
    alpha_rates: list[float] = field(default_factory=list)
    converged: bool = False

    @property
    def iterations(self) -> int:
        return len(self.y_distances)

    def total_distances(self) -> list[float]:
        return [a + b for a, b in zip(self.y_distances, self.z_distances)]

    def push(self, y_dist: float, z_dist: float, mean_dist: float, wall: float) -> float:
        total = y_dist + z_dist
        if self.y_distances:
            prev = self.y_distances[-1] + self.z_distances[-1]
            self.ratios.append(total / prev if prev > 0 else 0.0)
        self.y_distances.append(y_dist)
        self.z_distances.append(z_dist)
        self.mean_distances.append(mean_dist)
        self.wall_times.append(wall)
        return total

    def as_dict(self) -> dict:
        return {
            "y_distances": self.y_distances,
            "z_distances": self.z_distances,
            "mean_distances": self.mean_distances,
            "ratios": self.ratios,
            "ball_sup": self.ball_sup,
            "ball_bmo": self.ball_bmo,
            "ball_ok": self.ball_ok,
            "wall_times": self.wall_times,
            "alpha_rates": self.alpha_rates,
            "converged": self.converged,
            "iterations": self.iterations,
        }


@dataclass
class SolveResult:
    """Solver output: processes, means, trace(s), diagnostics, certificate."""

    y: ProcessGrid
    z: ProcessGrid
    m_y: MeanCurve
    m_z: MeanCurve
    trace: FixedPointTrace | list
    certificate: Certificate | None = None
    diagnostics: object = None
    windows: list[tuple[int, int]] = field(default_factory=list)
    flags: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        trace = self.trace
        if isinstance(trace, list):
            trace_out = [t.as_dict() for t in trace]
        else:
            trace_out = trace.as_dict()
        return {
            "times": self.m_y.times().tolist(),
            "m_y": self.m_y.values.tolist(),
            "m_z": self.m_z.values.tolist(),
            "trace": trace_out,
            "windows": [list(w) for w in self.windows],
            "flags": {k: _plain(v) for k, v in self.flags.items()},
            "diagnostics": self.diagnostics.as_dict() if self.diagnostics else None,
            "certificate": self.certificate.as_dict() if self.certificate else None,
        }


def _plain(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    return v


# ---------------------------------------------------------------------------
# shared helpers
# ---------------------------------------------------------------------------


def _m2_dist(z_a: np.ndarray, z_b: np.ndarray, steps: np.ndarray) -> float:
    diff = z_a - z_b
    P = diff.shape[0]
    sq = np.sum(diff.reshape(P, diff.shape[1], -1) ** 2, axis=2)
    return float(np.sqrt(np.mean(sq[:, :-1] @ steps)))


def _sup_dist(y_a: np.ndarray, y_b: np.ndarray) -> float:
    return float(np.max(np.abs(y_a - y_b)))


def _s2_dist(y_a: np.ndarray, y_b: np.ndarray) -> float:
    diff = y_a - y_b
    P = diff.shape[0]
    mags = np.linalg.norm(diff.reshape(P, diff.shape[1], -1), axis=2)
    return float(np.sqrt(np.mean(mags.max(axis=1) ** 2)))


def _window_steps(ensemble: PathEnsemble, window: Window) -> np.ndarray:
    return ensemble.grid.steps[window.lo : window.hi]


def _zero_driver(i, s, y, z):
    return np.zeros_like(y)


def _martingale_start(solver: BackwardSolver, window: Window, terminal: np.ndarray):
    """Driver-free sweep: the regression martingale closed by ``terminal``."""
    return solver.solve(window, terminal, _zero_driver)


def _check_window_width(
    window: Window, ensemble: PathEnsemble, cert: Certificate | None, config: SolverConfig
) -> bool:
    if cert is None:
        return False
    width = window.width(ensemble.grid)
    exceeded = width > cert.chain.eps
    if exceeded and not config.override_epsilon:
        raise WindowTooWide(
            f"window width {width:.6g} exceeds the certified width "
            f"{cert.chain.eps:.6g} (log {cert.chain.log_eps:.4g}); "
            "set override_epsilon to proceed anyway"
        )
    if exceeded:
        warnings.warn(
            f"window width {width:.6g} exceeds the certified width "
            f"{cert.chain.eps:.6g}; proceeding on the override flag",
            RuntimeWarning,
            stacklevel=3,
        )
    return exceeded


def _terminal_for(
    scenario: ScenarioSpec, ensemble: PathEnsemble, window: Window, terminal
) -> np.ndarray:
    if terminal is not None:
        terminal = np.asarray(terminal, dtype=np.float64)
        if terminal.ndim == 1:
            terminal = terminal[:, None]
        return terminal
    if window.hi != ensemble.grid.n_steps:
        raise InvalidInput("interior window needs explicit terminal values")
    return scenario.terminal_values(ensemble.state(window.hi))


def _track_ball(trace, solver, cert, ensemble, z_vals, y_vals, span):
    zgrid = ProcessGrid(grid=ensemble.grid, values=z_vals, span=span)
    bmo = bmo2_estimate(zgrid, ensemble, regressions=solver._cache)
    sup = float(np.max(np.abs(y_vals)))
    trace.ball_sup.append(sup)
    trace.ball_bmo.append(bmo)
    ok = True
    if cert is not None:
        ok = bmo <= cert.chain.A and sup <= cert.ball_radius
    trace.ball_ok.append(bool(ok))


def _raise_fixed_point(trace, context: str):
    r = trace.ratios
    if len(r) >= 3 and all(x >= 1.0 - 1e-12 for x in r[-3:]):
        raise NonContraction(
            f"{context}: successive distances stopped contracting "
            f"(last ratios {', '.join(f'{x:.3f}' for x in r[-3:])})",
            trace,
        )
    raise MaxIterations(
        f"{context}: iteration budget exhausted at distance "
        f"{trace.total_distances()[-1]:.3e}",
        trace,
    )


def _diverging(trace) -> bool:
    r = trace.ratios
    if len(r) >= 3 and all(x >= 1.0 - 1e-12 for x in r[-3:]):
        d = trace.total_distances()
        return d[-1] > d[0]
    d = trace.total_distances()
    return bool(d and d[-1] > 1e9)


def _alpha_fn_for(scenario: ScenarioSpec, cert: Certificate | None):
    if cert is None:
        return None
    from .certificates import ode_bound

    fn, _ = ode_bound(cert.ctilde, scenario.T)
    return fn


def _finish_result(
    scenario,
    ensemble,
    config,
    solver,
    cert,
    y_vals,
    z_vals,
    span,
    trace,
    windows,
    flags,
    extras,
):
    ygrid = ProcessGrid(grid=ensemble.grid, values=y_vals, span=span)
    zgrid = ProcessGrid(grid=ensemble.grid, values=z_vals, span=span)
    alpha_fn = _alpha_fn_for(scenario, cert)
    budget = config.bmo_budget
    if budget is None and cert is not None and FORM_GLOBAL_ODE in scenario.forms:
        budget = bmo_budget_global(
            scenario.xi_bound, scenario.C, cert.lam, scenario.T, scenario.gamma
        )
    report = build_report(
        ygrid,
        zgrid,
        ensemble,
        gamma=scenario.gamma,
        p=config.p_norm,
        bmo_budget=budget,
        alpha_fn=alpha_fn,
        regressions=solver._cache,
        basis=config.basis,
        clamp_events=int(flags.get("clamp_events", 0)),
    )
    if alpha_fn is not None:
        env = check_alpha_envelope(ygrid, alpha_fn)
        flags["alpha_envelope_rate"] = env["violation_rate"]
        flags["alpha_envelope_ok"] = env["violation_rate"] <= _ALPHA_RATE_TOLERANCE
    return SolveResult(
        y=ygrid,
        z=zgrid,
        m_y=ensemble_mean(ygrid),
        m_z=ensemble_mean(zgrid),
        trace=trace,
        certificate=cert,
        diagnostics=report,
        windows=windows,
        flags=flags,
        extras=extras,
    )


# ---------------------------------------------------------------------------
# frozen-mean map and its local fixed point
# ---------------------------------------------------------------------------


def gamma_map(
    m_u,
    m_v,
    scenario: ScenarioSpec,
    ensemble: PathEnsemble,
    config: SolverConfig,
    window: Window | None = None,
    terminal: np.ndarray | None = None,
    solver: BackwardSolver | None = None,
):
    """One application of the frozen-mean solution map.

    Solves the BSDE whose generator has its mean slots frozen at the input
    curves and returns ``(Y, Z, m_Y, m_Z)``.  Drivers that ignore the mean
    slots make the output independent of the inputs, identically.
    """
    window = window or ensemble.grid.full_window()
    m_u = m_u.values if isinstance(m_u, MeanCurve) else np.asarray(m_u, dtype=np.float64)
    m_v = m_v.values if isinstance(m_v, MeanCurve) else np.asarray(m_v, dtype=np.float64)
    if m_u.ndim == 1:
        m_u = m_u[:, None]
    if m_v.ndim == 1:
        m_v = m_v[:, None, None]
    if m_u.shape[0] != window.n_nodes or m_v.shape[0] != window.n_nodes:
        raise InvalidInput("mean curves must be aligned with the window nodes")
    terminal = _terminal_for(scenario, ensemble, window, terminal)
    solver = solver or BackwardSolver(ensemble, config)
    res = solver.solve(window, terminal, frozen_mean_driver(scenario, m_u, m_v, window.lo))
    span = (window.lo, window.hi)
    ygrid = ProcessGrid(grid=ensemble.grid, values=res.y, span=span)
    zgrid = ProcessGrid(grid=ensemble.grid, values=res.z, span=span)
    return ygrid, zgrid, ensemble_mean(ygrid), ensemble_mean(zgrid)


def local_solve(
    scenario: ScenarioSpec,
    ensemble: PathEnsemble,
    config: SolverConfig,
    window: Window | None = None,
    terminal: np.ndarray | None = None,
    certificate: Certificate | None = None,
    init: tuple[np.ndarray, np.ndarray] | None = None,
    solver: BackwardSolver | None = None,
) -> SolveResult:
    """Fixed point of the frozen-mean map on one window.

    Starts from the regression martingale of the terminal data (zero mean
    integrand) unless ``init`` supplies explicit mean curves, then applies
    the frozen-mean solve until two successive iterates agree to ``tol_fp``
    in sup norm (state) plus empirical M2 distance (integrand).  Raises
    :class:`NonContraction` when the distances stop shrinking persistently,
    :class:`MaxIterations` on budget exhaustion.
    """
    if scenario.f is None:
        raise InvalidInput("local_solve needs a single-generator scenario")
    window = window or ensemble.grid.full_window()
    cert = certificate if certificate is not None else certify(scenario)
    exceeded = _check_window_width(window, ensemble, cert, config)
    solver = solver or BackwardSolver(ensemble, config)
    terminal = _terminal_for(scenario, ensemble, window, terminal)
    steps = _window_steps(ensemble, window)
    span = (window.lo, window.hi)
    n, d = scenario.n, scenario.d
    L = window.n_nodes

    trace = FixedPointTrace()
    clamp_events = 0

    if init is None:
        start = _martingale_start(solver, window, terminal)
        m_y = start.y.mean(axis=0)
        m_z = np.zeros((L, d, n))
    else:
        m_y = np.asarray(init[0], dtype=np.float64).reshape(L, n)
        m_z = np.asarray(init[1], dtype=np.float64).reshape(L, d, n)

    prev_y = prev_z = None
    driver_for = lambda mu, mv: frozen_mean_driver(scenario, mu, mv, window.lo)

    for _ in range(config.max_outer):
        t0 = time.perf_counter()
        sweep = solver.solve(window, terminal, driver_for(m_y, m_z))
        clamp_events += sweep.clamp_events
        wall = time.perf_counter() - t0
        new_my = sweep.y.mean(axis=0)
        new_mz = sweep.z.mean(axis=0)
        if config.track_ball:
            _track_ball(trace, solver, cert, ensemble, sweep.z, sweep.y, span)
        if prev_y is not None:
            y_dist = _sup_dist(sweep.y, prev_y)
            z_dist = _m2_dist(sweep.z, prev_z, steps)
            mean_dist = max(
                _sup_dist(new_my, m_y), _sup_dist(new_mz, m_z)
            )
            total = trace.push(y_dist, z_dist, mean_dist, wall)
            if total <= config.tol_fp:
                trace.converged = True
                prev_y, prev_z = sweep.y, sweep.z
                m_y, m_z = new_my, new_mz
                break
            if _diverging(trace):
                _raise_fixed_point(trace, f"local solve on window {span}")
        prev_y, prev_z = sweep.y, sweep.z
        m_y, m_z = new_my, new_mz
    else:
        _raise_fixed_point(trace, f"local solve on window {span}")

    flags = {
        "window_exceeds_certificate": exceeded,
        "clamp_events": clamp_events,
    }
    return _finish_result(
        scenario, ensemble, config, solver, cert,
        prev_y, prev_z, span, trace, [span], flags, {},
    )


# ---------------------------------------------------------------------------
# window planning and stitching
# ---------------------------------------------------------------------------


def _plan_windows(ensemble: PathEnsemble, config: SolverConfig, cert: Certificate | None):
    grid = ensemble.grid
    N = grid.n_steps
    if config.n_windows is not None:
        bounds = np.linspace(0, N, config.n_windows + 1).round().astype(int)
        bounds = np.unique(bounds)
        return [Window(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:])]
    if config.window_width is not None:
        width = config.window_width
    elif cert is not None and cert.eta > 0.0:
        width = cert.eta
    else:
        width = 0.0
    if width < float(np.min(grid.steps)):
        raise WindowTooWide(
            "certified stitching width is below the grid resolution; "
            "pass n_windows or window_width together with override_epsilon"
        )
    windows = []
    hi = N
    while hi > 0:
        t_hi = grid.nodes[hi]
        lo = int(np.searchsorted(grid.nodes, t_hi - width, side="left"))
        lo = min(lo, hi - 1)
        windows.append(Window(lo, hi))
        hi = lo
    windows.reverse()
    return windows


def _stitched_solve(
    scenario: ScenarioSpec,
    ensemble: PathEnsemble,
    config: SolverConfig,
    cert: Certificate | None,
    solve_window,
    solver: BackwardSolver,
) -> SolveResult:
    """Backward window recursion; ``solve_window(window, terminal)`` returns
    per-window arrays ``(y, z, trace, flags, extras)``."""
    grid = ensemble.grid
    windows = _plan_windows(ensemble, config, cert)
    N = grid.n_steps
    P = ensemble.n_paths
    n, d = scenario.n, scenario.d
    y_full = np.empty((P, N + 1, n))
    z_full = np.empty((P, N + 1, d, n))
    traces: list[FixedPointTrace] = []
    flags: dict = {"clamp_events": 0, "window_exceeds_certificate": False}
    extras_all: dict = {}

    terminal = scenario.terminal_values(ensemble.state(N))
    per_window = []
    for w in reversed(windows):
        y_w, z_w, trace_w, flags_w, extras_w = solve_window(w, terminal)
        per_window.append((w, y_w, z_w, trace_w, extras_w))
        flags["clamp_events"] += flags_w.get("clamp_events", 0)
        flags["window_exceeds_certificate"] |= flags_w.get(
            "window_exceeds_certificate", False
        )
        terminal = y_w[:, 0]

    for w, y_w, z_w, trace_w, extras_w in reversed(per_window):
        y_full[:, w.lo : w.hi + 1] = y_w
        z_full[:, w.lo : w.hi + 1] = z_w
        traces.append(trace_w)
        for key, val in extras_w.items():
            extras_all.setdefault(key, []).append(val)

    return _finish_result(
        scenario, ensemble, config, solver, cert,
        y_full, z_full, (0, N), traces, [(w.lo, w.hi) for w in windows],
        flags, extras_all,
    )


def global_solve(
    scenario: ScenarioSpec,
    ensemble: PathEnsemble,
    config: SolverConfig,
    certificate: Certificate | None = None,
) -> SolveResult:
    """Horizon-wide solve by stitching frozen-mean fixed points window by
    window, right to left.  Window sizes come from the configuration (or
    from the certificate's stitching width when it is resolvable on the
    grid).  Envelope violations are reported in ``flags``, not raised."""
    if scenario.f is None:
        raise InvalidInput("global_solve needs a single-generator scenario")
    cert = certificate if certificate is not None else certify(scenario)
    solver = BackwardSolver(ensemble, config)

    def solve_window(window: Window, terminal: np.ndarray):
        res = local_solve(
            scenario,
            ensemble,
            config,
            window=window,
            terminal=terminal,
            certificate=cert,
            solver=solver,
        )
        return (
            res.y.values,
            res.z.values,
            res.trace,
            res.flags,
            {},
        )

    return _stitched_solve(scenario, ensemble, config, cert, solve_window, solver)


# ---------------------------------------------------------------------------
# global Picard scheme
# ---------------------------------------------------------------------------


def picard_global(
    scenario: ScenarioSpec,
    ensemble: PathEnsemble,
    config: SolverConfig,
    certificate: Certificate | None = None,
) -> SolveResult:
    """Horizon-wide Picard iteration.

    Iterate 0 is the regression martingale of the terminal data.  Each
    subsequent iterate solves the BSDE with driver ``f(s, 0, 0, z, 0)``
    plus the per-path source ``f(s, Y^j, E Y^j, Z^j, E Z^j) - f(s, 0, 0,
    Z^j, 0)`` frozen at the previous iterate.  The quadratic-in-z part
    stays live inside each sweep; everything else is lagged.
    """
    if scenario.f is None:
        raise InvalidInput("picard_global needs a single-generator scenario")
    gen = scenario.f
    cert = certificate if certificate is not None else certify(scenario)
    window = ensemble.grid.full_window()
    solver = BackwardSolver(ensemble, config)
    terminal = _terminal_for(scenario, ensemble, window, None)
    steps = _window_steps(ensemble, window)
    span = (window.lo, window.hi)
    n, d = scenario.n, scenario.d
    L = window.n_nodes
    nodes = ensemble.grid.nodes
    alpha_fn = _alpha_fn_for(scenario, cert)

    trace = FixedPointTrace()
    clamp_events = 0

    start = _martingale_start(solver, window, terminal)
    y_prev, z_prev = start.y, start.z
    zeros_y = np.zeros((ensemble.n_paths, n))

    def record_alpha(y_vals):
        if alpha_fn is None:
            return
        grid_y = ProcessGrid(grid=ensemble.grid, values=y_vals, span=span)
        trace.alpha_rates.append(check_alpha_envelope(grid_y, alpha_fn)["violation_rate"])

    record_alpha(y_prev)

    for _ in range(config.max_outer):
        t0 = time.perf_counter()
        m_y = y_prev.mean(axis=0)
        m_z = z_prev.mean(axis=0)
        # lagged source: full driver at the previous iterate minus its
        # z-quadratic core, node by node
        source = np.empty((ensemble.n_paths, L, n))
        for j in range(L):
            s = float(nodes[window.lo + j])
            full = dsl.evaluate(
                gen, s, y_prev[:, j], m_y[j], z_prev[:, j], m_z[j], n=n, d=d
            )
            core = dsl.evaluate(
                gen, s, zeros_y, np.zeros(n), z_prev[:, j], np.zeros((d, n)), n=n, d=d
            )
            source[:, j] = full - core

        def driver(i, s, y, z, _src=source):
            core = dsl.evaluate(
                gen, s, zeros_y, np.zeros(n), z, np.zeros((d, n)), n=n, d=d
            )
            return core + _src[:, i - window.lo]

        sweep = solver.solve(window, terminal, driver)
        clamp_events += sweep.clamp_events
        wall = time.perf_counter() - t0
        record_alpha(sweep.y)
        if config.track_ball:
            _track_ball(trace, solver, cert, ensemble, sweep.z, sweep.y, span)
        y_dist = _sup_dist(sweep.y, y_prev)
        z_dist = _m2_dist(sweep.z, z_prev, steps)
        mean_dist = _sup_dist(sweep.y.mean(axis=0), m_y)
        total = trace.push(y_dist, z_dist, mean_dist, wall)
        y_prev, z_prev = sweep.y, sweep.z
        if total <= config.tol_fp:
            trace.converged = True
            break
        if _diverging(trace):
            _raise_fixed_point(trace, "global Picard")
    else:
        _raise_fixed_point(trace, "global Picard")

    flags = {"clamp_events": clamp_events}
    return _finish_result(
        scenario, ensemble, config, solver, cert,
        y_prev, z_prev, span, trace, [span], flags, {},
    )


# ---------------------------------------------------------------------------
# split generators: mean shift solvers
# ---------------------------------------------------------------------------


def _require_split(scenario: ScenarioSpec, form: str, what: str):
    if not scenario.is_split:
        raise InvalidInput(f"{what} needs a split (f1, f2) scenario")
    if form not in scenario.forms:
        raise InvalidInput(
            f"{what} needs the scenario to assert the '{form}' structural form"
        )


def _mean_shift(scenario, ensemble, window, u_vals, m_u, z_vals, m_z):
    """Tail integral of the mean of f2 along the window (trapezoid rule)."""
    f2 = scenario.f2
    n, d = scenario.n, scenario.d
    L = window.n_nodes
    nodes = ensemble.grid.nodes
    fbar = np.empty((L, n))
    for j in range(L):
        s = float(nodes[window.lo + j])
        vals = dsl.evaluate(f2, s, u_vals[:, j], m_u[j], z_vals[:, j], m_z[j], n=n, d=d)
        fbar[j] = vals.mean(axis=0)
    steps = ensemble.grid.steps[window.lo : window.hi]
    shift = np.zeros((L, n))
    for j in range(L - 2, -1, -1):
        shift[j] = shift[j + 1] + 0.5 * steps[j] * (fbar[j] + fbar[j + 1])
    return shift


def shift_solve_simple(
    scenario: ScenarioSpec,
    ensemble: PathEnsemble,
    config: SolverConfig,
) -> SolveResult:
    """Split solve without a fixed point: ``f1`` may depend only on ``(s, z)``
    and ``f2`` only on ``(s, z, zbar)``.

    The base BSDE is solved once, the deterministic shift (the tail
    integral of the mean of ``f2`` along the solved integrand) is added to
    the state, and the integrand is returned untouched, bit for bit.
    """
    _require_split(scenario, FORM_SPLIT_QUADRATIC, "shift_solve_simple")
    allowed1 = {"s", "z"}
    allowed2 = {"s", "z", "zbar"}
    if not scenario.f1.free_variables() <= allowed1:
        raise InvalidInput("shift_solve_simple needs f1 = f1(s, z)")
    if not scenario.f2.free_variables() <= allowed2:
        raise InvalidInput("shift_solve_simple needs f2 = f2(s, z, zbar)")

    window = ensemble.grid.full_window()
    solver = BackwardSolver(ensemble, config)
    terminal = _terminal_for(scenario, ensemble, window, None)
    n, d = scenario.n, scenario.d
    f1 = scenario.f1
    zeros_y = np.zeros((ensemble.n_paths, n))

    def driver(i, s, y, z):
        return dsl.evaluate(f1, s, zeros_y, np.zeros(n), z, np.zeros((d, n)), n=n, d=d)

    t0 = time.perf_counter()
    sweep = solver.solve(window, terminal, driver)
    m_z = sweep.z.mean(axis=0)
    shift = _mean_shift(
        scenario, ensemble, window, np.zeros_like(sweep.y),
        np.zeros((window.n_nodes, n)), sweep.z, m_z,
    )
    y_shifted = sweep.y + shift[None, :, :]
    wall = time.perf_counter() - t0

    trace = FixedPointTrace(converged=True)
    trace.push(0.0, 0.0, 0.0, wall)
    span = (window.lo, window.hi)
    flags = {"clamp_events": sweep.clamp_events, "z_shift_bitwise": True}
    extras = {"z_before_shift": sweep.z, "y_before_shift": sweep.y, "shift": shift}
    return _finish_result(
        scenario, ensemble, config, solver, None,
        y_shifted, sweep.z, span, trace, [span], flags, extras,
    )


def shift_fixed_point(
    scenario: ScenarioSpec,
    ensemble: PathEnsemble,
    config: SolverConfig,
    certificate: Certificate | None = None,
) -> SolveResult:
    """General split solve: freeze the full state process between sweeps.

    Each iterate solves the base BSDE whose driver evaluates ``f1`` at the
    frozen per-path state (so the state slot carries no implicitness), then
    shifts by the tail integral of the mean of ``f2`` evaluated along the
    frozen state and the fresh integrand.  The integrand is never moved by
    the shift.  Windows follow the configuration, stitched right to left.
    """
    _require_split(scenario, FORM_SPLIT_QUADRATIC, "shift_fixed_point")
    cert = certificate if certificate is not None else certify(scenario)
    solver = BackwardSolver(ensemble, config)
    n, d = scenario.n, scenario.d
    f1 = scenario.f1

    def solve_window(window: Window, terminal: np.ndarray):
        steps = _window_steps(ensemble, window)
        L = window.n_nodes
        trace = FixedPointTrace()
        clamp = 0
        start = _martingale_start(solver, window, terminal)
        u_vals = start.y
        v_vals = np.zeros((ensemble.n_paths, L, d, n))
        y_out = z_out = None
        for _ in range(config.max_outer):
            t0 = time.perf_counter()
            m_u = u_vals.mean(axis=0)
            m_v = v_vals.mean(axis=0)

            def driver(i, s, y, z, _u=u_vals, _mu=m_u, _mv=m_v):
                j = i - window.lo
                return dsl.evaluate(f1, s, _u[:, j], _mu[j], z, _mv[j], n=n, d=d)

            sweep = solver.solve(window, terminal, driver)
            clamp += sweep.clamp_events
            m_z = sweep.z.mean(axis=0)
            shift = _mean_shift(scenario, ensemble, window, u_vals, m_u, sweep.z, m_z)
            y_new = sweep.y + shift[None, :, :]
            wall = time.perf_counter() - t0
            if config.track_ball:
                _track_ball(trace, solver, cert, ensemble, sweep.z,
                            y_new, (window.lo, window.hi))
            y_dist = _sup_dist(y_new, u_vals)
            z_dist = _m2_dist(sweep.z, v_vals, steps)
            mean_dist = _sup_dist(y_new.mean(axis=0), m_u)
            total = trace.push(y_dist, z_dist, mean_dist, wall)
            u_vals, v_vals = y_new, sweep.z
            y_out, z_out = y_new, sweep.z
            if total <= config.tol_fp:
                trace.converged = True
                break
            if _diverging(trace):
                _raise_fixed_point(trace, f"shift fixed point on window "
                                          f"({window.lo}, {window.hi})")
        else:
            _raise_fixed_point(trace, f"shift fixed point on window "
                                      f"({window.lo}, {window.hi})")
        return y_out, z_out, trace, {"clamp_events": clamp}, {}

    result = _stitched_solve(scenario, ensemble, config, cert, solve_window, solver)
    result.flags["z_shift_bitwise"] = True
    return result


def multidim_solve(
    scenario: ScenarioSpec,
    ensemble: PathEnsemble,
    config: SolverConfig,
    certificate: Certificate | None = None,
) -> SolveResult:
    """Vector-valued split solve with a z-Lipschitz first part.

    The mean-integrand curve seen by ``f1`` is resolved by an inner Picard
    loop (the curve is low-dimensional, so this is cheap and warm-started
    across outer iterations); the outer loop freezes the full state process
    as in :func:`shift_fixed_point`.  Distances use the empirical S2 norm
    for the state and M2 for the integrand.
    """
    _require_split(scenario, FORM_SPLIT_LIPSCHITZ, "multidim_solve")
    cert = certificate if certificate is not None else certify(scenario)
    solver = BackwardSolver(ensemble, config)
    n, d = scenario.n, scenario.d
    f1 = scenario.f1
    tol_curve = max(config.tol_fp * 0.1, 1e-9)

    def solve_window(window: Window, terminal: np.ndarray):
        steps = _window_steps(ensemble, window)
        L = window.n_nodes
        trace = FixedPointTrace()
        clamp = 0
        start = _martingale_start(solver, window, terminal)
        u_vals = start.y
        v_vals = np.zeros((ensemble.n_paths, L, d, n))
        mz_curve = np.zeros((L, d, n))
        y_out = z_out = None
        inner_counts = []
        for _ in range(config.max_outer):
            t0 = time.perf_counter()
            m_u = u_vals.mean(axis=0)
            sweep = None
            for inner in range(1, 13):
                def driver(i, s, y, z, _u=u_vals, _mu=m_u, _mz=mz_curve):
                    j = i - window.lo
                    return dsl.evaluate(f1, s, _u[:, j], _mu[j], z, _mz[j], n=n, d=d)

                sweep = solver.solve(window, terminal, driver)
                clamp += sweep.clamp_events
                mz_new = sweep.z.mean(axis=0)
                gap = float(np.max(np.abs(mz_new - mz_curve)))
                mz_curve = mz_new
                if gap <= tol_curve:
                    break
            inner_counts.append(inner)
            m_z = sweep.z.mean(axis=0)
            shift = _mean_shift(scenario, ensemble, window, u_vals, m_u, sweep.z, m_z)
            y_new = sweep.y + shift[None, :, :]
            wall = time.perf_counter() - t0
            if config.track_ball:
                _track_ball(trace, solver, cert, ensemble, sweep.z,
                            y_new, (window.lo, window.hi))
            y_dist = _s2_dist(y_new, u_vals)
            z_dist = _m2_dist(sweep.z, v_vals, steps)
            mean_dist = _sup_dist(y_new.mean(axis=0), m_u)
            total = trace.push(y_dist, z_dist, mean_dist, wall)
            u_vals, v_vals = y_new, sweep.z
            y_out, z_out = y_new, sweep.z
            if total <= config.tol_fp:
                trace.converged = True
                break
            if _diverging(trace):
                _raise_fixed_point(trace, f"multidim solve on window "
                                          f"({window.lo}, {window.hi})")
        else:
            _raise_fixed_point(trace, f"multidim solve on window "
                                      f"({window.lo}, {window.hi})")
        return y_out, z_out, trace, {"clamp_events": clamp}, {
            "mz_inner_iterations": inner_counts
        }

    result = _stitched_solve(scenario, ensemble, config, cert, solve_window, solver)
    result.flags["z_shift_bitwise"] = True
    return result
