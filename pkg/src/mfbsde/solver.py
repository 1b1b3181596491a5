"""Backward regression Monte Carlo solver for standard (frozen-mean) BSDEs.

One backward step at node i:

* conditional mean ``c = E_i[Y_{i+1}]`` by node regression,
* integrand ``Z_i`` by regressing the martingale residual
  ``(Y_{i+1} - c) * dW_i / h_i`` (the centred estimator has far smaller
  variance than the raw product and the same conditional expectation),
* state ``Y_i`` from the implicit equation ``y = c + h_i * f(t_i, y, Z_i)``
  solved by damped fixed-point iteration (the driver may be quadratic in z
  but z enters explicitly).

Driver evaluations clamp the z argument at a configurable norm level;
clamp activations are counted and reported, and a converged run is expected
to show zero activations at the final resolution.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .core import PathEnsemble, ProcessGrid, Window
from .errors import InvalidInput, StepDivergence
from .regression import NodeRegression, RegressionBasis
from .scenario import ScenarioSpec
from . import dsl

__all__ = ["SolverConfig", "StandardSolve", "BackwardSolver", "backward_step", "solve_standard"]


@dataclass(frozen=True)
class SolverConfig:
    """Numerical knobs shared by every solver entry point."""

    n_steps: int = 100
    n_paths: int = 50_000
    seed: int = 0
    basis: RegressionBasis = field(default_factory=RegressionBasis)
    tol_inner: float = 1e-10
    max_inner: int = 60
    tol_fp: float = 1e-3
    max_outer: int = 30
    z_clamp: float = 100.0
    n_windows: int | None = None
    window_width: float | None = None
    override_epsilon: bool = False
    track_ball: bool = True
    bmo_budget: float | None = None
    p_norm: float = 2.0

    def __post_init__(self):
        if self.n_steps < 1 or self.n_paths < 2:
            raise InvalidInput("need n_steps >= 1 and n_paths >= 2")
        if self.tol_inner <= 0 or self.tol_fp <= 0:
            raise InvalidInput("tolerances must be positive")
        if self.max_inner < 1 or self.max_outer < 1:
            raise InvalidInput("iteration budgets must be >= 1")
        if self.z_clamp <= 0:
            raise InvalidInput("z_clamp must be positive")
        if self.n_windows is not None and self.n_windows < 1:
            raise InvalidInput("n_windows must be >= 1")
        if self.window_width is not None and self.window_width <= 0:
            raise InvalidInput("window_width must be positive")

    def updated(self, **changes) -> "SolverConfig":
        return replace(self, **changes)


@dataclass
class StandardSolve:
    """Result of one backward sweep on a window."""

    y: np.ndarray            # (P, L, n)
    z: np.ndarray            # (P, L, d, n)
    inner_iterations: list[int]
    clamp_events: int


class BackwardSolver:
    """Backward sweeps over one ensemble, with node regressions cached.

    The basis depends only on the Brownian levels, so the factorised
    normal equations are reused across fixed-point iterations; right-hand
    sides are the only per-iteration work.
    """

    def __init__(self, ensemble: PathEnsemble, config: SolverConfig):
        self.ensemble = ensemble
        self.config = config
        self._cache: dict[int, NodeRegression] = {}

    def node_regression(self, i: int) -> NodeRegression:
        reg = self._cache.get(i)
        if reg is None:
            reg = NodeRegression(self.ensemble.state(i), self.config.basis)
            self._cache[i] = reg
        return reg

    def conditional(self, i: int, values: np.ndarray) -> np.ndarray:
        fitted, _ = self.node_regression(i).fit(values)
        return fitted

    def solve(self, window: Window, terminal: np.ndarray, driver) -> StandardSolve:
        """Backward sweep on ``window``.

        ``terminal`` has shape (P, n); ``driver(i, s, y, z)`` maps the node
        index, time, state (P, n) and integrand (P, d, n) to (P, n).
        """
        ens = self.ensemble
        cfg = self.config
        P = ens.n_paths
        n = terminal.shape[1]
        d = ens.d
        lo, hi = window.lo, window.hi
        L = window.n_nodes
        nodes = ens.grid.nodes
        steps = ens.grid.steps

        if terminal.shape != (P, n):
            raise InvalidInput("terminal shape does not match ensemble")

        Y = np.empty((P, L, n))
        Z = np.empty((P, L, d, n))
        Y[:, L - 1] = terminal
        inner_counts: list[int] = []
        clamp_events = 0

        for i in range(hi - 1, lo - 1, -1):
            j = i - lo
            h = float(steps[i])
            t = float(nodes[i])
            y_next = Y[:, j + 1]
            reg = self.node_regression(i)

            cond, _ = reg.fit(y_next)
            resid = y_next - cond
            dw = ens.increments[:, i, :]
            raw = resid[:, None, :] * dw[:, :, None] / h
            z_fit, _ = reg.fit(raw.reshape(P, d * n))
            z_i = z_fit.reshape(P, d, n)
            Z[:, j] = z_i

            z_drv, n_clamped = _clamp_z(z_i, cfg.z_clamp)
            clamp_events += n_clamped

            y, iters = _implicit_state(cond, h, t, i, z_drv, driver, cfg)
            if not np.all(np.isfinite(y)):
                raise StepDivergence("non-finite state in backward step", i)
            Y[:, j] = y
            inner_counts.append(iters)

        Z[:, L - 1] = Z[:, L - 2] if L >= 2 else 0.0
        inner_counts.reverse()
        return StandardSolve(y=Y, z=Z, inner_iterations=inner_counts,
                             clamp_events=clamp_events)


def _clamp_z(z: np.ndarray, level: float) -> tuple[np.ndarray, int]:
    P = z.shape[0]
    norms = np.sqrt(np.sum(z.reshape(P, -1) ** 2, axis=1))
    over = norms > level
    n_over = int(np.count_nonzero(over))
    if n_over == 0:
        return z, 0
    scale = np.ones(P)
    scale[over] = level / norms[over]
    return z * scale[:, None, None], n_over


def _implicit_state(cond, h, t, i, z_drv, driver, cfg) -> tuple[np.ndarray, int]:
    """Damped fixed-point solve of ``y = cond + h * driver(i, t, y, z)``."""
    y = cond
    prev_res = np.inf
    for m in range(1, cfg.max_inner + 1):
        y_new = cond + h * driver(i, t, y, z_drv)
        res = float(np.max(np.abs(y_new - y)))
        if res > prev_res:
            # non-monotone residual: damp the update by half
            y_new = 0.5 * (y_new + y)
            res = float(np.max(np.abs(y_new - y)))
        scale = max(1.0, float(np.max(np.abs(y_new))))
        y = y_new
        prev_res = res
        if res <= cfg.tol_inner * scale:
            return y, m
    raise StepDivergence(
        f"state iteration stalled at residual {prev_res:.3e}", i
    )


def backward_step(
    y_next: np.ndarray,
    ensemble: PathEnsemble,
    i: int,
    driver,
    config: SolverConfig,
) -> tuple[np.ndarray, np.ndarray]:
    """Single backward step at node ``i``; ``driver(s, y, z) -> (P, n)``.

    Convenience wrapper over the cached solver machinery for tests and
    custom stepping loops.
    """
    y_next = np.asarray(y_next, dtype=np.float64)
    if y_next.ndim == 1:
        y_next = y_next[:, None]
    if not (0 <= i < ensemble.grid.n_steps):
        raise InvalidInput(f"node {i} has no forward step")
    solver = BackwardSolver(ensemble, config)
    window = Window(i, i + 1)
    res = solver.solve(window, y_next, lambda _i, s, y, z: driver(s, y, z))
    return res.y[:, 0], res.z[:, 0]


def frozen_mean_driver(
    scenario: ScenarioSpec,
    m_y: np.ndarray,
    m_z: np.ndarray,
    lo: int,
):
    """Driver with the mean slots frozen at given curves.

    ``m_y`` has shape (L, n) and ``m_z`` shape (L, d, n), aligned with the
    window whose first global node index is ``lo``.
    """
    gen = scenario.f
    if gen is None:
        raise InvalidInput("frozen-mean driver needs a single-generator scenario")
    n, d = scenario.n, scenario.d

    def drive(i: int, s: float, y: np.ndarray, z: np.ndarray) -> np.ndarray:
        j = i - lo
        return dsl.evaluate(gen, s, y, m_y[j], z, m_z[j], n=n, d=d)

    return drive


def solve_standard(
    scenario: ScenarioSpec,
    ensemble: PathEnsemble,
    config: SolverConfig,
    m_y: np.ndarray | None = None,
    m_z: np.ndarray | None = None,
    window: Window | None = None,
    terminal: np.ndarray | None = None,
) -> tuple[ProcessGrid, ProcessGrid, StandardSolve]:
    """Solve the frozen-mean BSDE on a window.

    The mean slots of the generator are frozen at the curves ``m_y``/``m_z``
    (zero when omitted).  Returns the state and integrand process grids plus
    the raw sweep record (inner iteration counts, clamp activations).
    """
    window = window or ensemble.grid.full_window()
    L = window.n_nodes
    n, d = scenario.n, scenario.d
    if m_y is None:
        m_y = np.zeros((L, n))
    if m_z is None:
        m_z = np.zeros((L, d, n))
    if terminal is None:
        if window.hi != ensemble.grid.n_steps:
            raise InvalidInput("interior window needs explicit terminal values")
        terminal = scenario.terminal_values(ensemble.state(window.hi))
    solver = BackwardSolver(ensemble, config)
    res = solver.solve(window, terminal, frozen_mean_driver(scenario, m_y, m_z, window.lo))
    span = (window.lo, window.hi)
    y = ProcessGrid(grid=ensemble.grid, values=res.y, span=span)
    z = ProcessGrid(grid=ensemble.grid, values=res.z, span=span)
    return y, z, res
