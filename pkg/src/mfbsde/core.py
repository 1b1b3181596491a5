"""Time grids, Brownian ensembles, and grid-indexed process containers.

All containers are plain immutable data.  Path reductions use numpy's
pairwise summation with a fixed operand order, so repeated runs with the
same seed produce bit-identical results on the same platform.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidInput

__all__ = [
    "TimeGrid",
    "Window",
    "PathEnsemble",
    "ProcessGrid",
    "MeanCurve",
    "build_grid",
    "simulate_brownian",
    "ensemble_mean",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class TimeGrid:
    """Partition ``0 = t_0 < t_1 < ... < t_N = T`` of the solve horizon.

    Non-uniform spacing is allowed; every consumer works with per-step
    widths rather than a single ``h``.
    """

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=np.float64)
        if nodes.ndim != 1 or nodes.size < 2:
            raise InvalidInput("a time grid needs at least two nodes")
        if nodes[0] != 0.0:
            raise InvalidInput("time grids start at t=0")
        steps = np.diff(nodes)
        if not np.all(steps > 0.0):
            raise InvalidInput("grid nodes must be strictly increasing")
        object.__setattr__(self, "nodes", _readonly(nodes))
        object.__setattr__(self, "_steps", _readonly(steps))

    @property
    def horizon(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_steps(self) -> int:
        return self.nodes.size - 1

    @property
    def steps(self) -> np.ndarray:
        return self._steps  # type: ignore[attr-defined]

    def full_window(self) -> "Window":
        return Window(0, self.n_steps)


@dataclass(frozen=True)
class Window:
    """Contiguous node range ``[lo, hi]`` into a parent grid (inclusive)."""

    lo: int
    hi: int

    def __post_init__(self):
        if not (0 <= self.lo < self.hi):
            raise InvalidInput(f"bad window ({self.lo}, {self.hi})")

    @property
    def n_nodes(self) -> int:
        return self.hi - self.lo + 1

    def width(self, grid: TimeGrid) -> float:
        return float(grid.nodes[self.hi] - grid.nodes[self.lo])


def build_grid(T: float, n_steps: int) -> TimeGrid:
    """Uniform grid on ``[0, T]`` with ``n_steps`` steps."""
    if not (T > 0.0):
        raise InvalidInput("horizon T must be positive")
    if n_steps < 1:
        raise InvalidInput("need at least one step")
    return TimeGrid(np.linspace(0.0, float(T), n_steps + 1))


@dataclass(frozen=True)
class PathEnsemble:
    """Monte Carlo ensemble of d-dimensional Brownian paths on a grid.

    ``increments`` has shape (n_paths, N, d); the path levels ``levels``
    (shape (n_paths, N+1, d), zero at t=0) are materialised once and cached.
    """

    grid: TimeGrid
    d: int
    increments: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        inc = np.asarray(self.increments, dtype=np.float64)
        if inc.shape != (inc.shape[0], self.grid.n_steps, self.d):
            raise InvalidInput(
                f"increments shape {inc.shape} does not match grid/d"
            )
        if inc.shape[0] < 2:
            raise InvalidInput("an ensemble needs at least two paths")
        object.__setattr__(self, "increments", _readonly(inc))
        levels = np.zeros((inc.shape[0], self.grid.n_steps + 1, self.d))
        np.cumsum(inc, axis=1, out=levels[:, 1:, :])
        object.__setattr__(self, "_levels", _readonly(levels))

    @property
    def n_paths(self) -> int:
        return self.increments.shape[0]

    @property
    def levels(self) -> np.ndarray:
        return self._levels  # type: ignore[attr-defined]

    def state(self, i: int) -> np.ndarray:
        """Brownian level W_{t_i}, shape (n_paths, d)."""
        return self.levels[:, i, :]


def simulate_brownian(grid: TimeGrid, d: int, n_paths: int, seed: int) -> PathEnsemble:
    """Draw a Brownian ensemble with a counter-based generator.

    The stream is a pure function of ``seed`` (numpy PCG64), so identical
    calls reproduce identical paths byte for byte.
    """
    if d < 1:
        raise InvalidInput("dimension d must be >= 1")
    if n_paths < 2:
        raise InvalidInput("need at least two paths")
    rng = np.random.default_rng(seed)
    gauss = rng.standard_normal((n_paths, grid.n_steps, d))
    gauss *= np.sqrt(grid.steps)[None, :, None]
    return PathEnsemble(grid=grid, d=d, increments=gauss, seed=seed)


def _check_span(grid: TimeGrid, span: tuple[int, int], length: int) -> tuple[int, int]:
    lo, hi = int(span[0]), int(span[1])
    if not (0 <= lo < hi <= grid.n_steps):
        raise InvalidInput(f"span {span} outside grid")
    if hi - lo + 1 != length:
        raise InvalidInput("value length does not match span")
    return lo, hi


@dataclass(frozen=True)
class ProcessGrid:
    """Per-path process sampled on (a window of) a grid.

    ``values`` has shape (n_paths, L, *dims) where L is the number of nodes
    in ``span`` (defaults to the whole grid).  All entries must be finite.
    """

    grid: TimeGrid
    values: np.ndarray
    span: tuple[int, int] = field(default=(-1, -1))

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim < 2:
            raise InvalidInput("process values need shape (paths, nodes, ...)")
        span = self.span
        if span == (-1, -1):
            span = (0, self.grid.n_steps)
        lo, hi = _check_span(self.grid, span, vals.shape[1])
        if vals.shape[0] < 1:
            raise InvalidInput("empty path axis")
        if not np.all(np.isfinite(vals)):
            raise InvalidInput("process values must be finite")
        object.__setattr__(self, "values", _readonly(vals))
        object.__setattr__(self, "span", (lo, hi))

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    @property
    def n_nodes(self) -> int:
        return self.values.shape[1]

    @property
    def dims(self) -> tuple[int, ...]:
        return self.values.shape[2:]

    def times(self) -> np.ndarray:
        lo, hi = self.span
        return self.grid.nodes[lo : hi + 1]


@dataclass(frozen=True)
class MeanCurve:
    """Deterministic node-indexed curve, shape (L, *dims)."""

    grid: TimeGrid
    values: np.ndarray
    span: tuple[int, int] = field(default=(-1, -1))

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim < 1:
            raise InvalidInput("curve values need a node axis")
        span = self.span
        if span == (-1, -1):
            span = (0, self.grid.n_steps)
        lo, hi = _check_span(self.grid, span, vals.shape[0])
        if not np.all(np.isfinite(vals)):
            raise InvalidInput("curve values must be finite")
        object.__setattr__(self, "values", _readonly(vals))
        object.__setattr__(self, "span", (lo, hi))

    def times(self) -> np.ndarray:
        lo, hi = self.span
        return self.grid.nodes[lo : hi + 1]


def ensemble_mean(p: ProcessGrid) -> MeanCurve:
    """Node-wise path average.  Reduction order is fixed, so the result is
    reproducible and exactly linear in the input values."""
    return MeanCurve(grid=p.grid, values=p.values.mean(axis=0), span=p.span)
