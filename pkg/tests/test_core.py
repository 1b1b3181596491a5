"""Grids, Brownian ensembles, process containers."""

import numpy as np
import pytest

from mfbsde.core import (
    MeanCurve,
    ProcessGrid,
    TimeGrid,
    Window,
    build_grid,
    ensemble_mean,
    simulate_brownian,
)
from mfbsde.errors import InvalidInput


def test_build_grid_basic():
    g = build_grid(2.0, 8)
    assert g.horizon == 2.0
    assert g.n_steps == 8
    assert g.nodes[0] == 0.0
    np.testing.assert_allclose(g.steps, 0.25)


def test_grid_rejects_bad_input():
    with pytest.raises(InvalidInput):
        build_grid(0.0, 10)
    with pytest.raises(InvalidInput):
        build_grid(1.0, 0)
    with pytest.raises(InvalidInput):
        TimeGrid(np.array([0.0, 0.5, 0.5, 1.0]))
    with pytest.raises(InvalidInput):
        TimeGrid(np.array([0.1, 0.5, 1.0]))


def test_nonuniform_grid_allowed():
    g = TimeGrid(np.array([0.0, 0.1, 0.4, 1.0]))
    assert g.n_steps == 3
    np.testing.assert_allclose(g.steps, [0.1, 0.3, 0.6])


def test_window_validation():
    w = Window(3, 10)
    assert w.n_nodes == 8
    g = build_grid(1.0, 20)
    assert w.width(g) == pytest.approx(0.35)
    with pytest.raises(InvalidInput):
        Window(5, 5)
    with pytest.raises(InvalidInput):
        Window(-1, 5)


def test_brownian_shapes_and_t0(grid50):
    ens = simulate_brownian(grid50, 2, 100, 7)
    assert ens.increments.shape == (100, 50, 2)
    assert ens.levels.shape == (100, 51, 2)
    assert np.all(ens.levels[:, 0, :] == 0.0)
    # levels really are the running sums of the increments
    np.testing.assert_allclose(
        ens.levels[:, -1, :], ens.increments.sum(axis=1), rtol=0, atol=1e-12
    )


def test_brownian_seed_reproducibility(grid50):
    a = simulate_brownian(grid50, 1, 500, 42)
    b = simulate_brownian(grid50, 1, 500, 42)
    c = simulate_brownian(grid50, 1, 500, 43)
    assert a.increments.tobytes() == b.increments.tobytes()
    assert a.increments.tobytes() != c.increments.tobytes()


def test_brownian_terminal_statistics(grid50):
    # W_T ~ N(0, T): the sample mean of P paths has sd sqrt(T/P), the
    # sample variance concentrates like sqrt(2/P); allow generous bands
    P, T = 100_000, grid50.horizon
    ens = simulate_brownian(grid50, 1, P, 2024)
    wT = ens.levels[:, -1, 0]
    assert abs(wT.mean()) < 4.0 * np.sqrt(T / P)
    assert abs(wT.var() - T) / T < 0.05


def test_brownian_increment_independence(grid50):
    ens = simulate_brownian(grid50, 1, 50_000, 99)
    inc = ens.increments[:, :, 0]
    corr = np.corrcoef(inc[:, 3], inc[:, 17])[0, 1]
    assert abs(corr) < 0.02


def test_process_grid_span_and_times(grid50):
    vals = np.zeros((10, 21, 1))
    p = ProcessGrid(grid=grid50, values=vals, span=(30, 50))
    assert p.n_nodes == 21
    assert p.times()[0] == pytest.approx(0.6)
    assert p.times()[-1] == pytest.approx(1.0)
    with pytest.raises(InvalidInput):
        ProcessGrid(grid=grid50, values=vals, span=(0, 10))  # length mismatch


def test_process_grid_rejects_nonfinite(grid50):
    vals = np.zeros((4, 51, 1))
    vals[2, 7, 0] = np.nan
    with pytest.raises(InvalidInput):
        ProcessGrid(grid=grid50, values=vals)


def test_ensemble_mean_is_exactly_linear(grid50, rng):
    a = rng.standard_normal((300, 51, 1))
    b = rng.standard_normal((300, 51, 1))
    pa = ProcessGrid(grid=grid50, values=a)
    pb = ProcessGrid(grid=grid50, values=b)
    pab = ProcessGrid(grid=grid50, values=a + 2.0 * b)
    lhs = ensemble_mean(pab).values
    rhs = ensemble_mean(pa).values + 2.0 * ensemble_mean(pb).values
    # fixed reduction order: linearity holds to rounding of the final add
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-13)


def test_mean_curve_span(grid50):
    mc = MeanCurve(grid=grid50, values=np.ones(11), span=(40, 50))
    assert mc.times().shape == (11,)
    assert mc.times()[0] == pytest.approx(0.8)


def test_values_are_write_protected(grid50):
    ens = simulate_brownian(grid50, 1, 10, 1)
    with pytest.raises(ValueError):
        ens.levels[0, 0, 0] = 1.0
