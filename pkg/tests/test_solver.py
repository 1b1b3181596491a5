"""Backward regression solver: martingale limits, implicit stepping,
clamping, and the linear closed form."""

import numpy as np
import pytest

from mfbsde import dsl
from mfbsde.core import Window, build_grid, simulate_brownian
from mfbsde.errors import InvalidInput, RegressionError, StepDivergence
from mfbsde.oracle import LinearMeanFieldSpec, linear_closed_form
from mfbsde.regression import NodeRegression, RegressionBasis, poly_features
from mfbsde.scenario import ScenarioSpec, linear_scenario
from mfbsde.solver import (
    BackwardSolver,
    SolverConfig,
    backward_step,
    solve_standard,
)

CFG = SolverConfig(n_steps=50, n_paths=20_000, seed=12345)


def _scalar_scenario(f_text, terminal="w", T=1.0):
    return ScenarioSpec(
        name="t",
        n=1,
        d=1,
        T=T,
        terminal=dsl.parse(terminal, dsl.TERMINAL_VARS),
        f=dsl.parse(f_text),
        C=1.0,
        gamma=1.0,
        alpha=0.0,
        xi_bound=4.0,
    )


# ---------------------------------------------------------------------------
# regression layer
# ---------------------------------------------------------------------------


def test_poly_feature_count():
    x = np.random.default_rng(0).standard_normal((100, 2))
    X = poly_features(x, 3)
    assert X.shape == (100, 10)  # binom(2+3, 3)
    assert np.all(X[:, 0] == 1.0)


def test_regression_reproduces_polynomials(rng):
    x = rng.standard_normal((5000, 1))
    reg = NodeRegression(x, RegressionBasis(degree=3, ridge=0.0))
    target = 2.0 - x[:, 0] + 0.5 * x[:, 0] ** 3
    fitted, _ = reg.fit(target)
    np.testing.assert_allclose(fitted, target, rtol=0, atol=1e-10)


def test_regression_rank_deficiency_raises(rng):
    col = rng.standard_normal(64)
    state = np.stack([col, col], axis=1)  # duplicated coordinate
    with pytest.raises(RegressionError):
        NodeRegression(state, RegressionBasis(degree=3, ridge=0.0))


def test_regression_needs_more_paths_than_features(rng):
    x = rng.standard_normal((3, 1))
    with pytest.raises(InvalidInput):
        NodeRegression(x, RegressionBasis(degree=3))


def test_degenerate_state_falls_back_to_mean(grid50):
    # the t=0 node has zero state everywhere: conditioning is trivial
    ens = simulate_brownian(grid50, 1, 1000, 3)
    reg = NodeRegression(ens.state(0), RegressionBasis(degree=3, ridge=0.0))
    vals = np.arange(1000, dtype=np.float64)
    fitted, _ = reg.fit(vals)
    np.testing.assert_allclose(fitted, vals.mean(), rtol=1e-13)
    # the default ridge biases the constant fit by its own magnitude only
    reg2 = NodeRegression(ens.state(0), RegressionBasis(degree=3))
    fitted2, _ = reg2.fit(vals)
    np.testing.assert_allclose(fitted2, vals.mean(), rtol=1e-7)


# ---------------------------------------------------------------------------
# single backward steps
# ---------------------------------------------------------------------------


def test_backward_step_source_only(ensemble50):
    # f constant: y_i = E_i[y_next] + h
    w_last = ensemble50.state(49)[:, 0]
    y_next = ensemble50.state(50)[:, 0]
    y, z = backward_step(y_next, ensemble50, 49, lambda s, y, z: np.ones_like(y), CFG)
    h = 0.02
    err = y[:, 0] - (w_last + h)
    # regression noise is worst in the state tails; the bulk is tight
    assert np.mean(np.abs(err)) < 5e-3
    assert np.max(np.abs(err)) < 0.05
    # integrand of the martingale part of W is one
    assert z.mean() == pytest.approx(1.0, abs=0.05)


def test_backward_step_implicit_linear(ensemble50):
    # f = 10*y is stiff enough that the implicit solve matters:
    # y = cond/(1 - 10*h) with cond = E_i[W_T | W_i] = W_i
    y_next = ensemble50.state(50)[:, 0]
    y, _ = backward_step(y_next, ensemble50, 49, lambda s, y, z: 10.0 * y, CFG)
    w = ensemble50.state(49)[:, 0]
    np.testing.assert_allclose(y[:, 0], w / 0.8, rtol=0, atol=2e-2)


def test_backward_step_divergence(ensemble50):
    # h * Lipschitz = 2: the damped iteration cannot settle
    y_next = ensemble50.state(50)[:, 0]
    with pytest.raises(StepDivergence):
        backward_step(y_next, ensemble50, 49, lambda s, y, z: 100.0 * y, CFG)


def test_backward_step_index_validation(ensemble50):
    with pytest.raises(InvalidInput):
        backward_step(np.zeros(ensemble50.n_paths), ensemble50, 50,
                      lambda s, y, z: y, CFG)


# ---------------------------------------------------------------------------
# full sweeps
# ---------------------------------------------------------------------------


def test_zero_driver_recovers_martingale(ensemble50):
    # f = 0, xi = W_T: Y_i = W_i and Z = 1 up to regression noise
    sc = _scalar_scenario("0")
    y, z, info = solve_standard(sc, ensemble50, CFG)
    w = ensemble50.levels[:, :, 0]
    err = np.max(np.mean(np.abs(y.values[:, :, 0] - w), axis=0))
    assert err < 0.02
    m_z = z.values.mean(axis=0)
    assert np.max(np.abs(m_z - 1.0)) < 0.05
    assert info.clamp_events == 0
    assert all(k == 1 for k in info.inner_iterations)  # z-only driver: 1 pass


def test_tower_property_of_state_mean(ensemble50):
    # with f = 0 the state mean is constant in time (martingale property)
    sc = _scalar_scenario("0", terminal="w^2")
    y, _, _ = solve_standard(sc, ensemble50, CFG)
    m = y.values.mean(axis=0)[:, 0]
    # E[W_T^2] = T = 1; drift of the estimated mean stays within MC noise
    assert np.max(np.abs(m - m[-1])) < 0.02


def test_clamp_events_counted(ensemble50):
    sc = _scalar_scenario("0")
    cfg = CFG.updated(z_clamp=0.5)  # Z is ~1: every path clamps
    _, z, info = solve_standard(sc, ensemble50, cfg)
    assert info.clamp_events > 0
    # the recorded integrand is the raw regression output, pre-clamp
    assert z.values.mean() == pytest.approx(1.0, abs=0.05)


def test_interior_window_needs_terminal(ensemble50):
    sc = _scalar_scenario("0")
    with pytest.raises(InvalidInput):
        solve_standard(sc, ensemble50, CFG, window=Window(10, 30))


def test_solver_cache_reused(ensemble50):
    solver = BackwardSolver(ensemble50, CFG)
    a = solver.node_regression(17)
    b = solver.node_regression(17)
    assert a is b


# ---------------------------------------------------------------------------
# linear closed form
# ---------------------------------------------------------------------------


def test_linear_oracle_against_solver():
    spec = LinearMeanFieldSpec(a=0.5, b=0.3, c=0.2, dbar=0.4, g=0.1, q=1.0, T=1.0)
    sol = linear_closed_form(spec)
    sc = linear_scenario(a=0.5, b=0.3, c=0.2, dbar=0.4, g=0.1, terminal="w", T=1.0)

    grid = build_grid(1.0, 50)
    ens = simulate_brownian(grid, 1, 40_000, 777)
    t = grid.nodes
    m_y = sol.m_y(t)[:, None]
    m_z = sol.m_z(t)[:, None, None]
    y, z, _ = solve_standard(sc, ens, CFG.updated(n_paths=40_000), m_y=m_y, m_z=m_z)

    got_my = y.values.mean(axis=0)[:, 0]
    got_mz = z.values.mean(axis=0)[:, 0, 0]
    assert np.max(np.abs(got_my - sol.m_y(t))) < 0.02
    # drop the copied final integrand node from the comparison
    assert np.max(np.abs(got_mz - sol.m_z(t))[:-1]) < 0.04


def test_linear_oracle_internal_consistency():
    # psi/phi solve their ODEs: finite-difference residual check
    spec = LinearMeanFieldSpec(a=1.0, b=-0.5, c=0.3, dbar=0.7, g=0.2, q=2.0, T=1.5)
    sol = linear_closed_form(spec)
    t = np.linspace(0.0, 1.5, 2001)
    m_y = sol.m_y(t)
    dm = np.gradient(m_y, t)
    rhs = -((spec.a + spec.b) * m_y + (spec.c + spec.dbar) * sol.m_z(t) + spec.g)
    assert np.max(np.abs(dm - rhs)[5:-5]) < 2e-5
