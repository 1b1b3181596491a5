"""Norm estimators, the exponential transform, and bound checks."""

import math

import numpy as np
import pytest

from mfbsde.core import ProcessGrid, build_grid, simulate_brownian
from mfbsde.diagnostics import (
    bmo2_estimate,
    bmo_budget_global,
    build_report,
    check_alpha_envelope,
    check_lemma21,
    mp_norm,
    phi,
    phi_double_prime,
    phi_prime,
    sp_norm,
    sup_norm,
)


def _const_process(grid, value, P=500, dims=(1,)):
    vals = np.full((P, grid.n_steps + 1, *dims), float(value))
    return ProcessGrid(grid=grid, values=vals)


# ---------------------------------------------------------------------------
# norms
# ---------------------------------------------------------------------------


def test_sup_and_sp_norm_constant_process(grid50):
    p = _const_process(grid50, -3.0)
    assert sup_norm(p) == 3.0
    assert sp_norm(p, 2.0) == pytest.approx(3.0, rel=1e-12)
    assert sp_norm(p, 4.0) == pytest.approx(3.0, rel=1e-12)


def test_mp_norm_constant_integrand(grid50):
    # |Z| = c: the integrated square over [0, 1] is c^2, so the M2 norm is c
    z = _const_process(grid50, 2.0, dims=(1, 1))
    assert mp_norm(z, 2.0) == pytest.approx(2.0, rel=1e-12)


def test_mp_norm_scaling(grid50, rng):
    vals = rng.standard_normal((200, 51, 1, 1))
    z1 = ProcessGrid(grid=grid50, values=vals)
    z3 = ProcessGrid(grid=grid50, values=3.0 * vals)
    assert mp_norm(z3, 2.0) == pytest.approx(3.0 * mp_norm(z1, 2.0), rel=1e-12)


def test_bmo2_constant_integrand(grid50):
    # E_i[int_{t_i}^T 1 ds] = T - t_i, maximal at t_0
    ens = simulate_brownian(grid50, 1, 4000, 5)
    z = _const_process(grid50, 1.0, P=4000, dims=(1, 1))
    est = bmo2_estimate(z, ens)
    assert est == pytest.approx(1.0, rel=0.02)


def test_bmo2_sees_conditional_tails(grid50):
    # integrand |W_t|: the conditional tail integral depends on the state,
    # so the BMO estimate must exceed the plain expectation
    ens = simulate_brownian(grid50, 1, 20_000, 6)
    z = ProcessGrid(grid=grid50, values=np.abs(ens.levels)[:, :, :, None])
    est = bmo2_estimate(z, ens)
    mean_sq = mp_norm(z, 2.0) ** 2
    assert est > mean_sq


# ---------------------------------------------------------------------------
# exponential transform
# ---------------------------------------------------------------------------


def test_phi_vanishes_at_origin():
    for g in (0.4, 1.0, 3.0):
        assert phi(0.0, g) == 0.0
        assert phi_prime(0.0, g) == 0.0
        assert phi_double_prime(0.0, g) == 1.0


@pytest.mark.parametrize("gamma", [0.4, 1.0, 2.5])
def test_phi_ode_identity(gamma, rng):
    # phi'' - gamma*|phi'| = 1 pointwise (the design identity of the
    # transform); rounding scales with the exponential itself
    y = rng.uniform(-5, 5, 400)
    second = phi_double_prime(y, gamma)
    lhs = second - gamma * np.abs(phi_prime(y, gamma))
    assert np.max(np.abs(lhs - 1.0) / second) < 1e-12


def test_phi_even_and_increasing(rng):
    y = rng.uniform(0.0, 4.0, 100)
    np.testing.assert_array_equal(phi(y, 1.0), phi(-y, 1.0))
    assert np.all(np.diff(phi(np.sort(y), 1.0)) >= 0.0)


def test_bmo_budget_finite_and_monotone():
    b1 = bmo_budget_global(1.0, 0.2, 10.0, 1.0, 0.4)
    b2 = bmo_budget_global(1.0, 0.2, 100.0, 1.0, 0.4)
    assert 0.0 < b1 < b2 < math.inf


def test_bmo_budget_saturates():
    # envelope level beyond the double exponential range
    assert bmo_budget_global(1.0, 1.0, 1e22, 1.0, 1.0) == math.inf


# ---------------------------------------------------------------------------
# bound checks
# ---------------------------------------------------------------------------


def test_alpha_envelope_synthetic(grid50):
    below = _const_process(grid50, 0.5)
    above = _const_process(grid50, 3.0)
    env = lambda t: np.ones_like(np.asarray(t))  # |Y|^2 <= 1
    assert check_alpha_envelope(below, env)["violation_rate"] == 0.0
    assert check_alpha_envelope(above, env)["violation_rate"] == 1.0


def test_exponential_bound_holds_on_martingale(grid50):
    # Y = W (zero driver): |Y_0| = 0, so the bound holds with margin
    ens = simulate_brownian(grid50, 1, 2000, 8)
    y = ProcessGrid(grid=grid50, values=ens.levels)
    xi_abs = np.abs(ens.levels[:, -1, 0])
    g = np.zeros(51)
    out = check_lemma21(y, xi_abs, g, beta=0.5, gamma=1.0)
    assert out["holds"]
    assert out["margin"] > 0.0


def test_exponential_bound_rejects_misaligned_curve(grid50):
    ens = simulate_brownian(grid50, 1, 100, 9)
    y = ProcessGrid(grid=grid50, values=ens.levels)
    from mfbsde.errors import InvalidInput

    with pytest.raises(InvalidInput):
        check_lemma21(y, np.abs(ens.levels[:, -1, 0]), np.zeros(7), 0.5, 1.0)


def test_exponential_bound_detects_violation(grid50):
    # a state far above anything the terminal data and envelope allow
    ens = simulate_brownian(grid50, 1, 500, 10)
    vals = ens.levels.copy()
    vals[:, 0, :] = 50.0
    y = ProcessGrid(grid=grid50, values=vals)
    out = check_lemma21(y, np.abs(ens.levels[:, -1, 0]), np.zeros(51), 0.5, 1.0)
    assert not out["holds"]


# ---------------------------------------------------------------------------
# report assembly
# ---------------------------------------------------------------------------


def test_build_report_fields(grid50):
    ens = simulate_brownian(grid50, 1, 3000, 11)
    y = ProcessGrid(grid=grid50, values=ens.levels)
    z = _const_process(grid50, 1.0, P=3000, dims=(1, 1))
    rep = build_report(y, z, ens, gamma=0.4, bmo_budget=5.0,
                       alpha_fn=lambda t: 100.0 * np.ones_like(np.asarray(t)))
    assert rep.bmo2_z == pytest.approx(1.0, rel=0.05)
    assert rep.bmo_within_budget
    assert rep.alpha_violation_rate == 0.0
    d = rep.as_dict()
    assert d["gamma"] == 0.4
    assert d["clamp_events"] == 0
