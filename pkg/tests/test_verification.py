import math

import numpy as np
import pytest

from nematicflow import MaterialParams, SimState, SpectralGrid
from nematicflow import dynamics as dyn
from nematicflow import landau_de_gennes as ldg
from nematicflow import verification as ver
from nematicflow.spectral_domain import random_band_limited

from conftest import FULL, random_state, single_mode


def quadratic(**kw):
    return MaterialParams(**{**FULL, "b": 0.0, **kw}).replace(c=0.0, allow_degenerate=True)


# ----------------------------------------------------------------------------
# energy balance

def test_balance_zero_state(grid12, full_params):
    res = dyn.run(SimState.zeros(grid12), full_params, dyn.SolverConfig(dt=0.01, t_end=0.05))
    bal = ver.energy_balance_residual(res.reports, 0.01)
    assert np.all(bal.residuals == 0.0) and bal.aggregate == 0.0


def test_balance_closed_form_trajectory():
    """Exact decaying mode substituted into both sides; only the trapezoid
    quadrature of D remains, O(dt^2 lambda^2)."""
    g = SpectralGrid(8)
    p = quadratic(a=0.0, gamma=0.1, L2=0.0, L3=0.0, L4=0.0)
    Q0, k = single_mode(g, (1, 0, 0), 1, amplitude=0.2)
    lam = p.gamma * (-p.L1 * (k @ k) - p.a)
    dt = 1e-3
    reports = [ldg.total_energy(SimState.from_physical(g, None, Q0 * math.exp(lam * t), t=t), p)
               for t in np.arange(0, 101) * dt]
    assert ver.energy_balance_residual(reports, dt).aggregate <= 1e-8


def test_balance_input_checks(grid12, full_params):
    res = dyn.run(SimState.zeros(grid12), full_params, dyn.SolverConfig(dt=0.01, t_end=0.05))
    with pytest.raises(ValueError):
        ver.energy_balance_residual(res.reports[:2], 0.01)
    with pytest.raises(ValueError):
        ver.energy_balance_residual(res.reports, 0.02)


def test_observed_order():
    dts = np.array([0.1, 0.05, 0.025])
    assert ver.observed_order(dts, 3 * dts**2) == pytest.approx(2.0)


# ----------------------------------------------------------------------------
# cancellations

def test_cancellations_vanish_without_velocity(grid12, full_params):
    s = random_state(grid12, 2)
    s.u_hat[:] = 0
    for rep in ver.cancellation_suite(s, full_params):
        assert rep.value == 0.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_cancellations_dealiased(grid16, full_params, seed):
    s = random_state(grid16, 100 + seed, u_amp=1.0, q_amp=0.5)
    for rep in ver.cancellation_suite(s, full_params):
        assert rep.relative_residual <= 1e-10, rep


def test_cancellation_negative_control(grid16, full_params):
    s = random_state(grid16, 7, u_amp=1.0, q_amp=0.5, decay=1.0)
    worst = max(r.relative_residual for r in ver.cancellation_suite(s, full_params, dealias=False))
    assert worst > 1e-6


def test_cancellations_need_solenoidal_velocity(grid12, full_params):
    s = random_state(grid12, 2)
    s.u_hat = s.u_hat + grid12.gradient_hat(grid12.to_spectral(random_band_limited(grid12, "scalar", 2.0, 9)))
    with pytest.raises(ValueError):
        ver.cancellation_suite(s, full_params)


def test_identity_report_zero_over_zero():
    assert ver.IdentityReport("x", 0.0, 0.0).relative_residual == 0.0
    assert not ver.IdentityReport("x", 1.0, 0.0).passed(1.0)


# ----------------------------------------------------------------------------
# null Lagrangian and L4 bound

@pytest.mark.parametrize("seed", range(5))
def test_null_lagrangian(grid16, seed):
    rep = ver.null_lagrangian(grid16, random_band_limited(grid16, "qtensor", 1.5, seed))
    assert rep.relative_residual <= 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_l4_lower_bound(grid16, full_params, seed):
    Q = random_band_limited(grid16, "qtensor", 1.0, seed, amplitude=2.0)
    assert ver.l4_lower_bound(grid16, Q, full_params.replace(L4=3.0)).margin >= 0


# ----------------------------------------------------------------------------
# variational consistency

def test_variational_zero_field(grid12):
    p = MaterialParams(b=0.0)
    # at Q = 0 both sides vanish, so the check falls back to absolute error
    assert ver.variational_consistency(grid12, np.zeros((5,) + grid12.shape), p, n_directions=3) <= 1e-9


def test_variational_quadratic_energy(grid12):
    Q = random_band_limited(grid12, "qtensor", 2.0, 3)
    assert ver.variational_consistency(grid12, Q, quadratic(a=-0.2), n_directions=5) <= 1e-9


def test_variational_full(grid12, full_params):
    Q = random_band_limited(grid12, "qtensor", 2.0, 4, amplitude=0.5)
    assert ver.variational_consistency(grid12, Q, full_params, n_directions=5) <= 1e-6


def test_variational_step_range(grid12, full_params):
    with pytest.raises(ValueError):
        ver.variational_consistency(grid12, np.zeros((5,) + grid12.shape), full_params, fd_step=0.1)


# ----------------------------------------------------------------------------
# higher-order diagnostic and sweep

def test_higher_order_zero(grid12, full_params):
    assert ver.higher_order_diagnostic(SimState.zeros(grid12), full_params) == (0.0, 1.0)


@pytest.mark.parametrize("mode", [(1, 0, 0), (1, 2, 1)])
def test_higher_order_single_mode(grid16, mode):
    p = MaterialParams(L2=0.0, L3=0.0)
    Q, k = single_mode(grid16, mode, 3, amplitude=0.4)
    s = SimState.from_physical(grid16, None, Q)
    A, At = ver.higher_order_diagnostic(s, p)
    ref = p.L1 * (k @ k) ** 2 * grid16.q_inner(Q, Q)
    assert abs(A - ref) <= 1e-10 * ref and At == A + 1


def test_higher_order_two_ways(grid16, full_params):
    s = random_state(grid16, 30)
    a = ver.higher_order_diagnostic(s, full_params, "spectral")[0]
    b = ver.higher_order_diagnostic(s, full_params, "physical")[0]
    assert abs(a - b) <= 1e-12 * a
    with pytest.raises(ValueError):
        ver.higher_order_diagnostic(s, full_params, "other")


def test_sweep_linear_problem_independent_of_mu(grid12):
    p = quadratic(a=0.1)
    Q, _ = single_mode(grid12, (1, 1, 0), 1, amplitude=0.3)
    s = SimState.from_physical(grid12, None, Q)
    rows = ver.viscosity_sweep(s, p, [1, 2, 4], 0.05, dyn.SolverConfig(dt=0.01, t_end=0.05))
    assert len({r.sup_A_tilde for r in rows}) == 1
    assert ver.sweep_violations(rows) == []


def test_sweep_records_blowup(grid12):
    p = MaterialParams(a=-50.0)
    s = random_state(grid12, 1, q_amp=2.0)
    rows = ver.viscosity_sweep(s, p, [1e-3, 2e-3, 4e-3], 50.0, dyn.SolverConfig(dt=0.5, t_end=50.0))
    assert all(r.blowup_time is not None for r in rows)


def test_sweep_validation(grid12, full_params):
    s = SimState.zeros(grid12)
    with pytest.raises(ValueError):
        ver.viscosity_sweep(s, full_params, [1, 2], 0.1)
    with pytest.raises(ValueError):
        ver.viscosity_sweep(s, full_params, [1, 4, 2], 0.1)


def test_sweep_violation_detection():
    R = ver.SweepRow
    rows = [R(1, 5.0, None, 1), R(2, 6.0, None, 1), R(4, 6.0, 0.3, 1)]
    assert ver.sweep_violations(rows) == [(1, 2), (2, 4)]


# ----------------------------------------------------------------------------
# twin runs

def test_twin_identical_data(grid12, full_params):
    s = random_state(grid12, 3)
    res = ver.twin_run(s, ver.perturb(s, 0.0, 1), full_params, dyn.SolverConfig(dt=0.01, t_end=0.05))
    assert np.all(res.G == 0) and res.c_fit == 0.0 and res.bound_satisfied


def test_twin_bound_and_kappas(grid12, full_params):
    s = random_state(grid12, 3)
    res = ver.twin_run(s, ver.perturb(s, 1e-3, 5), full_params, dyn.SolverConfig(dt=0.01, t_end=0.05))
    assert res.self_consistent and res.G[0] > 0
    assert np.all(res.G <= res.G[0] * np.exp(res.c_fit * res.times) * (1 + 1e-6))
    # kappa2 measures the second state in a stronger norm than kappa1 does the first
    assert 0 < 0.9 * res.kappa1 <= res.kappa2


def test_twin_needs_whole_steps(grid12, full_params):
    s = random_state(grid12, 3)
    with pytest.raises(ValueError):
        ver.twin_run(s, s, full_params, dyn.SolverConfig(dt=0.03, t_end=0.05))


def test_perturb_is_solenoidal_and_seeded(grid12):
    s = random_state(grid12, 3)
    a, b = ver.perturb(s, 1e-2, 4), ver.perturb(s, 1e-2, 4)
    assert np.array_equal(a.u_hat, b.u_hat)
    assert grid12.spectral_divergence_max(a.u_hat) <= 1e-14


# ----------------------------------------------------------------------------
# mollifier, delta dissipation, structure

def test_mollifier_suite(grid16):
    reps = ver.mollifier_suite(grid16)
    assert len(reps) == 12
    for r in reps:
        if r.name.startswith("idempotence"):
            assert r.value == 0.0
        else:
            assert r.relative_residual <= 1e-12, r


def test_delta_dissipation_zero_difference(grid12, full_params):
    Q = random_band_limited(grid12, "qtensor", 2.0, 1)
    rep = ver.delta_dissipation_check(grid12, Q, Q, full_params)
    assert rep.value == 0.0


def test_delta_dissipation_l1_only(grid16):
    p = MaterialParams(L2=0.0, L3=0.0, L4=0.0)
    Q1 = random_band_limited(grid16, "qtensor", 2.0, 1)
    Q2 = random_band_limited(grid16, "qtensor", 2.0, 2)
    rep = ver.delta_dissipation_check(grid16, Q1, Q2, p)
    dQ = grid16.dealias(grid16.to_spectral(Q1 - Q2))
    lap = grid16.q_inner_hat(grid16.k2 * dQ, grid16.k2 * dQ)
    assert rep.value == pytest.approx(0.5 * p.L1**2 * lap, rel=1e-13)


@pytest.mark.parametrize("seed", range(4))
def test_delta_dissipation_margin_nonnegative(grid16, full_params, seed):
    Q1 = random_band_limited(grid16, "qtensor", 1.0, 2 * seed)
    Q2 = random_band_limited(grid16, "qtensor", 1.0, 2 * seed + 1)
    assert ver.delta_dissipation_check(grid16, Q1, Q2, full_params).value >= 0


def test_structure_report(grid12):
    s = random_state(grid12, 3)
    rep = ver.structure_report(s)
    assert rep["max_trace"] == 0.0 and rep["max_asym"] == 0.0 and rep["div_ratio"] <= 1e-12
    assert ver.structure_report(SimState.zeros(grid12))["div_ratio"] == 0.0
