import math

import numpy as np
import pytest

from ridgewave.bounds import PhysicalFrame
from ridgewave.grids import Grid
from ridgewave.simulator import (
    SimConfig,
    SimState,
    StepFailure,
    advance_step,
    boundary_production,
    build_initial,
    dissipation_of_state,
    energy_balance_report,
    energy_of_state,
    mass_of_state,
    run_simulation,
    slope_at_0,
    slope_at_w,
    theorem3_report,
)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(n=50)
    with pytest.raises(ValueError):
        SimConfig(eps=-1.0)
    with pytest.raises(ValueError):
        SimConfig(t_end=0.0)


def test_state_validation():
    cfg = SimConfig(n=100)
    f = np.zeros(101)
    SimState(t=0.0, f=f)
    f2 = f.copy()
    f2[0] = 0.1
    with pytest.raises(ValueError):
        SimState(t=0.0, f=f2)
    f3 = f.copy()
    f3[5] = -1e-3
    with pytest.raises(ValueError):
        SimState(t=0.0, f=f3)


def test_build_initial_identity_frame(shoot_result):
    cfg = SimConfig(n=400)
    profile = shoot_result.resample(Grid.uniform(401))
    state = build_initial(cfg, profile)
    # theta = v = 1: the initial heights are the profile samples
    assert np.max(np.abs(state.f - profile.phi)) <= 1e-14
    lo, hi = 0.0619, 0.1074
    assert lo <= state.f.max() <= hi
    assert 0.0190476 - 1e-6 <= mass_of_state(state, cfg) <= 0.0329915


def test_build_initial_scaled_frame(shoot_result):
    frame = PhysicalFrame(v=1.0, theta=2.0)  # w = 2
    cfg = SimConfig(frame=frame, n=400)
    profile = shoot_result.resample(Grid.uniform(401))
    state = build_initial(cfg, profile)
    # h = theta^3 phi(eta), mass scales by theta^5 / v^2
    assert state.f.max() == pytest.approx(8.0 * profile.phi.max(), rel=1e-12)
    base_mass = float(np.trapezoid(profile.phi, profile.eta))
    assert mass_of_state(state, cfg) == pytest.approx(32.0 * base_mass, rel=1e-10)


def test_build_initial_perturbation_vanishes_at_contacts(shoot_result):
    cfg = SimConfig(n=400, perturb_amp=0.05, perturb_mode=2)
    profile = shoot_result.resample(Grid.uniform(401))
    state = build_initial(cfg, profile)
    assert state.f[0] == 0.0 and state.f[-1] == 0.0
    assert np.all(state.f >= 0.0)


def test_advance_step_zero_dt_is_identity(shoot_result):
    cfg = SimConfig(n=400)
    state = build_initial(cfg, shoot_result.resample(Grid.uniform(401)))
    out, used = advance_step(state, 0.0, cfg)
    assert used == 0.0
    assert np.array_equal(out.f, state.f)
    with pytest.raises(ValueError):
        advance_step(state, -1e-6, cfg)


def test_one_step_consistency_on_wave(shoot_result):
    cfg = SimConfig(n=400)
    state = build_initial(cfg, shoot_result.resample(Grid.uniform(401)))
    out, used = advance_step(state, 1e-6, cfg)
    assert used == pytest.approx(1e-6)
    assert np.max(np.abs(out.f - state.f)) <= 1e-5 * state.f.max()


def test_single_step_mass_exact(shoot_result):
    cfg = SimConfig(n=400)
    state = build_initial(cfg, shoot_result.resample(Grid.uniform(401)))
    m0 = mass_of_state(state, cfg)
    out, _ = advance_step(state, 1e-4, cfg)
    assert abs(mass_of_state(out, cfg) - m0) <= 1e-12 * m0


def test_mass_of_zero_state():
    cfg = SimConfig(n=100)
    assert mass_of_state(SimState(t=0.0, f=np.zeros(101)), cfg) == 0.0


def test_stationary_run_drift_and_mass(sim_stationary):
    led = sim_stationary.ledger
    peak = float(np.max(sim_stationary.wave))
    assert float(np.max(led.sup_error_vs_wave)) <= 0.02 * peak
    assert float(np.max(np.abs(led.mass - led.mass[0]))) <= 1e-10 * led.mass[0]
    assert all(np.all(s.f >= 0.0) for s in sim_stationary.snapshots)


def test_stationary_energy_identity(sim_stationary):
    led = sim_stationary.ledger
    frame = sim_stationary.config.frame
    max_resid, per_interval = energy_balance_report(led, frame)
    assert max_resid <= 0.01
    assert np.all(per_interval <= 0.01)
    # dissipation = v theta^2 / 2 within 2 percent at every output
    assert np.max(np.abs(led.dissipation - 0.5)) <= 0.01
    # E is essentially constant and equals (theta^4/v) d^2/6 = 1/24;
    # the slow decay is the discrete profile relaxing toward the
    # scheme's own steady state (first-order at the contact lines)
    assert led.energy[0] == pytest.approx(1.0 / 24.0, abs=2e-5)
    assert np.max(np.abs(led.energy - led.energy[0])) <= 1e-3 * led.energy[0]


def test_stationary_boundary_terms(sim_stationary):
    led = sim_stationary.ledger
    # trailing slope tends to zero with resolution; production tends to v theta^2/2
    assert np.max(np.abs(led.slope_at_w)) <= 0.1
    assert led.boundary_term[-1] == pytest.approx(0.5, abs=0.01)
    state = sim_stationary.snapshots[-1]
    assert slope_at_0(state, sim_stationary.config) == pytest.approx(1.0, abs=5e-3)


def test_refinement_reduces_drift(sim_stationary, sim_fine):
    d400 = float(np.max(sim_stationary.ledger.sup_error_vs_wave))
    d800 = float(np.max(sim_fine.ledger.sup_error_vs_wave))
    assert d400 / d800 >= 1.5


def test_perturbed_run_identity_and_positivity(sim_perturbed):
    led = sim_perturbed.ledger
    max_resid, _ = energy_balance_report(led, sim_perturbed.config.frame)
    assert max_resid <= 0.01
    assert np.all(np.isfinite(led.balance_residual))
    assert float(np.max(np.abs(led.mass - led.mass[0]))) <= 1e-10 * led.mass[0]
    assert all(np.all(s.f >= 0.0) for s in sim_perturbed.snapshots)


def test_theorem3_first_branch_bound(sim_stationary, sim_perturbed):
    for res in (sim_stationary, sim_perturbed):
        rep = res.report
        assert rep.first_bound == pytest.approx(math.sqrt(6.0) / 6.0 * math.sqrt(0.5), abs=1e-12)
        assert rep.first_bound == pytest.approx(0.288675, abs=1e-6)
        assert rep.first_all_satisfied
        # near-wave data keeps the trailing slope below theta: second branch
        assert all(not r.first_branch_active for r in rep.rows)


def test_theorem3_second_branch_recorded_failure(sim_stationary):
    rows = sim_stationary.report.rows
    # shift at t = 0.04 equals 2 sqrt(0.5) sqrt(0.04) = 0.282843
    row = min(rows, key=lambda r: abs(r.t - 0.04))
    assert row.second_shift == pytest.approx(0.2828427, abs=1e-6)
    assert all(r.second_satisfied for r in rows if r.t <= 0.0415)
    late = [r for r in rows if r.t >= 0.0425]
    assert late and all(not r.second_satisfied for r in late)


def test_eps_robustness(shoot_result):
    # the mobility lift is not the dominant error: drifts at 1e-6 and
    # 1e-7 agree within the drift tolerance itself
    profile = shoot_result.resample(Grid.uniform(401))
    drifts = []
    for eps in (1e-6, 1e-7):
        res = run_simulation(SimConfig(n=400, eps=eps, t_end=0.01), profile)
        drifts.append(float(np.max(res.ledger.sup_error_vs_wave)))
    assert abs(drifts[0] - drifts[1]) <= max(drifts)


def test_dissipation_and_energy_of_wave_state(shoot_result):
    cfg = SimConfig(n=400)
    state = build_initial(cfg, shoot_result.resample(Grid.uniform(401)))
    assert dissipation_of_state(state, cfg) == pytest.approx(0.5, abs=0.01)
    assert energy_of_state(state, cfg) == pytest.approx(1.0 / 24.0, abs=2e-5)
    assert boundary_production(state, cfg) == pytest.approx(0.5, abs=0.01)
    assert abs(slope_at_w(state, cfg)) <= 0.1


def test_theorem3_report_standalone(shoot_result):
    cfg = SimConfig(n=400)
    state = build_initial(cfg, shoot_result.resample(Grid.uniform(401)))
    rep = theorem3_report([state], state.f, cfg)
    assert len(rep.rows) == 1
    assert rep.rows[0].sup_error == 0.0
    assert rep.rows[0].second_satisfied  # shift is 0 at t = 0


def test_step_failure_on_impossible_budget(shoot_result):
    cfg = SimConfig(n=400, dt_min=1e-3, max_newton=1, max_halvings=2)
    state = build_initial(cfg, shoot_result.resample(Grid.uniform(401)))
    with pytest.raises(StepFailure):
        advance_step(state, 2e-3, cfg)
