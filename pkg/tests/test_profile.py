import numpy as np
import pytest

from ridgewave.bounds import envelope_eval
from ridgewave.grids import Grid, Profile, fd_weights, tabulated_derivative
from ridgewave.profile_solver import (
    KernelOperator,
    KernelSolveConfig,
    ShootConfig,
    apply_green_operator,
    initial_iterate,
    pairwise_sup_distance,
    profile_diagnostics,
    series_state,
    solve_collocation,
    solve_kernel_iteration,
)

D = 0.5


# ---------------------------------------------------------------------------
# grids and stencils


def test_grid_validation():
    with pytest.raises(ValueError):
        Grid(np.linspace(0.0, D, 50))  # too few nodes
    with pytest.raises(ValueError):
        Grid(np.linspace(0.1, D, 200))  # first node not 0
    nodes = np.linspace(0.0, D, 200)
    nodes[5] = nodes[4]
    with pytest.raises(ValueError):
        Grid(nodes)


def test_graded_grid_clusters_both_ends():
    g = Grid.graded(501, 1.5)
    assert g.nodes[0] == 0.0 and g.nodes[-1] == D
    h = np.diff(g.nodes)
    assert h[0] < h[len(h) // 2] / 5.0
    assert h[-1] < h[len(h) // 2] / 5.0


def test_fd_weights_exact_on_polynomials():
    x = np.array([0.0, 0.013, 0.02, 0.041, 0.07])
    for m in (1, 2, 3):
        w = fd_weights(x, 0.02, m)
        for p in range(len(x)):
            deriv = 0.0
            if p >= m:
                c = 1.0
                for j in range(m):
                    c *= p - j
                deriv = c * 0.02 ** (p - m)
            assert w @ x**p == pytest.approx(deriv, abs=1e-8 * max(1.0, abs(deriv)))


def test_tabulated_derivative_on_smooth_function():
    nodes = np.linspace(0.0, D, 401)
    vals = np.sin(3.0 * nodes)
    d1 = tabulated_derivative(nodes, vals, 1, width=5)
    assert np.max(np.abs(d1 - 3.0 * np.cos(3.0 * nodes))) <= 1e-7


# ---------------------------------------------------------------------------
# kernel fixed-point route


def test_initial_iterate_values():
    grid = Grid.uniform(201)
    p = initial_iterate(100.0, grid)
    j = np.argmin(np.abs(grid.nodes - 0.25))
    assert p.phi[j] == pytest.approx(0.135, abs=1e-15)
    assert p.phi[0] == pytest.approx(0.01, abs=1e-18)
    limit = initial_iterate(None, grid)
    assert limit.phi[j] == pytest.approx(0.125, abs=1e-15)
    with pytest.raises(ValueError):
        initial_iterate(-5.0, grid)


def test_apply_green_operator_constant_profile():
    grid = Grid.uniform(1281)
    ones = Profile(grid=grid, phi=np.ones(grid.n), dphi=np.zeros(grid.n), method="kernel", k=100)
    out = apply_green_operator(ones, 100.0)
    j = np.argmin(np.abs(grid.nodes - 0.25))
    # 1/k + 2 eta (d - eta) - (closed-form row integrals) at eta = 1/4
    assert out.phi[j] == pytest.approx(0.132395833333, abs=1e-9)
    assert out.phi[0] == pytest.approx(0.01, abs=1e-12)
    assert out.phi[-1] == pytest.approx(0.01, abs=1e-12)


def test_apply_green_operator_monotone_in_input():
    grid = Grid.uniform(321)
    op = KernelOperator(grid)
    rng = np.random.default_rng(3)
    base = 0.05 + 0.3 * grid.nodes * (D - grid.nodes) + 0.01 * np.sin(7 * grid.nodes)
    bump = 0.02 * (1.0 + np.cos(5 * grid.nodes)) + 1e-3 * rng.random(grid.n)
    lo = op.apply(base, 100.0)
    hi = op.apply(base + bump, 100.0)
    assert np.all(hi >= lo - 1e-14)


def test_apply_green_operator_rejects_nonpositive():
    grid = Grid.uniform(201)
    bad = initial_iterate(100.0, grid)
    bad.phi[50] = 0.0
    with pytest.raises(ValueError):
        apply_green_operator(bad, 100.0)


def test_kernel_iteration_monotone_levels_and_limit():
    grid = Grid.uniform(641)
    res = solve_kernel_iteration(KernelSolveConfig(k_schedule=(1e2, 1e3, 1e4)), grid)
    assert all(lv.monotone for lv in res.levels)
    assert all(lv.fixed_point_residual <= 1e-10 for lv in res.levels)
    # profiles decrease pointwise as k grows (interior nodes)
    for a, b in zip(res.levels, res.levels[1:]):
        assert np.all(b.profile.phi[1:-1] <= a.profile.phi[1:-1] + 1e-12)
    # endpoint values sit exactly at 1/k
    for lv in res.levels:
        assert lv.profile.phi[0] == pytest.approx(1.0 / lv.k, abs=1e-18)
    assert res.limit.phi[0] == 0.0 and res.limit.phi[-1] == 0.0
    assert res.limit.dphi[0] == pytest.approx(1.0, abs=1e-14)
    assert np.isfinite(res.level_gap)


def test_kernel_limit_inside_envelope_bracket(kernel_result):
    lim = kernel_result.limit
    val = float(np.interp(0.2, lim.eta, lim.phi))
    lo, hi = envelope_eval(0.2)
    assert lo <= val <= hi


def test_kernel_iteration_floor_guard():
    grid = Grid.uniform(641)
    cfg = KernelSolveConfig(k_schedule=(1e2,), floor=1.0)  # absurd floor trips immediately
    with pytest.raises(RuntimeError, match="floor"):
        solve_kernel_iteration(cfg, grid)


def test_kernel_config_validation():
    with pytest.raises(ValueError):
        KernelSolveConfig(k_schedule=(1e3, 1e2))
    with pytest.raises(ValueError):
        KernelSolveConfig(damping=1.5)


# ---------------------------------------------------------------------------
# shooting route


def test_series_start_value():
    # 1e-4 + 0.5e-8*ln(1e-4) = 9.9953948e-5
    phi, dphi, _ = series_state(1e-4, 0.0)
    assert phi == pytest.approx(1e-4 + 0.5e-8 * np.log(1e-4), abs=1e-18)
    assert phi == pytest.approx(9.9953948e-5, abs=1e-11)
    assert dphi == pytest.approx(1.0 + 1e-4 * np.log(1e-4) + 5e-5, abs=1e-12)


def test_shooting_touchdown_and_slope(shoot_result):
    assert abs(shoot_result.eta_star - D) <= 1e-8
    p = shoot_result.profile
    # recovered slope at 0 is the imposed boundary value
    assert p.dphi[0] == pytest.approx(1.0, abs=1e-12)
    eta = p.eta[(p.eta > 0) & (p.eta < 1e-3)]
    if eta.size:
        slopes = np.interp(eta, p.eta, p.dphi)
        assert np.max(np.abs(slopes - 1.0)) <= 2e-2  # eta log eta departure only
    # touchdown prefactor from the trajectory is near sqrt(8/3)
    assert shoot_result.a_edge == pytest.approx(np.sqrt(8.0 / 3.0), abs=0.01)


def test_shooting_profile_positive_and_unimodal(shoot_result):
    p = shoot_result.profile
    assert np.all(p.phi[1:-1] > 0.0)
    dg = profile_diagnostics(p)
    assert dg.sign_changes == 1
    assert 0.15 < dg.max_location < 0.25


def test_shoot_config_validation():
    with pytest.raises(ValueError):
        ShootConfig(eps=0.9)
    with pytest.raises(ValueError):
        ShootConfig(b_bracket=(3.0, -3.0))


def test_shoot_resample_matches_profile(shoot_result):
    # 641 nodes nest inside the 2561-node reference grid (4:1), so the
    # comparison carries no interpolation error of its own
    small = Grid.uniform(641)
    p = shoot_result.resample(small)
    ref = shoot_result.profile
    assert np.max(np.abs(p.phi - ref.phi[::4])) <= 1e-12


# ---------------------------------------------------------------------------
# collocation route


def test_collocation_converges_quickly(collocation_profile):
    meta = collocation_profile.meta
    assert meta["newton_steps"] <= 15
    # untrimmed stall level sits at the residual-evaluation roundoff
    # floor; the trimmed interior residual (gated elsewhere) is tighter
    assert meta["newton_residual"] <= 5e-6
    assert np.all(collocation_profile.phi[1:-1] > 0.0)
    assert collocation_profile.dphi[0] == pytest.approx(1.0, abs=1e-10)


def test_collocation_rejects_nonpositive_init():
    grid = Grid.graded(501, 1.5)
    bad = Profile(grid=grid, phi=np.zeros(grid.n), dphi=np.zeros(grid.n), method="x")
    with pytest.raises(ValueError):
        solve_collocation(grid, init=bad)


# ---------------------------------------------------------------------------
# cross-method agreement and diagnostics


def test_cross_method_agreement(kernel_result, shoot_result, collocation_profile):
    kern = kernel_result.limit
    shoot = shoot_result.profile
    col = collocation_profile
    assert pairwise_sup_distance(kern, shoot) <= 1e-5
    assert pairwise_sup_distance(shoot, col) <= 1e-5
    assert pairwise_sup_distance(kern, col) <= 1e-5


def test_first_integral_residuals(shoot_result, collocation_profile):
    assert profile_diagnostics(shoot_result.profile).res_first_integral_sup <= 1e-6
    assert profile_diagnostics(collocation_profile).res_first_integral_sup <= 1e-6


def test_ode_residuals_native_operators(kernel_result, collocation_profile):
    level = kernel_result.levels[-1].profile
    assert profile_diagnostics(level).res_ode3_sup <= 1e-6
    assert profile_diagnostics(collocation_profile).res_ode3_sup <= 1e-6


def test_endpoint_slope_extrapolates_to_zero(shoot_result):
    dg = profile_diagnostics(shoot_result.profile)
    assert abs(dg.dphi_at_d) <= 1e-3


def test_slope_norm_equals_third_of_d_squared(shoot_result):
    # integrating the first integral against phi'' gives
    # int (phi')^2 = d^2/3 exactly for the true profile
    p = shoot_result.profile
    slope_norm = float(np.trapezoid(p.dphi**2, p.eta))
    assert slope_norm == pytest.approx(D**2 / 3.0, abs=2e-6)


def test_profile_regression_values(shoot_result):
    # frozen from the cross-validated solve (three methods agree to 1e-6)
    dg = profile_diagnostics(shoot_result.profile)
    assert dg.max_value == pytest.approx(0.0870332, abs=2e-4)
    assert dg.max_location == pytest.approx(0.20095, abs=2e-3)
    assert shoot_result.b_star == pytest.approx(-2.17525, abs=2e-3)
    mass = float(np.trapezoid(shoot_result.profile.phi, shoot_result.profile.eta))
    assert mass == pytest.approx(0.0271555, abs=2e-5)
