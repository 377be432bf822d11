"""The acceptance suite: every top-level check as a machine-readable record.

Each check freezes its tolerance here; ``run_validation`` evaluates all
of them (or the fast subset that skips the PDE simulations) and returns
a report whose overall flag is the conjunction of the individual flags.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad

from . import bounds as bd
from . import greens
from .grids import Grid
from .profile_solver import (
    KernelSolveConfig,
    ShootConfig,
    pairwise_sup_distance,
    profile_diagnostics,
    solve_collocation,
    solve_kernel_iteration,
    solve_shooting,
)
from .simulator import SimConfig, energy_balance_report, run_simulation

D = 0.5


@dataclass
class Check:
    id: str
    description: str
    measured: object
    expected: str
    passed: bool
    seconds: float = 0.0

    def as_dict(self, with_timing=True):
        out = {
            "id": self.id,
            "description": self.description,
            "measured": self.measured,
            "expected": self.expected,
            "pass": self.passed,
        }
        if with_timing:
            out["seconds"] = round(self.seconds, 3)
        return out


@dataclass
class ValidationReport:
    checks: list
    fast: bool

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def as_dict(self, with_timing=True):
        return {
            "overall_pass": self.passed,
            "fast_mode": self.fast,
            "checks": [c.as_dict(with_timing) for c in self.checks],
        }

    def summary_lines(self):
        for c in self.checks:
            yield f"[{c.id}] {'PASS' if c.passed else 'FAIL'}  {c.description}"


class ValidationContext:
    """Lazily computed artifacts shared by the checks (and by the tests)."""

    def __init__(self):
        self._cache = {}

    def _get(self, key, builder):
        if key not in self._cache:
            self._cache[key] = builder()
        return self._cache[key]

    @property
    def shoot(self):
        return self._get("shoot", lambda: solve_shooting(ShootConfig(), Grid.uniform(2561)))

    @property
    def reference(self):
        """The profile used for envelope/edge/mass gates: the shooting
        solution, whose touchdown neighborhood is integrator-accurate."""
        return self.shoot.profile

    @property
    def kernel(self):
        return self._get(
            "kernel", lambda: solve_kernel_iteration(KernelSolveConfig(), Grid.uniform(2561))
        )

    @property
    def collocation(self):
        return self._get("collocation", lambda: solve_collocation(Grid.graded(2001, 1.5)))

    def sim(self, n=400, perturb=0.0):
        key = ("sim", n, perturb)

        def build():
            profile = self.shoot.resample(Grid.uniform(n + 1))
            cfg = SimConfig(n=n, perturb_amp=perturb, perturb_mode=1)
            return run_simulation(cfg, profile)

        return self._get(key, build)


def _timed(func):
    t0 = time.perf_counter()
    check = func()
    check.seconds = time.perf_counter() - t0
    return check


def check_kernel_identities(ctx=None) -> Check:
    """AC1: closed-form row integrals vs adaptive quadrature; boundary rows."""
    eta = np.linspace(0.0, D, 101)
    worst = 0.0
    for e in eta:
        left, right = greens.kernel_row_integrals(e)
        if e > 0.0:
            ql = quad(lambda t: greens.kernel_eval(e, t), 0.0, e, epsabs=1e-14, epsrel=1e-13)[0]
        else:
            ql = 0.0
        if e < D:
            qr = quad(lambda t: greens.kernel_eval(e, t), e, D, epsabs=1e-14, epsrel=1e-13)[0]
        else:
            qr = 0.0
        worst = max(worst, abs(left - ql), abs(right - qr))
    t = np.linspace(0.0, D, 1001)
    boundary = max(
        float(np.max(np.abs(greens.kernel_eval(0.0, t)))),
        float(np.max(np.abs(greens.kernel_deriv_eval(0.0, t)))),
        float(np.max(np.abs(greens.kernel_eval(D, t)))),
    )
    return Check(
        id="AC1_kernel_identities",
        description="closed-form kernel row integrals match quadrature; boundary rows vanish",
        measured={"max_closed_form_dev": worst, "max_boundary_row": boundary},
        expected="closed-form dev <= 1e-10; boundary rows <= 1e-14",
        passed=bool(worst <= 1e-10 and boundary <= 1e-14),
    )


def check_representation_oracle(ctx=None) -> Check:
    """AC2: the cubic problem fixes the reconstruction sign; erratum size."""
    dev_corrected = greens.representation_check(g=6.0, a=0.0, sign=-1)
    dev_printed = greens.representation_check(g=6.0, a=0.0, sign=+1, nodes=np.array([0.25]))
    erratum = abs(dev_printed - 0.03125)
    return Check(
        id="AC2_representation_oracle",
        description="sign-corrected reconstruction reproduces the cubic; printed sign misses by 0.03125",
        measured={"dev_corrected": dev_corrected, "dev_printed_at_quarter": dev_printed},
        expected="corrected <= 1e-10; |printed deviation at 0.25 - 0.03125| <= 1e-12",
        passed=bool(dev_corrected <= 1e-10 and erratum <= 1e-12),
    )


def check_profile_agreement(ctx: ValidationContext) -> Check:
    """AC3: three independent profiles agree; residuals on the trimmed interior."""
    kern = ctx.kernel.limit
    shoot = ctx.reference
    col = ctx.collocation
    d_ks = pairwise_sup_distance(kern, shoot)
    d_sc = pairwise_sup_distance(shoot, col)
    d_kc = pairwise_sup_distance(kern, col)
    dg_col = profile_diagnostics(col)
    dg_shoot = profile_diagnostics(shoot)
    dg_kern = profile_diagnostics(ctx.kernel.levels[-1].profile)
    measured = {
        "sup_kernel_shoot": d_ks,
        "sup_shoot_collocation": d_sc,
        "sup_kernel_collocation": d_kc,
        "ode3_residual_collocation": dg_col.res_ode3_sup,
        "ode3_residual_kernel_fixed_point": dg_kern.res_ode3_sup,
        "first_integral_shoot": dg_shoot.res_first_integral_sup,
        "first_integral_collocation": dg_col.res_first_integral_sup,
    }
    passed = (
        max(d_ks, d_sc, d_kc) <= 1e-5
        and dg_col.res_ode3_sup <= 1e-6
        and dg_kern.res_ode3_sup <= 1e-6
        and dg_shoot.res_first_integral_sup <= 1e-6
        and dg_col.res_first_integral_sup <= 1e-6
    )
    return Check(
        id="AC3_profile_agreement",
        description="kernel/shoot/collocation profiles agree pairwise; trimmed residuals small",
        measured=measured,
        expected="pairwise sup <= 1e-5 on [0.01,0.49]; residuals <= 1e-6 (each method's native operator)",
        passed=bool(passed),
    )


def check_envelope(ctx: ValidationContext) -> Check:
    """AC4: certified envelope containment, unimodal slope, flat touchdown."""
    p = ctx.reference
    env = bd.envelope_check(p, slack=1e-8)
    dg = profile_diagnostics(p)
    measured = {
        "min_lower_margin": env.min_lower_margin,
        "min_upper_margin": env.min_upper_margin,
        "argmins": [env.argmin_lower, env.argmin_upper],
        "slope_sign_changes": dg.sign_changes,
        "dphi_at_d": dg.dphi_at_d,
        "max_location": dg.max_location,
    }
    passed = env.passed and dg.sign_changes == 1 and abs(dg.dphi_at_d) <= 1e-3
    return Check(
        id="AC4_envelope",
        description="profile sits inside the certified envelope; one slope sign change; phi'(d) ~ 0",
        measured=measured,
        expected="margins >= -1e-8; sign changes == 1; |phi'(d)| <= 1e-3",
        passed=bool(passed),
    )


def check_edge_asymptotics(ctx: ValidationContext) -> Check:
    """AC5: touchdown prefactor equals 2*sqrt(2/3)."""
    fit = bd.edge_coefficient(ctx.reference)
    err = abs(fit.estimate - bd.EDGE_COEFFICIENT)
    return Check(
        id="AC5_edge_asymptotics",
        description="extrapolated phi/(d-eta)^(3/2) matches the touchdown constant",
        measured={"estimate": fit.estimate, "target": bd.EDGE_COEFFICIENT, "abs_err": err},
        expected="|estimate - 1.6329932| <= 0.01",
        passed=bool(err <= 0.01),
    )


def check_functionals(ctx: ValidationContext) -> Check:
    """AC6: mass interval; exact slope-norm values; gate thresholds."""
    stats = bd.mass_and_slope_stats(ctx.reference)

    sn_min = bd.envelope_slope_norm_exact(bd.A_LOWER)
    sn_max = bd.envelope_slope_norm_exact(bd.A_UPPER)
    quad_min = quad(lambda e: (bd.A_LOWER * math.sqrt(D - e) * (D - 2.5 * e)) ** 2, 0.0, D,
                    epsabs=1e-14, epsrel=1e-14)[0]
    quad_max = quad(lambda e: (bd.A_UPPER * math.sqrt(D - e) * (D - 2.5 * e)) ** 2, 0.0, D,
                    epsabs=1e-14, epsrel=1e-14)[0]
    slope_norm_ok = (
        abs(sn_min - 1.0 / 24.0) <= 1e-12
        and abs(sn_max - 0.125) <= 1e-12
        and abs(quad_min - 1.0 / 24.0) <= 1e-12
        and abs(quad_max - 0.125) <= 1e-12
    )

    g_lower, g_upper = bd.Envelope().gate_values()
    gates_ok = (
        abs(g_lower - 8.0 / 9.0) <= 1e-14
        and abs(g_upper - 8.0 / 3.0) <= 1e-14
        and abs(bd.GATE_SUPERSOLUTION - 5.0 / 3.0) == 0.0
        and bd.lemma_gate(2.0).classification == "supersolution-only"
        and bd.lemma_gate(bd.A_LOWER).classification == "lower-certified"
        and bd.lemma_gate(2.8).classification == "none"
        and bd.lemma_gate(bd.A_UPPER).classification == "upper-certified"
    )
    measured = {
        "mass": stats.mass,
        "mass_interval": list(stats.mass_interval),
        "slope_norm_min_exact": sn_min,
        "slope_norm_max_exact": sn_max,
        "gate_values": [g_lower, bd.GATE_SUPERSOLUTION, g_upper],
    }
    return Check(
        id="AC6_derived_functionals",
        description="mass in the envelope interval; slope-norm closed forms; gate thresholds exact",
        measured=measured,
        expected="mass in [2/105, 2*sqrt(3)/105]; slope norms 1/24, 1/8 to 1e-12; gates 8/9, 5/3, 8/3",
        passed=bool(stats.mass_in_interval and slope_norm_ok and gates_ok),
    )


def check_stationarity(ctx: ValidationContext) -> Check:
    """AC7: wave drift at N=400 and its decay at N=800."""
    r400 = ctx.sim(400)
    r800 = ctx.sim(800)
    peak = float(np.max(r400.wave))
    drift400 = float(np.max(r400.ledger.sup_error_vs_wave))
    drift800 = float(np.max(r800.ledger.sup_error_vs_wave))
    ratio = drift400 / drift800 if drift800 > 0 else math.inf
    measured = {
        "drift_n400": drift400,
        "drift_n800": drift800,
        "peak": peak,
        "ratio": ratio,
    }
    passed = drift400 <= 0.02 * peak and ratio >= 1.5
    return Check(
        id="AC7_simulator_stationarity",
        description="wave initial data stays put; drift shrinks by >= 1.5x at double resolution",
        measured=measured,
        expected="drift <= 2% of peak; drift(N=400)/drift(N=800) >= 1.5",
        passed=bool(passed),
    )


def check_energy_identity(ctx: ValidationContext) -> Check:
    """AC8: discrete energy balance, stationary dissipation, mass invariance."""
    r_stat = ctx.sim(400)
    r_pert = ctx.sim(400, perturb=0.05)
    vtheta2 = r_stat.config.frame.v * r_stat.config.frame.theta**2
    bal_stat, _ = energy_balance_report(r_stat.ledger, r_stat.config.frame)
    bal_pert, _ = energy_balance_report(r_pert.ledger, r_pert.config.frame)
    d_err = float(np.max(np.abs(r_stat.ledger.dissipation - 0.5 * vtheta2)))
    mass_drift = max(
        float(np.max(np.abs(r.ledger.mass - r.ledger.mass[0])) / r.ledger.mass[0])
        for r in (r_stat, r_pert)
    )
    measured = {
        "balance_residual_stationary": bal_stat,
        "balance_residual_perturbed": bal_pert,
        "dissipation_max_abs_err": d_err,
        "dissipation_target": 0.5 * vtheta2,
        "mass_rel_drift": mass_drift,
    }
    passed = (
        bal_stat <= 0.01
        and bal_pert <= 0.01
        and d_err <= 0.02 * 0.5 * vtheta2
        and mass_drift <= 1e-10
    )
    return Check(
        id="AC8_energy_identity",
        description="balance residual <= 1%; stationary dissipation = v theta^2/2 +- 2%; mass exact",
        measured=measured,
        expected="balance <= 1e-2 (both runs); |D - 0.5| <= 1e-2; mass drift <= 1e-10",
        passed=bool(passed),
    )


def check_theorem3(ctx: ValidationContext) -> Check:
    """AC9: first error-bound branch holds; second branch's expected failure recorded."""
    r_stat = ctx.sim(400)
    r_pert = ctx.sim(400, perturb=0.05)
    bound = r_stat.report.first_bound
    bound_ok = abs(bound - math.sqrt(6.0) / 6.0 * math.sqrt(0.5)) <= 1e-12
    first_ok = r_stat.report.first_all_satisfied and r_pert.report.first_all_satisfied
    early_ok = all(r.second_satisfied for r in r_stat.report.rows if r.t <= 0.0415)
    late_fail = [r for r in r_stat.report.rows if r.t >= 0.0425]
    late_recorded = len(late_fail) > 0 and all(not r.second_satisfied for r in late_fail)
    measured = {
        "first_bound": bound,
        "max_sup_error_stationary": max(r.sup_error for r in r_stat.report.rows),
        "max_sup_error_perturbed": max(r.sup_error for r in r_pert.report.rows),
        "second_branch_failure_times": [r.t for r in r_stat.report.rows if not r.second_satisfied][:3],
    }
    passed = bound_ok and first_ok and early_ok and late_recorded
    return Check(
        id="AC9_theorem3_bounds",
        description="sup|f - wave| <= (sqrt6/6) theta sqrt(w) always; second branch fails after t ~ 0.042",
        measured=measured,
        expected="first branch holds for wave and perturbed runs; second-branch failure recorded for t > 0.042",
        passed=bool(passed),
    )


def _determinism_payload():
    """Canonical bytes of a fresh fast re-run (greens checks + profile + bounds)."""
    ctx = ValidationContext()
    checks = [
        check_kernel_identities(ctx),
        check_representation_oracle(ctx),
        check_envelope(ctx),
        check_edge_asymptotics(ctx),
        check_functionals(ctx),
    ]
    payload = [c.as_dict(with_timing=False) for c in checks]
    return json.dumps(payload, sort_keys=True).encode()


def check_determinism(ctx=None) -> Check:
    """AC10: identical manifests give byte-identical reports (timings aside)."""
    first = _determinism_payload()
    second = _determinism_payload()
    identical = first == second
    return Check(
        id="AC10_determinism",
        description="re-running the suite reproduces the report byte-for-byte (modulo timings)",
        measured={"payload_bytes": len(first), "identical": identical},
        expected="two fresh runs serialize identically",
        passed=bool(identical),
    )


def greens_selftest():
    """Kernel invariants plus the representation oracle, as check records.

    Covers branch continuity on the diagonal, the -2d curvature jump
    across eta = t, nonnegativity, the closed-form/quadrature identity,
    and the empirical bound constants.  The scanned ratio G/(t^2 (d-t))
    is *not* refinement-stable: G vanishes only linearly at t = 0 when
    d = 1/2 (dG/dt = 2 d eta (1 - 2 eta) there), so the printed
    quadratic weight makes that sup grow like the scan resolution; the
    check asserts the stable derivative ratio and records the measured
    divergence of the value ratio.
    """
    checks = [check_kernel_identities(), check_representation_oracle()]

    eta = np.linspace(0.0, D, 501)
    base = 2.0 * (eta - D) ** 2 * eta**2
    other = base - D * (eta - eta) ** 2
    branch_gap = float(np.max(np.abs(base - other)))
    ee, tt = np.meshgrid(eta, eta[1:-1], indexing="ij")
    nonneg = float(np.min(greens.kernel_eval(ee, tt)))
    checks.append(
        Check(
            id="G_branch_continuity",
            description="kernel branches agree exactly at eta = t; kernel nonnegative",
            measured={"branch_gap": branch_gap, "min_value": nonneg},
            expected="gap == 0; min >= 0",
            passed=bool(branch_gap == 0.0 and nonneg >= 0.0),
        )
    )

    # one-sided second differences around eta = t are exact on the
    # piecewise-quadratic kernel, so the jump estimate is exact too
    t0, h = 0.3, 1e-4
    right = (
        greens.kernel_eval(t0 + 2 * h, t0)
        - 2.0 * greens.kernel_eval(t0 + h, t0)
        + greens.kernel_eval(t0, t0)
    ) / h**2
    left = (
        greens.kernel_eval(t0, t0)
        - 2.0 * greens.kernel_eval(t0 - h, t0)
        + greens.kernel_eval(t0 - 2 * h, t0)
    ) / h**2
    jump = right - left
    checks.append(
        Check(
            id="G_second_derivative_jump",
            description="curvature jump across eta = t equals -2d = -1",
            measured={"jump_estimate": float(jump)},
            expected="|jump + 1| <= 1e-6",
            passed=bool(abs(jump + 1.0) <= 1e-6),
        )
    )

    scan1 = greens.kernel_bound_scan(1001)
    scan2 = greens.kernel_bound_scan(2001)
    deriv_stable = abs(scan1.c_deriv - scan2.c_deriv) <= 1e-3
    value_ratio = scan2.c_value / scan1.c_value
    checks.append(
        Check(
            id="G_bound_constants",
            description="derivative bound constant is refinement-stable; value ratio diverges ~1/t",
            measured={
                "c_deriv": scan2.c_deriv,
                "c_deriv_change": abs(scan1.c_deriv - scan2.c_deriv),
                "c_value_at_1001": scan1.c_value,
                "c_value_growth_per_doubling": value_ratio,
            },
            expected="c_deriv change <= 1e-3; c_value >= 0.5 (witness) and grows ~2x per doubling",
            passed=bool(deriv_stable and scan1.c_value >= 0.5),
        )
    )
    return checks


FAST_CHECKS = (
    check_kernel_identities,
    check_representation_oracle,
    check_profile_agreement,
    check_envelope,
    check_edge_asymptotics,
    check_functionals,
)
SIM_CHECKS = (
    check_stationarity,
    check_energy_identity,
    check_theorem3,
)


def run_validation(fast=False, ctx=None) -> ValidationReport:
    """Run the acceptance suite; ``fast`` skips the PDE simulation checks."""
    ctx = ctx or ValidationContext()
    checks = []
    for func in FAST_CHECKS:
        checks.append(_timed(lambda f=func: f(ctx)))
    if not fast:
        for func in SIM_CHECKS:
            checks.append(_timed(lambda f=func: f(ctx)))
    checks.append(_timed(lambda: check_determinism(ctx)))
    return ValidationReport(checks=checks, fast=fast)
