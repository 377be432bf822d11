import math

import numpy as np
import pytest
from scipy.integrate import quad

from ridgewave.bounds import (
    A_LOWER,
    A_UPPER,
    COROLLARY_COEFFS_AS_PRINTED,
    COROLLARY_COEFFS_CORRECTED,
    EDGE_COEFFICIENT,
    Envelope,
    PhysicalFrame,
    comparison_residual_poly,
    edge_coefficient,
    envelope_check,
    envelope_eval,
    envelope_mass_exact,
    envelope_profile,
    envelope_slope_norm_exact,
    lemma_gate,
    mass_and_slope_stats,
    physical_envelope,
)
from ridgewave.grids import Grid, Profile

D = 0.5


def test_envelope_coefficients_and_gates():
    env = Envelope()
    g_lower, g_upper = env.gate_values()
    assert g_lower == pytest.approx(8.0 / 9.0, abs=1e-15)
    assert g_upper == pytest.approx(8.0 / 3.0, abs=1e-15)
    assert A_LOWER < A_UPPER


def test_envelope_eval_examples():
    assert envelope_eval(0.0) == (0.0, 0.0)
    lo, hi = envelope_eval(0.2)
    assert lo == pytest.approx(0.0619677, abs=1e-7)
    assert hi == pytest.approx(0.1073313, abs=1e-7)
    assert envelope_eval(0.5) == (0.0, 0.0)
    with pytest.raises(ValueError):
        envelope_eval(0.7)


def test_envelope_ordering_strict_inside():
    eta = np.linspace(0.0, D, 501)
    lo, hi = envelope_eval(eta)
    assert np.all(lo <= hi)
    assert np.all(lo[1:-1] < hi[1:-1])


def test_envelope_check_on_reference(reference_profile):
    report = envelope_check(reference_profile)
    assert report.passed
    assert report.min_lower_margin >= -1e-8
    assert report.min_upper_margin >= -1e-8


def test_envelope_check_on_envelope_itself():
    grid = Grid.uniform(801)
    p_max = envelope_profile(grid, "max")
    report = envelope_check(p_max)
    assert report.min_upper_margin == pytest.approx(0.0, abs=1e-15)
    assert report.min_lower_margin >= 0.0
    assert report.passed


def test_envelope_check_flags_violation():
    grid = Grid.uniform(801)
    p = envelope_profile(grid, "max")
    inflated = Profile(grid=grid, phi=1.01 * p.phi, dphi=p.dphi, method="envelope-max")
    report = envelope_check(inflated)
    assert not report.upper_ok
    assert report.min_upper_margin < 0.0
    assert 0.0 < report.argmin_upper < D


def test_comparison_polynomial_value_and_sign():
    # f(0) = -A0^2 d^3 / 2 at A0 = 1
    assert comparison_residual_poly(0.0, 1.0) == pytest.approx(-0.0625, abs=1e-15)
    eta = np.linspace(0.0, D, 401)
    for a0 in (0.5, 1.0, 2.0, 3.5):
        assert np.max(comparison_residual_poly(eta, a0)) <= 1e-12


def test_comparison_polynomial_is_first_integral_residual():
    # phi0 * phi0'' - (phi0')^2 / 2 equals f(eta) analytically
    a0 = 1.7
    eta = np.linspace(1e-3, D - 1e-3, 301)
    s = D - eta
    phi = a0 * eta * s**1.5
    dphi = a0 * np.sqrt(s) * (D - 2.5 * eta)
    d2phi = -0.75 * a0 * (4.0 * D - 5.0 * eta) / np.sqrt(s)
    resid = phi * d2phi - 0.5 * dphi**2
    assert np.max(np.abs(resid - comparison_residual_poly(eta, a0))) <= 1e-12


def test_lemma_gate_classifications():
    assert lemma_gate(2.0).classification == "supersolution-only"
    assert lemma_gate(A_LOWER).classification == "lower-certified"
    assert lemma_gate(2.8).classification == "none"
    assert lemma_gate(A_UPPER).classification == "upper-certified"
    with pytest.raises(ValueError):
        lemma_gate(-1.0)


def test_lemma_gate_scan_agreement_random():
    rng = np.random.default_rng(42)
    thresholds = np.sqrt(np.array([8.0 / 9.0, 5.0 / 3.0, 8.0 / 3.0])) / D
    count = 0
    while count < 100:
        a0 = 10.0 ** rng.uniform(-1.0, 1.0)
        if np.min(np.abs(a0 - thresholds)) < 1e-3:
            continue  # stay off the exact gate boundaries
        res = lemma_gate(a0)
        assert res.scan_agrees, f"scan mismatch at a0={a0}"
        assert res.scan_nonpositive
        count += 1


def test_edge_coefficient_exact_on_envelopes():
    grid = Grid.uniform(2561)
    fit_max = edge_coefficient(envelope_profile(grid, "max"))
    fit_min = edge_coefficient(envelope_profile(grid, "min"))
    assert fit_max.estimate == pytest.approx(A_UPPER * D, abs=1e-9)
    assert fit_min.estimate == pytest.approx(A_LOWER * D, abs=1e-9)
    assert fit_max.estimate == pytest.approx(1.632993, abs=1e-6)
    assert fit_min.estimate == pytest.approx(0.942809, abs=1e-6)


def test_edge_coefficient_on_reference(reference_profile):
    fit = edge_coefficient(reference_profile)
    assert fit.estimate == pytest.approx(EDGE_COEFFICIENT, abs=0.01)
    assert A_LOWER * D <= fit.estimate <= A_UPPER * D + 1e-9


def test_edge_coefficient_needs_enough_nodes():
    grid = Grid.uniform(101)  # spacing 5e-3: only two nodes inside the window
    p = envelope_profile(grid, "max")
    with pytest.raises(ValueError, match="usable nodes"):
        edge_coefficient(p)


def test_envelope_mass_closed_forms():
    assert envelope_mass_exact(A_LOWER) == pytest.approx(2.0 / 105.0, abs=1e-15)
    assert envelope_mass_exact(A_UPPER) == pytest.approx(2.0 * math.sqrt(3.0) / 105.0, abs=1e-15)
    for a in (A_LOWER, A_UPPER):
        ref = quad(lambda e: a * e * (D - e) ** 1.5, 0.0, D, epsabs=1e-14)[0]
        assert envelope_mass_exact(a) == pytest.approx(ref, abs=1e-12)


def test_envelope_slope_norm_closed_forms():
    assert envelope_slope_norm_exact(A_LOWER) == pytest.approx(1.0 / 24.0, abs=1e-12)
    assert envelope_slope_norm_exact(A_UPPER) == pytest.approx(0.125, abs=1e-12)
    for a, target in ((A_LOWER, 1.0 / 24.0), (A_UPPER, 0.125)):
        ref = quad(lambda e: (a * math.sqrt(D - e) * (D - 2.5 * e)) ** 2, 0.0, D, epsabs=1e-14)[0]
        assert ref == pytest.approx(target, abs=1e-12)


def test_mass_and_slope_stats_reference(reference_profile):
    stats = mass_and_slope_stats(reference_profile)
    assert stats.mass_in_interval
    assert 2.0 / 105.0 <= stats.mass <= 2.0 * math.sqrt(3.0) / 105.0
    assert stats.mass_err <= 1e-6
    # the true slope norm d^2/3 = 1/12 exceeds the recorded 1/24 threshold
    assert stats.slope_norm == pytest.approx(1.0 / 12.0, abs=1e-5)
    assert not stats.slope_within_threshold


def test_physical_frame_consistency():
    frame = PhysicalFrame(v=1.0, theta=2.0)
    assert frame.w == pytest.approx(2.0)
    assert frame.s1(0.3) == pytest.approx(0.3)
    assert frame.s2(0.3) == pytest.approx(2.3)
    with pytest.raises(ValueError):
        PhysicalFrame(v=1.0, theta=1.0, w=0.7)
    with pytest.raises(ValueError):
        PhysicalFrame(v=-1.0)


def test_physical_envelope_identity_frame():
    frame = PhysicalFrame()
    eta = np.linspace(0.0, D, 501)
    lo_ref, hi_ref = envelope_eval(eta)
    lo, hi = physical_envelope(eta, 0.0, frame)
    assert np.max(np.abs(lo - lo_ref)) <= 1e-12
    assert np.max(np.abs(hi - hi_ref)) <= 1e-12


def test_physical_envelope_examples():
    frame = PhysicalFrame()
    assert physical_envelope(0.0, 0.0, frame) == (0.0, 0.0)
    lo, hi = physical_envelope(0.2, 0.0, frame)
    assert lo == pytest.approx(0.0619677, abs=1e-7)
    assert hi == pytest.approx(0.1073313, abs=1e-7)
    with pytest.raises(ValueError):
        physical_envelope(0.7, 0.0, frame)


def test_corollary_coefficients():
    # corrected pair is the printed pair times d; the corrected upper
    # coefficient is exactly the touchdown constant
    assert COROLLARY_COEFFS_CORRECTED[0] == pytest.approx(COROLLARY_COEFFS_AS_PRINTED[0] * D)
    assert COROLLARY_COEFFS_CORRECTED[1] == pytest.approx(COROLLARY_COEFFS_AS_PRINTED[1] * D)
    assert COROLLARY_COEFFS_CORRECTED[1] == pytest.approx(EDGE_COEFFICIENT, abs=1e-15)
    assert EDGE_COEFFICIENT == pytest.approx(1.632993, abs=1e-6)


def test_physical_envelope_moving_frame():
    frame = PhysicalFrame(v=2.0, theta=1.0)
    t = 0.1
    s1, s2 = frame.s1(t), frame.s2(t)
    x = 0.5 * (s1 + s2)
    lo, hi = physical_envelope(x, t, frame)
    assert 0.0 < lo < hi
    assert physical_envelope(s1, t, frame) == (0.0, 0.0)
