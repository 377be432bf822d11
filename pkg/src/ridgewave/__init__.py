"""ridgewave: numerical laboratory for the traveling dewetting ridge.

Computes the contact-line wave profile of the Navier-slip thin-film
equation by three independent routes, certifies its explicit envelope
bounds and touchdown asymptotics, and validates the moving-frame energy
identity by direct simulation.
"""

__version__ = "0.1.0"

from .bounds import (
    A_LOWER,
    A_UPPER,
    EDGE_COEFFICIENT,
    Envelope,
    PhysicalFrame,
    edge_coefficient,
    envelope_check,
    envelope_eval,
    lemma_gate,
    mass_and_slope_stats,
    physical_envelope,
)
from .greens import (
    GreenKernel,
    KernelBoundReport,
    kernel_bound_scan,
    kernel_deriv_eval,
    kernel_eval,
    kernel_row_integrals,
    representation_check,
)
from .grids import Grid, Profile
from .profile_solver import (
    KernelSolveConfig,
    ShootConfig,
    apply_green_operator,
    initial_iterate,
    profile_diagnostics,
    solve_collocation,
    solve_kernel_iteration,
    solve_shooting,
)
from .simulator import (
    SimConfig,
    SimState,
    advance_step,
    build_initial,
    energy_balance_report,
    mass_of_state,
    run_simulation,
    theorem3_report,
)
from .validation import ValidationContext, ValidationReport, run_validation

__all__ = [
    "A_LOWER",
    "A_UPPER",
    "EDGE_COEFFICIENT",
    "Envelope",
    "GreenKernel",
    "Grid",
    "KernelBoundReport",
    "KernelSolveConfig",
    "PhysicalFrame",
    "Profile",
    "ShootConfig",
    "SimConfig",
    "SimState",
    "ValidationContext",
    "ValidationReport",
    "advance_step",
    "apply_green_operator",
    "build_initial",
    "edge_coefficient",
    "energy_balance_report",
    "envelope_check",
    "envelope_eval",
    "initial_iterate",
    "kernel_bound_scan",
    "kernel_deriv_eval",
    "kernel_eval",
    "kernel_row_integrals",
    "lemma_gate",
    "mass_and_slope_stats",
    "mass_of_state",
    "physical_envelope",
    "profile_diagnostics",
    "representation_check",
    "run_simulation",
    "run_validation",
    "solve_collocation",
    "solve_kernel_iteration",
    "solve_shooting",
    "theorem3_report",
]
