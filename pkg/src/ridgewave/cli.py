"""Command-line front end: subcommand dispatch and deterministic file output.

Exit codes: 0 success, 1 failed validation checks, 2 bad input.  All
numeric output is formatted with 17 significant digits so identical
manifests give byte-identical files; every JSON report embeds the
manifest that produced it.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from . import __version__
from . import bounds as bd
from .grids import Grid, Profile
from .profile_solver import (
    KernelSolveConfig,
    ShootConfig,
    pairwise_sup_distance,
    profile_diagnostics,
    solve_collocation,
    solve_kernel_iteration,
    solve_shooting,
)
from .simulator import SimConfig, run_simulation
from .validation import greens_selftest, run_validation

FLOAT_FMT = "%.17g"
PROFILE_HEADER = "eta,phi,dphi,residual_ode3,residual_first_integral"
LEDGER_HEADER = "t,mass,energy,dissipation,boundary_term,balance_residual,sup_error_vs_wave,slope_at_w"

SIM_KEYS = {
    "n": 400,
    "w": None,
    "v": 1.0,
    "theta": 1.0,
    "eps": 1e-6,
    "dt0": 1e-6,
    "t_end": 0.05,
    "output_every": 1e-3,
    "perturb_amp": 0.0,
    "perturb_mode": 1,
}


class InputError(Exception):
    """Bad configuration or missing input; maps to exit code 2."""


@dataclass
class RunManifest:
    """Resolved invocation record embedded in every JSON output."""

    subcommand: str
    config: dict
    inputs: list = field(default_factory=list)
    outputs: list = field(default_factory=list)
    version: str = __version__
    warnings: list = field(default_factory=list)

    @property
    def digest(self):
        payload = json.dumps(self.config, sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()

    def as_dict(self):
        return {
            "subcommand": self.subcommand,
            "config": self.config,
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "version": self.version,
            "digest": self.digest,
            "warnings": list(self.warnings),
        }


def _fmt(x):
    if isinstance(x, float) and (math.isnan(x) or math.isinf(x)):
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    return FLOAT_FMT % x


def write_json(path, payload, manifest: RunManifest):
    doc = dict(payload)
    doc["manifest"] = manifest.as_dict()
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


def write_profile_csv(path, profile: Profile):
    from .profile_solver import first_integral_residual

    n = profile.grid.n
    res3 = profile.res_ode3 if profile.res_ode3 is not None else np.full(n, np.nan)
    fi = first_integral_residual(profile)
    lines = [PROFILE_HEADER]
    for i in range(n):
        lines.append(
            ",".join(
                _fmt(val)
                for val in (profile.eta[i], profile.phi[i], profile.dphi[i], res3[i], fi[i])
            )
        )
    Path(path).write_text("\n".join(lines) + "\n")


def read_profile_csv(path) -> Profile:
    path = Path(path)
    if not path.exists():
        raise InputError(f"profile file not found: {path}")
    rows = path.read_text().strip().splitlines()
    if not rows or rows[0].strip() != PROFILE_HEADER:
        raise InputError(f"unexpected profile CSV header in {path}")
    data = np.array([[float(x) for x in line.split(",")] for line in rows[1:]])
    if data.shape[0] < 101:
        raise InputError("profile CSV needs at least 101 rows")
    grid = Grid(data[:, 0], kind="file")
    return Profile(
        grid=grid,
        phi=data[:, 1],
        dphi=data[:, 2],
        method="file",
        res_ode3=data[:, 3],
    )


def parse_sim_config(path) -> tuple[SimConfig, RunManifest]:
    """Strict TOML parsing for the simulate subcommand."""
    path = Path(path)
    if not path.exists():
        raise InputError(f"config file not found: {path}")
    try:
        raw = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise InputError(f"malformed TOML in {path}: {exc}") from exc
    unknown_tables = set(raw) - {"sim"}
    if unknown_tables:
        raise InputError(f"unknown config table(s): {sorted(unknown_tables)}")
    sim = raw.get("sim", {})
    unknown = set(sim) - set(SIM_KEYS)
    if unknown:
        raise InputError(f"unknown [sim] key(s): {sorted(unknown)}")
    resolved = dict(SIM_KEYS)
    resolved.update(sim)
    warnings = []

    d = bd.D_DEFAULT
    theta = float(resolved["theta"])
    v = float(resolved["v"])
    if theta <= 0 or v <= 0:
        raise InputError("theta and v must be positive")
    w_derived = theta**2 * d / v
    if resolved["w"] is None:
        resolved["w"] = w_derived
    else:
        w = float(resolved["w"])
        if abs(w - w_derived) > 1e-9 * w_derived:
            if "theta" in sim or "v" in sim:
                raise InputError(
                    f"contradictory frame: w={w} but theta^2 d / v = {w_derived}"
                )
            v = theta**2 * d / w
            resolved["v"] = v
            warnings.append(f"v adjusted to {v!r} for consistency with w = theta^2 d / v")

    frame = bd.PhysicalFrame(v=float(resolved["v"]), theta=theta, w=float(resolved["w"]))
    config = SimConfig(
        frame=frame,
        n=int(resolved["n"]),
        eps=float(resolved["eps"]),
        dt0=float(resolved["dt0"]),
        t_end=float(resolved["t_end"]),
        output_every=float(resolved["output_every"]),
        perturb_amp=float(resolved["perturb_amp"]),
        perturb_mode=int(resolved["perturb_mode"]),
    )
    manifest = RunManifest(
        subcommand="simulate",
        config={k: resolved[k] for k in sorted(resolved)},
        inputs=[str(path)],
        warnings=warnings,
    )
    return config, manifest


# ---------------------------------------------------------------------------
# subcommand runners


def run_greens(args) -> int:
    checks = greens_selftest()
    manifest = RunManifest(
        subcommand="greens",
        config={"selftest": True},
    )
    payload = {
        "overall_pass": all(c.passed for c in checks),
        "checks": [c.as_dict() for c in checks],
    }
    for c in checks:
        print(f"[{c.id}] {'PASS' if c.passed else 'FAIL'}  {c.description}")
    if args.out:
        manifest.outputs = [str(args.out)]
        write_json(args.out, payload, manifest)
    return 0 if payload["overall_pass"] else 1


def _solve_method(method, n, k_max, gamma):
    if method == "kernel":
        decades = max(2, int(round(math.log10(k_max))))
        schedule = tuple(10.0**p for p in range(2, decades + 1))
        result = solve_kernel_iteration(
            KernelSolveConfig(k_schedule=schedule), Grid.uniform(n)
        )
        return result.limit
    if method == "shoot":
        return solve_shooting(ShootConfig(), Grid.uniform(n)).profile
    if method == "collocate":
        return solve_collocation(Grid.graded(n, gamma))
    raise InputError(f"unknown method {method!r}")


def run_profile(args) -> int:
    methods = ["kernel", "shoot", "collocate"] if args.method == "all" else [args.method]
    manifest = RunManifest(
        subcommand="profile",
        config={
            "method": args.method,
            "n": args.n,
            "k_max": args.k_max,
            "gamma": args.gamma,
        },
    )
    out = Path(args.out)
    produced = {}
    for method in methods:
        profile = _solve_method(method, args.n, args.k_max, args.gamma)
        target = out if len(methods) == 1 else out.with_name(f"{out.stem}_{method}{out.suffix}")
        write_profile_csv(target, profile)
        manifest.outputs.append(str(target))
        produced[method] = profile
        print(f"wrote {target} ({profile.grid.n} rows, method={method})")
    if len(produced) > 1:
        names = list(produced)
        for i, a in enumerate(names):
            for b in names[i + 1 :]:
                print(f"sup|{a} - {b}| on [0.01, 0.49] = "
                      f"{pairwise_sup_distance(produced[a], produced[b]):.3e}")
    return 0


def run_bounds(args) -> int:
    profile = read_profile_csv(args.profile)
    manifest = RunManifest(
        subcommand="bounds",
        config={"profile": str(args.profile)},
        inputs=[str(args.profile)],
    )
    env = bd.envelope_check(profile)
    stats = bd.mass_and_slope_stats(profile)
    dg = profile_diagnostics(profile)
    try:
        edge = bd.edge_coefficient(profile).as_dict()
    except ValueError as exc:
        edge = {"error": str(exc)}
    payload = {
        "envelope": env.as_dict(),
        "edge_coefficient": edge,
        "mass": stats.as_dict()["mass"],
        "mass_err": stats.mass_err,
        "slope_norm": stats.as_dict()["slope_norm"],
        "diagnostics": dg.as_dict(),
        "corollary": {
            "corrected_coeffs": list(bd.COROLLARY_COEFFS_CORRECTED),
            "as_printed_coeffs": list(bd.COROLLARY_COEFFS_AS_PRINTED),
        },
    }
    if args.out:
        manifest.outputs = [str(args.out)]
        write_json(args.out, payload, manifest)
    print(f"envelope pass: {env.passed}  mass: {stats.mass:.8f}  "
          f"edge: {edge.get('estimate', 'n/a')}")
    return 0


def run_simulate(args) -> int:
    config, manifest = parse_sim_config(args.config)
    outdir = Path(args.outdir)
    try:
        outdir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise InputError(f"cannot create output directory {outdir}: {exc}") from exc

    profile = solve_shooting(ShootConfig(), Grid.uniform(config.n + 1)).profile
    result = run_simulation(config, profile)

    for idx, snap in enumerate(result.snapshots):
        lines = ["xi,f"]
        xi = config.xi
        for j in range(len(xi)):
            lines.append(f"{_fmt(xi[j])},{_fmt(snap.f[j])}")
        (outdir / f"snapshot_{idx:04d}.csv").write_text("\n".join(lines) + "\n")
    led_lines = [LEDGER_HEADER]
    for row in result.ledger.rows():
        led_lines.append(",".join(_fmt(x) for x in row))
    (outdir / "ledger.csv").write_text("\n".join(led_lines) + "\n")

    summary = {
        "steps": result.steps,
        "theorem3": result.report.as_dict(),
        "final_sup_error_vs_wave": float(result.ledger.sup_error_vs_wave[-1]),
        "max_balance_residual": float(np.nanmax(result.ledger.balance_residual)),
        "mass_rel_drift": float(
            np.max(np.abs(result.ledger.mass - result.ledger.mass[0])) / result.ledger.mass[0]
        ),
    }
    manifest.outputs = [str(outdir / "ledger.csv"), str(outdir / "summary.json")]
    write_json(outdir / "summary.json", summary, manifest)
    print(f"simulated {result.steps} steps to t={config.t_end}; outputs in {outdir}")
    return 0


def run_validate(args) -> int:
    report = run_validation(fast=args.fast)
    manifest = RunManifest(
        subcommand="validate",
        config={"fast": bool(args.fast)},
    )
    for line in report.summary_lines():
        print(line)
    print(f"overall: {'PASS' if report.passed else 'FAIL'}")
    if args.out:
        manifest.outputs = [str(args.out)]
        write_json(args.out, report.as_dict(), manifest)
    return 0 if report.passed else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ridgewave",
        description="Traveling-wave laboratory for the Navier-slip thin-film ridge",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p_greens = sub.add_parser("greens", help="kernel self-test and sign oracle")
    p_greens.add_argument("--selftest", action="store_true", required=True)
    p_greens.add_argument("--out", type=Path, default=None)
    p_greens.set_defaults(func=run_greens)

    p_prof = sub.add_parser("profile", help="compute the wave profile")
    p_prof.add_argument("--method", choices=("kernel", "shoot", "collocate", "all"),
                        default="all")
    p_prof.add_argument("--n", type=int, default=2001, help="number of grid nodes")
    p_prof.add_argument("--k-max", dest="k_max", type=float, default=1e6)
    p_prof.add_argument("--gamma", type=float, default=1.5)
    p_prof.add_argument("--out", type=Path, required=True)
    p_prof.set_defaults(func=run_profile)

    p_bounds = sub.add_parser("bounds", help="certify envelope bounds for a profile CSV")
    p_bounds.add_argument("--profile", type=Path, required=True)
    p_bounds.add_argument("--out", type=Path, default=None)
    p_bounds.set_defaults(func=run_bounds)

    p_sim = sub.add_parser("simulate", help="run the moving-frame PDE simulation")
    p_sim.add_argument("--config", type=Path, required=True)
    p_sim.add_argument("--outdir", type=Path, required=True)
    p_sim.set_defaults(func=run_simulate)

    p_val = sub.add_parser("validate", help="run the acceptance suite")
    p_val.add_argument("--fast", action="store_true")
    p_val.add_argument("--out", type=Path, default=None)
    p_val.set_defaults(func=run_validate)
    return parser


def dispatch(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
