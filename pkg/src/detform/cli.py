"""Command-line driver for the determining-form experiments.

Every run writes into ``--out`` (default ``results/``). The orbit is produced
once by ``orbit`` and reused by every later subcommand.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import experiments as ex
from .config import ExperimentConfig, load_config
from .determining import (OdeVariant, PhiTable, RateFitError, build_phi_table, default_tau_end,
                          fit_rate, integrate_param_ode, limit_kind, write_rate_fits)
from .io import (meta_path, read_trajectory, write_columns, write_metadata,
                 write_nudging_diagnostics, write_trajectory)
from .nse import OrbitResult, ReferenceProblem, SolverError, generate_orbit
from .secant import StagnationError, secant_solve
from .spectral import l2_norm, nonlinear_term

log = logging.getLogger("detform")

EXIT_OK, EXIT_INVARIANT, EXIT_USAGE, EXIT_FAILED = 0, 1, 2, 3
CASES = ("perturbed", "collinear")
VARIANTS = {"theta2": OdeVariant.THETA_SQUARED, "theta1": OdeVariant.THETA_LINEAR, "eta": OdeVariant.ETA}


class CommandError(RuntimeError):
    pass


def _problem(cfg: ExperimentConfig) -> ReferenceProblem:
    return ReferenceProblem.paper(cfg.solver.grid, nu=cfg.nu)


def _orbit_paths(out: Path) -> tuple[Path, Path]:
    return out / "orbit.snap", out / "orbit_projected.snap"


def load_orbit(cfg: ExperimentConfig) -> OrbitResult:
    full_p, proj_p = _orbit_paths(cfg.output_dir)
    if not full_p.exists() or not proj_p.exists():
        raise CommandError(f"no orbit in {cfg.output_dir}; run the 'orbit' subcommand first")
    traj, proj = read_trajectory(full_p), read_trajectory(proj_p)
    m = traj.metadata
    for key in ("n_modes", "dt", "nu", "spin_up"):
        if key in m and not np.isclose(m[key], getattr(cfg, key)):
            raise CommandError(f"stored orbit has {key} = {m[key]}, config has {getattr(cfg, key)}")
    return OrbitResult(traj, proj, traj.frame(len(traj) - 1), bool(m.get("degenerate", False)),
                       m.get("period"), float(m.get("recurrence_error", np.nan)), m)


def cmd_steady_check(cfg: ExperimentConfig, args) -> int:
    prob = _problem(cfg)
    res = ex.steady_check(prob, cfg.solver, args.steps)
    nl = float(l2_norm(prob.grid, nonlinear_term(prob.omega_star).coeffs) / l2_norm(prob.grid, prob.omega_star.coeffs))
    report = {"scale": cfg.scale, "steps": res.steps, "max_drift": res.max_drift,
              "final_drift": res.final_drift, "first_step_drift": res.first_step_drift,
              "nonlinear_ratio": nl, "tolerance": args.tol, "wall_time": res.wall_time,
              "passed": res.ok(args.tol) and nl < 1e-12}
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    write_metadata(cfg.output_dir / "steady_check.txt", report)
    print(f"steady drift over {res.steps} steps: max {res.max_drift:.3e}, "
          f"first step {res.first_step_drift:.3e}; |B(w*,w*)|/|w*| = {nl:.3e}")
    if not report["passed"]:
        print(f"INVARIANT VIOLATED: drift must stay below {args.tol:g}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_orbit(cfg: ExperimentConfig, args) -> int:
    prob = _problem(cfg)
    orbit = generate_orbit(prob, cfg.solver, spin_up=cfg.spin_up, window=cfg.orbit_window,
                           stride=cfg.orbit_stride, projector=cfg.nudging.projector)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    extra = {"scale": cfg.scale, **orbit.metadata}
    full_p, proj_p = _orbit_paths(cfg.output_dir)
    write_trajectory(full_p, orbit.trajectory, extra)
    write_trajectory(proj_p, orbit.projected, extra)
    print(f"orbit: {len(orbit.trajectory)} frames, recurrence error {orbit.recurrence_error:.3g}, "
          f"degenerate {orbit.degenerate}, cfl_max {orbit.metadata['cfl_max']:.3g}")
    if orbit.degenerate:
        print("orbit collapsed to a steady state; pick a different initial condition", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_assimilate(cfg: ExperimentConfig, args) -> int:
    orbit = load_orbit(cfg)
    rep = ex.assimilate(orbit, _problem(cfg), cfg.nudging, s_end=args.s_end)
    d = cfg.output_dir / "assimilation"
    d.mkdir(parents=True, exist_ok=True)
    sol = rep.solution
    write_nudging_diagnostics(d / "nudging_diagnostics.csv", sol.s, sol.misfit, sol.w_l2)
    write_columns(d / "error.csv", ["s", "relative_error"], sol.error_times, sol.error)
    write_metadata(d / "report.txt", {"scale": cfg.scale, "mu": cfg.mu, "decades": rep.decades,
                                      "slope": rep.slope, "r_squared": rep.r_squared,
                                      "fit_window": list(rep.fit_window), **sol.metadata})
    print(f"assimilation: {rep.decades:.2f} decades, slope {rep.slope:.3g}/unit s, R^2 {rep.r_squared:.4f}")
    return EXIT_OK


def _pair(cfg: ExperimentConfig, case: str):
    orbit = load_orbit(cfg)
    prob = _problem(cfg)
    if case == "collinear":
        return ex.collinear_pair(orbit, prob, cfg.nudging), prob
    return ex.perturbed_pair(orbit, prob, cfg.nudging, amplitude=cfg.perturbation), prob


def cmd_sample_phi(cfg: ExperimentConfig, args) -> int:
    pair, prob = _pair(cfg, args.case)
    table = build_phi_table(pair, prob, cfg.nudging, n_samples=cfg.theta_samples,
                            refine_count=cfg.refine_count, workers=cfg.workers,
                            batch_size=cfg.batch_size)
    d = cfg.output_dir / args.case
    d.mkdir(parents=True, exist_ok=True)
    table.to_csv(d / "phi_table.csv")
    write_metadata(meta_path(d / "phi_table.csv"),
                   {"scale": cfg.scale, "case": args.case, "mu": cfg.mu, "samples": len(table),
                    "floor": table.floor, "limit": table.limit()})
    print(f"{args.case}: {len(table)} samples, floor {table.floor:.3g}, limit theta = {table.limit():.6g}")
    return EXIT_OK


def cmd_run_param(cfg: ExperimentConfig, args) -> int:
    variant = VARIANTS[args.variant]
    cases = CASES if args.case == "both" else (args.case,)
    for case in cases:
        p = cfg.output_dir / case / "phi_table.csv"
        if not p.exists():
            raise CommandError(f"missing {p}; run 'sample-phi {case}' first")
        table = PhiTable.from_csv(p)
        kind = limit_kind(table)
        tau_end = cfg.tau_end or default_tau_end(table, variant)
        path = integrate_param_ode(table, variant, tau_end)
        d = cfg.output_dir / case / args.variant
        d.mkdir(parents=True, exist_ok=True)
        path.to_csv(d / "param_path.csv")
        try:
            fit = fit_rate(path, kind)
        except RateFitError as e:
            print(f"{case}/{args.variant}: rate fit refused: {e}", file=sys.stderr)
            return EXIT_FAILED
        write_rate_fits([fit], d / "rate_fit.csv")
        print(f"{case}/{args.variant}: limit {path.theta_bar_estimate:.10g}, tau_end {tau_end:.4g}, "
              f"exponent {fit.exponent:.4f} (R^2 {fit.r_squared:.5f})")
    return EXIT_OK


def cmd_secant(cfg: ExperimentConfig, args) -> int:
    pair, prob = _pair(cfg, args.case)
    d = cfg.output_dir / "secant"
    d.mkdir(parents=True, exist_ok=True)
    try:
        trace = secant_solve(pair, args.eta0, args.eta1, cfg.secant_tol, cfg.secant_max_iter,
                             prob, cfg.nudging)
    except StagnationError as e:
        e.trace.to_csv(d / "secant_trace.csv")
        print(f"secant stagnated: {e}", file=sys.stderr)
        return EXIT_FAILED
    trace.to_csv(d / "secant_trace.csv")
    for i, eta, r in trace.rows:
        print(f"{i:3d}  {eta:.17g}  {r:.6e}")
    if not trace.converged:
        print(f"secant did not reach {cfg.secant_tol:g} in {cfg.secant_max_iter} evaluations",
              file=sys.stderr)
        return EXIT_INVARIANT
    print(f"eta_bar = {trace.eta_bar:.17g}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scale", choices=("desk", "paper"), help="solver preset (default desk)")
    common.add_argument("--config", type=Path, help="key = value configuration file")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--workers", type=int, help="parallel processes for Phi sampling")
    common.add_argument("--tau-end", type=float, help="parameter-ODE horizon")
    common.add_argument("--theta-samples", type=int, help="uniform theta samples before refinement")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any configuration key")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="detform", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    s = sub.add_parser("steady-check", parents=[common], help="drift of the exact steady state")
    s.add_argument("--steps", type=int, default=10_000)
    s.add_argument("--tol", type=float, default=1e-10)
    s.set_defaults(func=cmd_steady_check)
    s = sub.add_parser("orbit", parents=[common], help="spin up and store the reference trajectory")
    s.set_defaults(func=cmd_orbit)
    s = sub.add_parser("assimilate", parents=[common], help="nudging synchronization run")
    s.add_argument("--s-end", type=float, default=1.0)
    s.set_defaults(func=cmd_assimilate)
    s = sub.add_parser("sample-phi", parents=[common], help="tabulate the residual along a segment")
    s.add_argument("case", choices=CASES)
    s.set_defaults(func=cmd_sample_phi)
    s = sub.add_parser("run-param", parents=[common], help="integrate a parameter ODE")
    s.add_argument("variant", choices=sorted(VARIANTS))
    s.add_argument("--case", choices=CASES + ("both",), default="both")
    s.set_defaults(func=cmd_run_param)
    s = sub.add_parser("secant", parents=[common], help="secant search for a zero of the residual")
    s.add_argument("--case", choices=CASES, default="collinear")
    s.add_argument("--eta0", type=float, default=1.0)
    s.add_argument("--eta1", type=float, default=0.98)
    s.set_defaults(func=cmd_secant)
    return p


def _config_from_args(args) -> ExperimentConfig:
    overrides = {}
    for item in args.set:
        k, sep, v = item.partition("=")
        if not sep:
            raise CommandError(f"--set expects KEY=VALUE, got {item!r}")
        overrides[k.strip().replace("-", "_")] = v.strip()
    for key in ("out", "workers", "tau_end", "theta_samples"):
        val = getattr(args, key)
        if val is not None:
            overrides["output_dir" if key == "out" else key] = val
    return load_config(args.scale, args.config, overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config_from_args(args)
        return args.func(cfg, args)
    except (CommandError, KeyError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverError, StagnationError, RateFitError) as e:
        print(f"failed: {e}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
