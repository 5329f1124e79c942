#!/usr/bin/env python3
"""
Command-line front end for the dfbsim simulator.

Runs one of the experiment scenarios and reports the bound verdicts.

Commands:
- simulate:      one run, norm series CSV (and snapshots), bound verdicts
- decay-study:   sweep over kappa and M0, per-run CSVs plus a summary table
- blowup-study:  run past the theoretical blow-up time, compare with the envelope
- mms:           observed convergence orders of the discrete operators
- perturb:       growth of the difference between a run and a perturbed twin

Exit codes: 0 all verdicts pass, 1 a verdict failed, 2 usage or configuration
error, 3 numerical failure.
"""

import argparse
import logging
import os
import sys
from typing import Optional, Sequence

# Add this directory to the path to import the dfbsim package
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from dfbsim.analysis import DEFAULT_EPS_TOL, BoundsReport, check_bounds
from dfbsim.config import load_config
from dfbsim.csvio import ensure_directory, write_csv
from dfbsim.exceptions import (
    ConfigException,
    CsvIOException,
    HypothesisViolation,
    InstabilityException,
    LinearSolverException,
    VerificationFailure,
)
from dfbsim.runner import (
    ExperimentSpec,
    blowup_study,
    decay_study,
    mms_convergence,
    perturbation_study,
    run_simulation,
)

EXIT_OK = 0
EXIT_VERDICT = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3

DEFAULT_CONFIG = "dfb_sim_config.ini"


def _float_list(text: str) -> list[float]:
    try:
        return [float(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(item) for item in text.split(",") if item.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers, got {text!r}")


def _print_report(report: BoundsReport) -> None:
    print(f"  decay:          {report.decay.value}")
    print(f"  max principle:  {report.max_principle.value}")
    print(f"  lower bound:    {report.lower_bound.value}")
    print(f"  blow-up:        {report.blowup.value}")
    if report.lambda_theory is not None:
        print(f"  lambda_theory = {report.lambda_theory:.6g}")
    if report.t_star_theory is not None:
        print(f"  T*            = {report.t_star_theory:.6g}")
    for failure in report.failures:
        print(f"  ✗ {failure}")


def cmd_simulate(args: argparse.Namespace) -> int:
    """Single run with its bound verdicts."""
    config = load_config(args.config)
    ensure_directory(args.out)
    series, _, event = run_simulation(config, out_dir=args.out, snapshot_stride=args.snapshot_stride)
    write_csv(series, os.path.join(args.out, "series.csv"))
    print(f"✓ Recorded {len(series)} time levels to {os.path.join(args.out, 'series.csv')}")
    if event is not None:
        print(f"⚠ Blow-up in cell {event.cell} at t={event.time:.6g} (step {event.step})")
    report = check_bounds(series, config, args.eps_tol)
    _print_report(report)
    return EXIT_OK if report.passed else EXIT_VERDICT


def cmd_decay_study(args: argparse.Namespace) -> int:
    """Sweep over kappa and M0."""
    spec = ExperimentSpec(
        scenario="decay-study",
        base=load_config(args.config),
        kappas=tuple(args.kappa),
        m0s=tuple(args.m0),
        out_dir=args.out,
        workers=args.workers,
        eps_tol=args.eps_tol,
    )
    report = decay_study(spec)
    print(f"{'kappa':>8} {'M0':>6} {'lambda':>12} {'num(0)':>12} {'num(late)':>12}  verdict")
    for cell in report.cells:
        mark = "✓" if cell.passed else "✗"
        print(f"{cell.kappa:>8g} {cell.m0:>6g} {cell.lambda_theory:>12.6g} "
              f"{cell.lambda_num_0:>12.6g} {cell.lambda_num_late:>12.6g}  {mark}")
        if cell.error:
            print(f"  ✗ {cell.error}")
    print(f"✓ Summary written to {os.path.join(args.out, 'decay_summary.csv')}")
    return EXIT_OK if report.passed else EXIT_VERDICT


def cmd_blowup_study(args: argparse.Namespace) -> int:
    """Blow-up run against the lower-bound envelope."""
    spec = ExperimentSpec(
        scenario="blowup-study",
        base=load_config(args.config),
        out_dir=args.out,
        eps_tol=args.eps_tol,
    )
    result = blowup_study(spec)
    print(f"  T* (theory)   = {result.t_star_theory:.6g}")
    if result.measured_time is None:
        print("✗ No blow-up observed")
    else:
        print(f"  T* (measured) = {result.measured_time:.6g} (relative error {result.relative_error:.3%})")
    _print_report(result.report)
    return EXIT_OK if result.passed else EXIT_VERDICT


def cmd_mms(args: argparse.Namespace) -> int:
    """Observed convergence orders."""
    table = mms_convergence(args.levels)
    for row in table.rows:
        mark = "✓" if row.passed else "✗"
        orders = ", ".join(f"{q:.3f}" for q in row.orders)
        print(f"{mark} {row.name:<10} orders [{orders}] (required >= {row.threshold})")
    if args.out:
        ensure_directory(args.out)
        write_csv(table, os.path.join(args.out, "mms.csv"))
    return EXIT_OK if table.passed else EXIT_VERDICT


def cmd_perturb(args: argparse.Namespace) -> int:
    """Perturbation growth."""
    report = perturbation_study(load_config(args.config), args.delta)
    print(f"  delta = {args.delta:g}, Gamma = {report.gamma:.6g}, final ratio = {report.ratio[-1]:.6g}")
    if args.out:
        ensure_directory(args.out)
        write_csv(report, os.path.join(args.out, "perturbation.csv"))
    mark = "✓" if report.passed else "✗"
    print(f"{mark} ratio bounded by exp(Gamma t)")
    return EXIT_OK if report.passed else EXIT_VERDICT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dfb_simulate.py",
        description="Darcy-Forchheimer-Brinkman flow with reactive transport",
    )
    parser.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="Logging level (default: WARNING)")
    parser.add_argument("--eps-tol", type=float, default=DEFAULT_EPS_TOL,
                        help=f"Relative tolerance of the bound verdicts (default: {DEFAULT_EPS_TOL})")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Run one simulation")
    p.add_argument("--config", default=DEFAULT_CONFIG)
    p.add_argument("--out", required=True)
    p.add_argument("--snapshot-stride", type=int, default=None)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("decay-study", help="Sweep the decay scenario")
    p.add_argument("--config", default=DEFAULT_CONFIG)
    p.add_argument("--kappa", type=_float_list, required=True)
    p.add_argument("--m0", type=_float_list, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(handler=cmd_decay_study)

    p = sub.add_parser("blowup-study", help="Run the blow-up scenario")
    p.add_argument("--config", default="dfb_blowup_config.ini")
    p.add_argument("--out", required=True)
    p.set_defaults(handler=cmd_blowup_study)

    p = sub.add_parser("mms", help="Convergence orders of the discrete operators")
    p.add_argument("--levels", type=_int_list, default=[32, 64, 128])
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_mms)

    p = sub.add_parser("perturb", help="Perturbation growth study")
    p.add_argument("--config", default=DEFAULT_CONFIG)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(handler=cmd_perturb)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main entry point; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.handler(args)
    except (ConfigException, HypothesisViolation, CsvIOException) as e:
        print(f"✗ {e}")
        return EXIT_USAGE
    except VerificationFailure as e:
        print(f"✗ {e}")
        return EXIT_VERDICT
    except (InstabilityException, LinearSolverException) as e:
        print(f"✗ Numerical failure: {e}")
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
