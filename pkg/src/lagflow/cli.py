# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
"""
Command line entry point::

    lagflow <mode> --config <path> [--set key=value ...] [--out <dir>] [--verbose]

Exit status is 0 only when the run converged and every monitor flag passed, 1 when the run
finished but failed a check, 2 for rejected configuration or input and 3 for other errors.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional, Sequence

from . import export
from ._logging import configure_logging
from .config import MODES, RunConfig, load_config
from .discretization import build_grid
from .errors import InvalidInputError, LagflowError, OutputError
from .flow import FlowState, RunResult, init_state, project_ghosts, run, step
from .geometry import ConvexDomain, pushforward_quadratic
from .legendre import (
    dual_boundary_residual,
    dual_flow_residual,
    hessian_inverse_check,
    legendre_transform,
)
from .models import PerturbedGenerator
from .monitors import monitor_tolerance, row_flags
from .steady import solve_steady, steady_1d_closed_form
from .util import logged_call

LOG = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_INVALID = 2
EXIT_ERROR = 3


def _target_domain(config: RunConfig) -> ConvexDomain:
    if config.omega_tilde is not None:
        return config.omega_tilde
    generator = config.generator
    quadratic = generator.quadratic if isinstance(generator, PerturbedGenerator) else generator
    return pushforward_quadratic(config.omega, quadratic.A, quadratic.b, quadratic.x_c)


def _initial_state(config: RunConfig) -> FlowState:
    return logged_call(
        description="flow initialisation",
        fn=lambda: init_state(
            config.omega,
            config.omega_tilde,
            config.generator,
            resolution=config.resolution,
            control=config.control,
        ),
    )


def _flow(config: RunConfig, out: Path) -> RunResult:
    control = config.control
    if config.dump_every:
        control = replace(control, snapshot_every=config.dump_every)
    state = _initial_state(config)
    result: RunResult = logged_call(description="flow run", fn=lambda: run(state, control))

    if config.dump_every:
        for i, snapshot in enumerate(result.snapshots):
            export.write_field_dump(snapshot, out / f"field_{i:04d}.txt")
    export.export_outputs(
        result.state.field,
        out,
        name="field_final",
        rows=result.rows,
        svg=config.svg,
        jet=result.state.jet,
    )
    export.write_json(
        {
            "converged": result.converged,
            "passed": result.passed,
            "c": result.c,
            "steps": result.state.steps,
            "t": result.state.field.t,
            "theta0": result.state.theta0,
            "tolerance": result.tolerance,
            "monotone": result.monotone,
            "step_flags": result.step_flags,
            "step_audit": result.audit.to_dict(),
            "gradient_drift": result.gradient_drift,
            "row_flags": result.row_flags,
            "failures": result.failures,
            "final_report": result.reports[-1].to_dict() if result.reports else None,
        },
        out / "flow_report.json",
    )
    return result


def run_flow(config: RunConfig, out: Path) -> bool:
    return _flow(config, out).passed


def run_steady(config: RunConfig, out: Path) -> bool:
    omega_tilde = _target_domain(config)
    if config.steady_warm_start is not None:
        grid = build_grid(config.omega, config.resolution)
        loaded = export.read_field_dump(config.steady_warm_start, grid)
        guess, _ = project_ghosts(
            loaded,
            omega_tilde,
            tol_b=config.control.tol_b,
            max_iter=config.control.newton_max_iter,
        )
        LOG.info(f"Warm start from {config.steady_warm_start} (t={guess.t:g})")
    else:
        guess = _initial_state(config).field

    solution = logged_call(
        description="steady solve",
        fn=lambda: solve_steady(config.omega, omega_tilde, guess, config.steady),
    )
    report = solution.to_dict()
    if config.omega.n == 1:
        a, b = config.omega.interval
        a_tilde, b_tilde = omega_tilde.interval
        closed = steady_1d_closed_form(a, b, a_tilde, b_tilde, resolution=config.resolution[0])
        report["closed_form_c"] = closed.c
        report["closed_form_c_gap"] = abs(closed.c - solution.c)

    export.write_field_dump(solution.field, out / "steady_field.txt")
    if config.svg:
        export.write_svg(solution.field, out / "steady_field.svg")
    export.write_json(report, out / "steady_report.json")
    return solution.converged


def run_legendre_check(config: RunConfig, out: Path) -> bool:
    result = _flow(config, out)
    final = result.state
    # The dual time derivative is taken over one further step from the final slice
    following = step(final, config.control)

    target_grid = build_grid(final.omega_tilde, config.resolution)
    dual = legendre_transform(final.field, target_grid, final.jet)
    hessian = hessian_inverse_check(final.field, dual, final.jet)
    dual_flow = dual_flow_residual([final.field, following.field], target_grid)
    dual_boundary = dual_boundary_residual(dual, final.omega)

    export.write_field_dump(dual.field, out / "dual_field.txt")
    export.write_json(
        {
            "hessian_inverse_max": hessian.max_discrepancy,
            "hessian_inverse_samples": hessian.samples,
            "hessian_inverse_skipped": hessian.skipped,
            "dual_flow_residual": dual_flow.max_residual,
            "dual_flow_samples": dual_flow.samples,
            "dual_boundary_residual": dual_boundary,
            "extrapolated_nodes": int(dual.extrapolated.sum()),
            "tolerance": config.legendre_tol,
        },
        out / "legendre_report.json",
    )
    residuals = (hessian.max_discrepancy, dual_flow.max_residual, dual_boundary)
    within = all(math.isfinite(r) and r <= config.legendre_tol for r in residuals)
    if not within:
        LOG.warning(f"Legendre residuals {residuals} exceed tolerance {config.legendre_tol:g}")
    return result.passed and within


def run_monitor_replay(config: RunConfig, out: Path) -> bool:
    assert config.replay_monitors is not None
    rows = export.read_monitor_csv(config.replay_monitors)
    grid = build_grid(config.omega, config.resolution)
    tolerance = config.control.tol_mon or monitor_tolerance(grid)
    flags = row_flags(rows, grid.n, tolerance, tol_b=config.control.tol_b)
    passed = all(flags.values())
    export.write_json(
        {
            "source": str(config.replay_monitors),
            "rows": len(rows),
            "tolerance": tolerance,
            "flags": flags,
            "passed": passed,
        },
        out / "replay_report.json",
    )
    if not passed:
        LOG.warning(f"Replay flags failed: {[name for name, ok in flags.items() if not ok]}")
    return passed


_RUNNERS = {
    "flow": run_flow,
    "steady": run_steady,
    "legendre-check": run_legendre_check,
    "monitor-replay": run_monitor_replay,
}


def run_config(config: RunConfig, out: Path) -> bool:
    """Executes the configured mode, writing artifacts under out. True when every check passed"""
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise OutputError(f"Cannot create output directory ({e.strerror})", path=out) from e
    return _RUNNERS[config.mode](config, out)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lagflow",
        description="Lagrangian mean curvature flow with the second boundary condition",
    )
    parser.add_argument("mode", choices=MODES)
    parser.add_argument("--config", required=True, help="Path to a key = value run file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override a configuration key. May be repeated",
    )
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--verbose", action="store_true", help="Log at DEBUG level")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    try:
        configure_logging(args.mode, "DEBUG" if args.verbose else None)
    except ValueError as e:
        print(f"Invalid log level: {e}", file=sys.stderr)
        return EXIT_INVALID

    try:
        config = load_config(args.config, [*args.overrides, f"mode={args.mode}"])
        out = config.resolve_output_dir(args.out)
        passed = run_config(config, out)
    except InvalidInputError as e:
        LOG.error(f"Rejected: {e}")
        return EXIT_INVALID
    except LagflowError as e:
        LOG.error(f"Run aborted: {e}")
        return EXIT_ERROR

    LOG.info(f"Artifacts written to {out}")
    return EXIT_OK if passed else EXIT_FAILED


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())
