# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
"""
Explicit time stepping of u_t = sum arctan(lambda_i) with the second boundary condition
h(Du) = 0 enforced after every interior update by a per-column ghost projection.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dataclass_field, replace
from typing import Optional

import numpy as np

from . import monitors
from .discretization import (
    Field,
    Grid,
    JetField,
    Resolution,
    boundary_derivatives,
    build_grid,
    differentiate,
)
from .errors import (
    BoundaryProjectionError,
    ConvexityLossError,
    FlowDivergedError,
    InvalidInputError,
)
from .geometry import ConvexDomain, eval_defining, pushforward_quadratic
from .models import Generator, PerturbedGenerator, StepControl
from .util import retry_with_halving

LOG = logging.getLogger(__name__)

# Oscillation growth factor over the initial oscillation that aborts a run
DIVERGENCE_FACTOR = 10


@dataclass(frozen=True)
class ProjectionResult:
    residual_max: float
    iterations: int
    nonmonotone_columns: tuple[int, ...] = ()


@dataclass(frozen=True, eq=False)
class FlowState:
    field: Field
    jet: JetField
    omega: ConvexDomain
    omega_tilde: ConvexDomain
    theta0: float
    projection: ProjectionResult
    initial_oblique_min: float = 0.0
    initial_lambda1_min: float = 0.0
    initial_hess_max: float = 0.0
    steps: int = 0
    last_dt: float = 0.0
    converged: bool = False
    c_estimate: float = math.nan

    @property
    def grid(self) -> Grid:
        return self.field.grid


def project_ghosts(
    field: Field, omega_tilde: ConvexDomain, *, tol_b: float, max_iter: int
) -> tuple[Field, ProjectionResult]:
    """
    Solves h(Du_b(ghost)) = 0 independently for every boundary column.

    The boundary gradient is affine in the column's ghost, p(t) = p + t d, so
    q(t) = h(p(t)) is a concave quadratic, evaluated from its value, slope and curvature at
    t = 0. The oblique root is the one on the decreasing branch,
    found by safeguarded Newton with bisection fallback inside a bracket around it.
    """
    grid = field.grid
    p, _ = boundary_derivatives(grid, field.values, field.ghosts)
    d = grid.ghost_direction

    h0, Dh, D2h = eval_defining(omega_tilde, p)
    slope = np.sum(Dh * d, axis=-1)
    curvature = np.einsum("ci,cij,cj->c", d, D2h, d)

    def evaluate(t: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return h0 + t * (slope + 0.5 * curvature * t), slope + curvature * t

    vertex = -slope / curvature
    peak, _ = evaluate(vertex)
    missed = np.flatnonzero(peak <= 0)
    if missed.size:
        raise BoundaryProjectionError(
            "Boundary gradient line misses the target domain", columns=missed.tolist()
        )

    lo = vertex
    hi = vertex + 2 * np.sqrt(2 * peak / -curvature)
    t = np.where((lo < 0) & (0 < hi), 0.0, (lo + hi) / 2)

    iterations = 0
    while True:
        q, dq = evaluate(t)
        pending = np.abs(q) > tol_b
        if not pending.any() or iterations >= max_iter:
            break
        iterations += 1
        lo = np.where(pending & (q > 0), t, lo)
        hi = np.where(pending & (q < 0), t, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = t - q / dq
        accept = (dq < 0) & (newton > lo) & (newton < hi)
        t = np.where(pending, np.where(accept, newton, (lo + hi) / 2), t)

    if pending.any():
        raise BoundaryProjectionError(
            f"Boundary projection did not converge in {max_iter} iterations",
            columns=np.flatnonzero(pending).tolist(),
        )

    # One polishing Newton step brings the residual to rounding level
    with np.errstate(divide="ignore", invalid="ignore"):
        polished = np.where(dq < 0, t - q / dq, t)
    q_polished, dq_polished = evaluate(polished)
    better = np.abs(q_polished) < np.abs(q)
    t = np.where(better, polished, t)
    q = np.where(better, q_polished, q)
    dq = np.where(better, dq_polished, dq)

    nonmonotone = tuple(int(c) for c in np.flatnonzero(dq >= 0))
    if nonmonotone:
        LOG.warning(f"Boundary equation not decreasing in the ghost at columns {list(nonmonotone)}")

    result = ProjectionResult(
        residual_max=float(np.max(np.abs(q))),
        iterations=iterations,
        nonmonotone_columns=nonmonotone,
    )
    return field.with_values(ghosts=field.ghosts + t), result


def enforce_boundary(state: FlowState, control: StepControl = StepControl()) -> FlowState:
    field, projection = project_ghosts(
        state.field, state.omega_tilde, tol_b=control.tol_b, max_iter=control.newton_max_iter
    )
    return replace(state, field=field, jet=differentiate(field), projection=projection)


def _check_bump_support(omega: ConvexDomain, generator: PerturbedGenerator) -> None:
    center, width = generator.bump_center, generator.bump_width
    if omega.n == 1:
        edge_points = np.array([[center[0] - width], [center[0] + width]])
    else:
        angles = np.linspace(0, 2 * np.pi, 512, endpoint=False)
        edge_points = center + width * np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    if not (np.all(omega.contains(edge_points)) and bool(omega.contains(center))):
        raise InvalidInputError(
            f"Bump of width {width} at {center.tolist()} is not strictly inside {omega.describe()}"
        )


def init_state(
    omega: ConvexDomain,
    omega_tilde: Optional[ConvexDomain],
    generator: Generator,
    *,
    resolution: Resolution,
    control: StepControl = StepControl(),
) -> FlowState:
    if generator.n != omega.n:
        raise InvalidInputError(
            f"Generator is {generator.n}-dimensional but the domain is {omega.n}-dimensional"
        )
    quadratic = generator.quadratic if isinstance(generator, PerturbedGenerator) else generator
    if omega_tilde is None:
        omega_tilde = pushforward_quadratic(omega, quadratic.A, quadratic.b, quadratic.x_c)
        LOG.info(f"Target domain set to the pushforward {omega_tilde.describe()}")
    elif omega_tilde.n != omega.n:
        raise InvalidInputError("Source and target domains must have the same dimension")
    if isinstance(generator, PerturbedGenerator):
        _check_bump_support(omega, generator)

    grid = build_grid(omega, resolution)
    try:
        field, projection = project_ghosts(
            Field.sample(grid, generator),
            omega_tilde,
            tol_b=control.tol_b,
            max_iter=control.newton_max_iter,
        )
    except BoundaryProjectionError as e:
        raise InvalidInputError(
            f"Initial data is incompatible with target {omega_tilde.describe()}: {e}"
        ) from e

    jet = differentiate(field)
    lambda1_min = float(jet.eigenvalues[..., 0].min())
    if lambda1_min <= 0:
        raise InvalidInputError(
            f"Initial data is not strictly convex: min lambda1 = {lambda1_min:.6g}"
        )
    if projection.residual_max > control.tol_b:
        raise InvalidInputError(
            f"Boundary residual {projection.residual_max:.3g} exceeds tol_b={control.tol_b:g}"
        )
    theta0 = float(jet.phase.max())
    assert theta0 < grid.n * math.pi / 2, f"Theta0={theta0} is not below n*pi/2"

    state = FlowState(
        field=field,
        jet=jet,
        omega=omega,
        omega_tilde=omega_tilde,
        theta0=theta0,
        projection=projection,
        c_estimate=float(jet.phase.mean()),
    )
    state = replace(
        state,
        initial_oblique_min=monitors.obliqueness(state).direct_min,
        initial_lambda1_min=lambda1_min,
        initial_hess_max=float(jet.eigenvalues[..., -1].max()),
    )
    LOG.info(
        f"Initialised flow on {omega.describe()} -> {omega_tilde.describe()}, "
        f"grid {grid.shape}, Theta0={theta0:.6g}"
    )
    return state


def cfl_dt(grid: Grid, control: StepControl = StepControl()) -> float:
    return control.cfl * grid.min_spacing**2 / (2 * grid.n)


def step(state: FlowState, control: StepControl = StepControl()) -> FlowState:
    speed = state.jet.phase

    def attempt(dt: float) -> tuple[Field, JetField, ProjectionResult]:
        moved = state.field.with_values(
            values=state.field.values + dt * speed, t=state.field.t + dt
        )
        field, projection = project_ghosts(
            moved, state.omega_tilde, tol_b=control.tol_b, max_iter=control.newton_max_iter
        )
        jet = differentiate(field)
        lambda1_min = float(jet.eigenvalues[..., 0].min())
        if lambda1_min <= 0:
            raise ConvexityLossError(
                f"Step {state.steps + 1} lost convexity", lambda1_min=lambda1_min
            )
        return field, jet, projection

    (field, jet, projection), dt = retry_with_halving(
        description=f"step {state.steps + 1}",
        attempt=attempt,
        dt=cfl_dt(state.grid, control),
        retry_on=(BoundaryProjectionError, ConvexityLossError),
        max_halvings=control.max_halvings,
    )
    return replace(
        state,
        field=field,
        jet=jet,
        projection=projection,
        steps=state.steps + 1,
        last_dt=dt,
        c_estimate=float(jet.phase.mean()),
    )


@dataclass(frozen=True, eq=False)
class RunResult:
    state: FlowState
    c: float
    converged: bool
    reports: tuple[monitors.EstimateReport, ...]
    rows: tuple[monitors.MonitorRow, ...]
    row_flags: dict[str, bool]
    tolerance: float
    audit: monitors.StepAudit
    """Node-wise bounds over every accepted step, between reports included"""
    gradient_drift: float
    """max |Du_final - Du_initial| over the nodes"""
    dt_history: np.ndarray
    snapshots: tuple[Field, ...] = dataclass_field(default=())

    @property
    def monotone(self) -> bool:
        return self.audit.monotone

    @property
    def step_flags(self) -> dict[str, bool]:
        return self.audit.flags

    @property
    def failures(self) -> list[str]:
        failures = [] if self.converged else ["converged"]
        failures.extend(f"accepted:{name}" for name in self.audit.failures)
        failures.extend(f"row:{name}" for name, ok in self.row_flags.items() if not ok)
        for report in self.reports:
            failures.extend(f"step {report.step}:{name}" for name in report.failures)
        return failures

    @property
    def passed(self) -> bool:
        return not self.failures


def run(state: FlowState, control: StepControl = StepControl()) -> RunResult:
    grid = state.grid
    tol = monitors.monitor_tolerance(grid) if control.tol_mon is None else control.tol_mon
    initial_Du = state.jet.Du
    audit = monitors.StepAudit.start(state, tol, tol_b=control.tol_b)
    low, high = audit.phase_min, audit.phase_max
    initial_osc = high - low

    reports: list[monitors.EstimateReport] = []
    rows: list[monitors.MonitorRow] = []
    snapshots: list[Field] = [state.field] if control.snapshot_every else []
    dts: list[float] = []

    def sample() -> None:
        if reports and reports[-1].step == state.steps:
            return
        report = monitors.estimate_report(state, tol, tol_b=control.tol_b)
        reports.append(report)
        rows.append(monitors.MonitorRow.from_report(report, state.last_dt))
        LOG.debug(f"Step {state.steps}: t={state.field.t:.6g} osc F={rows[-1].oscF:.3g}")

    LOG.info(f"Running flow with dt={cfl_dt(grid, control):.6g}, tol_c={control.tol_c:g}")
    while True:
        osc = high - low
        spread = float(np.abs(state.jet.phase - state.jet.phase.mean()).max())
        converged = osc <= control.tol_c and spread <= control.tol_c
        if converged or state.steps % control.report_every == 0:
            sample()
        if converged:
            break
        if initial_osc > 0 and osc > DIVERGENCE_FACTOR * initial_osc:
            raise FlowDivergedError(
                f"Phase oscillation {osc:.6g} at step {state.steps} exceeds "
                f"{DIVERGENCE_FACTOR}x the initial {initial_osc:.6g}"
            )
        if state.steps >= control.max_steps:
            LOG.warning(f"Reached max_steps={control.max_steps} with osc F={osc:.3g}")
            sample()
            break

        state = step(state, control)
        dts.append(state.last_dt)
        low, high = audit.observe(state)

        if control.snapshot_every and state.steps % control.snapshot_every == 0:
            snapshots.append(state.field)

    if control.snapshot_every and snapshots[-1] is not state.field:
        snapshots.append(state.field)

    c = float(state.jet.phase.mean())
    state = replace(state, converged=converged, c_estimate=c)
    result = RunResult(
        state=state,
        c=c,
        converged=converged,
        reports=tuple(reports),
        rows=tuple(rows),
        row_flags=monitors.row_flags(rows, grid.n, tol, tol_b=control.tol_b),
        tolerance=tol,
        audit=audit,
        gradient_drift=float(np.abs(state.jet.Du - initial_Du).max()),
        dt_history=np.array(dts),
        snapshots=tuple(snapshots),
    )
    if converged:
        LOG.info(f"Flow converged after {state.steps} steps (t={state.field.t:.6g}), c={c:.12g}")
    if result.failures:
        LOG.warning(f"Run finished with failures: {result.failures[:10]}")
    return result
