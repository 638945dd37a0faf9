# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
"""
Runtime audit of the a priori estimates along the flow.

estimate_report evaluates every bound on one FlowState slice. StepAudit keeps the extremes of the
node-wise bounds over every accepted step. row_flags recomputes the pass/fail verdicts from
monitors.csv rows alone, so a finished run can be re-audited offline.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field as dataclass_field, fields
from typing import TYPE_CHECKING, Optional, Sequence

import numpy as np

from .discretization import Field, Grid, boundary_derivatives, eigen_sym
from .errors import InvalidInputError
from .geometry import ConvexDomain, eval_defining

if TYPE_CHECKING:
    from .flow import FlowState

LOG = logging.getLogger(__name__)


def monitor_tolerance(grid: Grid) -> float:
    """1e-8 plus a discretisation slack of 10 h^2"""
    return 1e-8 + 10 * grid.monitor_spacing**2


@dataclass(frozen=True, eq=False)
class ObliquenessResult:
    direct_min: float
    identity_min: float
    max_discrepancy: float
    direct: np.ndarray
    identity: np.ndarray

    @property
    def passed(self) -> bool:
        return self.direct_min > 0 and math.isfinite(self.identity_min)


def _inverse_sym(H: np.ndarray) -> np.ndarray:
    if H.shape[-1] == 1:
        return 1 / H
    det = H[..., 0, 0] * H[..., 1, 1] - H[..., 0, 1] * H[..., 1, 0]
    inverse = np.empty_like(H)
    inverse[..., 0, 0] = H[..., 1, 1]
    inverse[..., 1, 1] = H[..., 0, 0]
    inverse[..., 0, 1] = -H[..., 0, 1]
    inverse[..., 1, 0] = -H[..., 1, 0]
    return inverse / det[..., None, None]


def boundary_obliqueness(
    field: Field, omega: ConvexDomain, omega_tilde: ConvexDomain
) -> ObliquenessResult:
    """
    <beta, nu> at every boundary column, directly as h_p(Du) . nu and through the identity
    sqrt((D^2 u)^-1 nu . nu  *  D^2 u beta . beta), with beta = h_p(Du) and nu the inner normal.
    """
    grid = field.grid
    Du_b, D2u_b = boundary_derivatives(grid, field.values, field.ghosts, with_hessian=True)
    assert D2u_b is not None
    _, normal, _ = eval_defining(omega, grid.boundary_nodes)
    nu = normal / np.linalg.norm(normal, axis=-1, keepdims=True)
    _, beta, _ = eval_defining(omega_tilde, Du_b)

    direct = np.sum(beta * nu, axis=-1)

    convex = eigen_sym(D2u_b)[..., 0] > 0
    with np.errstate(divide="ignore", invalid="ignore"):
        inverse = _inverse_sym(D2u_b)
        product = np.einsum("ci,cij,cj->c", nu, inverse, nu) * np.einsum(
            "ci,cij,cj->c", beta, D2u_b, beta
        )
        identity = np.where(convex & (product >= 0), np.sqrt(np.abs(product)), np.nan)

    discrepancy = np.where(np.isfinite(identity), np.abs(direct - identity), np.inf)
    return ObliquenessResult(
        direct_min=float(direct.min()),
        identity_min=float(np.min(identity)) if np.all(np.isfinite(identity)) else math.nan,
        max_discrepancy=float(discrepancy.max()),
        direct=direct,
        identity=identity,
    )


def obliqueness(state: FlowState) -> ObliquenessResult:
    return boundary_obliqueness(state.field, state.omega, state.omega_tilde)


def tangential_residual(field: Field, omega_tilde: ConvexDomain) -> float:
    """max |d/dtau h(Du)| along the boundary ring, by centred differences in phi"""
    grid = field.grid
    if grid.n != 2:
        raise InvalidInputError("The tangential boundary check needs a planar domain")
    assert grid.phi is not None
    Du_b, _ = boundary_derivatives(grid, field.values, field.ghosts)
    h, _, _ = eval_defining(omega_tilde, Du_b)
    dphi = 2 * np.pi / grid.shape[1]
    dh = (np.roll(h, -1) - np.roll(h, 1)) / (2 * dphi)
    e_perp = np.stack([-np.sin(grid.phi), np.cos(grid.phi)], axis=-1)
    speed = np.linalg.norm(e_perp @ grid.domain.unit_map.T, axis=-1)
    return float(np.max(np.abs(dh / speed)))


def boundary_tangential_check(state: FlowState) -> float:
    return tangential_residual(state.field, state.omega_tilde)


def boundary_residual(field: Field, omega_tilde: ConvexDomain) -> float:
    """max |h(Du)| over the boundary columns"""
    Du_b, _ = boundary_derivatives(field.grid, field.values, field.ghosts)
    h, _, _ = eval_defining(omega_tilde, Du_b)
    return float(np.max(np.abs(h)))


@dataclass(eq=False)
class StepAudit:
    """
    Running extremes of the node-wise estimates, updated after every accepted step.

    The bounds are fixed by the first observed slice. A failure on any step between two
    reports stays visible in flags.
    """

    n: int
    theta0: float
    tolerance: float
    tol_b: float
    oblique_floor: float
    lambda1_floor: float
    normals: np.ndarray = dataclass_field(repr=False)
    slices: int = 0
    phase_min: float = math.inf
    phase_max: float = -math.inf
    lambda1_min: float = math.inf
    lambda1_max: float = -math.inf
    trace_min: float = math.inf
    trace_max: float = -math.inf
    confinement_min: float = math.inf
    oblique_min: float = math.inf
    bc_residual_max: float = 0.0
    nonmonotone_columns: int = 0
    monotone: bool = True
    _last_range: Optional[tuple[float, float]] = dataclass_field(default=None, repr=False)

    @staticmethod
    def start(state: FlowState, tol: float, *, tol_b: float = 1e-12) -> StepAudit:
        grid = state.grid
        _, normal, _ = eval_defining(state.omega, grid.boundary_nodes)
        audit = StepAudit(
            n=grid.n,
            theta0=state.theta0,
            tolerance=tol,
            tol_b=tol_b,
            oblique_floor=0.5 * state.initial_oblique_min,
            lambda1_floor=0.5 * state.initial_lambda1_min,
            normals=normal / np.linalg.norm(normal, axis=-1, keepdims=True),
        )
        audit.observe(state)
        return audit

    def observe(self, state: FlowState) -> tuple[float, float]:
        """Folds one slice into the extremes and returns its phase range"""
        field, jet = state.field, state.jet
        low, high = float(jet.phase.min()), float(jet.phase.max())
        if self._last_range is not None:
            last_low, last_high = self._last_range
            if high > last_high + self.tolerance or low < last_low - self.tolerance:
                if self.monotone:
                    LOG.warning(f"Phase range widened at step {state.steps}")
                self.monotone = False
        self._last_range = (low, high)

        eigenvalues = jet.eigenvalues
        # tr (I + H^2)^-1 from the spectrum of H
        trace = np.sum(1 / (1 + eigenvalues**2), axis=-1)
        confinement, _, _ = eval_defining(state.omega_tilde, jet.Du)
        Du_b, _ = boundary_derivatives(field.grid, field.values, field.ghosts)
        _, beta, _ = eval_defining(state.omega_tilde, Du_b)
        oblique = np.sum(beta * self.normals, axis=-1)

        self.slices += 1
        self.phase_min = min(self.phase_min, low)
        self.phase_max = max(self.phase_max, high)
        self.lambda1_min = min(self.lambda1_min, float(eigenvalues[..., 0].min()))
        self.lambda1_max = max(self.lambda1_max, float(eigenvalues[..., 0].max()))
        self.trace_min = min(self.trace_min, float(trace.min()))
        self.trace_max = max(self.trace_max, float(trace.max()))
        self.confinement_min = min(self.confinement_min, float(confinement.min()))
        self.oblique_min = min(self.oblique_min, float(oblique.min()))
        self.bc_residual_max = max(self.bc_residual_max, state.projection.residual_max)
        self.nonmonotone_columns = max(
            self.nonmonotone_columns, len(state.projection.nonmonotone_columns)
        )
        return low, high

    @property
    def flags(self) -> dict[str, bool]:
        tol = self.tolerance
        bound = math.tan(self.theta0 / self.n)
        return {
            "phase": self.phase_min >= -tol and self.phase_max <= self.theta0 + tol,
            "lambda1": self.lambda1_max <= bound + tol,
            "trace": self.trace_min >= 1 / (1 + bound**2) - tol and self.trace_max <= self.n + tol,
            "convexity": self.lambda1_min > 0,
            "monotone": self.monotone,
            "confinement": self.confinement_min >= -tol,
            "oblique": self.oblique_min > 0,
            "oblique_floor": self.oblique_min >= self.oblique_floor,
            "lambda1_floor": self.lambda1_min >= self.lambda1_floor,
            "bc_residual": self.bc_residual_max <= 10 * self.tol_b,
            "monotonicity": self.nonmonotone_columns == 0,
        }

    @property
    def failures(self) -> list[str]:
        return [name for name, ok in self.flags.items() if not ok]

    def to_dict(self) -> dict:
        return {
            f.name: getattr(self, f.name)
            for f in fields(self)
            if f.repr and f.name not in ("n", "tol_b")
        }


@dataclass(frozen=True)
class EstimateReport:
    step: int
    t: float
    n: int
    tolerance: float
    theta0: float
    theta0_flag: bool
    phase_min: float
    phase_max: float
    phase_flag: bool
    lambda1_min: float
    lambda1_max: float
    lambda1_bound: float
    lambda1_flag: bool
    trace_min: float
    trace_max: float
    trace_lower: float
    trace_flag: bool
    convexity_flag: bool
    hess_min: float
    hess_max: float
    oblique_min: float
    oblique_identity_min: float
    oblique_discrepancy: float
    oblique_flag: bool
    oblique_identity_flag: bool
    oblique_floor_flag: bool
    lambda1_floor_flag: bool
    tangential_residual: Optional[float]
    tangential_flag: bool
    bc_residual_max: float
    bc_flag: bool
    confinement_min: float
    confinement_flag: bool
    gradient_max: float
    gradient_bound: float
    gradient_flag: bool
    hess_interior_max: float
    hess_boundary_max: float
    hess_initial_max: float
    hessian_bound_flag: bool
    nonmonotone_columns: int
    monotonicity_flag: bool

    @property
    def flags(self) -> dict[str, bool]:
        return {f.name: getattr(self, f.name) for f in fields(self) if f.name.endswith("_flag")}

    @property
    def failures(self) -> list[str]:
        return [name for name, ok in self.flags.items() if not ok]

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_dict(self) -> dict:
        return asdict(self)


def estimate_report(
    state: FlowState, tol_mon: Optional[float] = None, *, tol_b: float = 1e-12
) -> EstimateReport:
    field, jet = state.field, state.jet
    grid = field.grid
    n = grid.n
    tol = monitor_tolerance(grid) if tol_mon is None else tol_mon
    theta0 = state.theta0

    phase = jet.phase
    lambda1 = jet.eigenvalues[..., 0]
    lambda_n = jet.eigenvalues[..., -1]
    lambda1_bound = math.tan(theta0 / n)
    trace = np.trace(jet.metric, axis1=-2, axis2=-1)
    trace_lower = 1 / (1 + lambda1_bound**2)

    oblique = obliqueness(state)
    _, D2u_b = boundary_derivatives(grid, field.values, field.ghosts, with_hessian=True)
    assert D2u_b is not None
    boundary_eigenvalues = eigen_sym(D2u_b)

    tangential = tangential_residual(field, state.omega_tilde) if n == 2 else None
    bc_residual = boundary_residual(field, state.omega_tilde)
    confinement, _, _ = eval_defining(state.omega_tilde, jet.Du)
    gradient_max = float(np.linalg.norm(jet.Du, axis=-1).max())
    gradient_bound = state.omega_tilde.max_norm
    hess_interior = float(lambda_n.max())
    hess_boundary = float(boundary_eigenvalues[..., -1].max())
    nonmonotone = len(state.projection.nonmonotone_columns)

    report = EstimateReport(
        step=state.steps,
        t=float(field.t),
        n=n,
        tolerance=tol,
        theta0=theta0,
        theta0_flag=theta0 < n * math.pi / 2,
        phase_min=float(phase.min()),
        phase_max=float(phase.max()),
        phase_flag=bool(phase.min() >= -tol and phase.max() <= theta0 + tol),
        lambda1_min=float(lambda1.min()),
        lambda1_max=float(lambda1.max()),
        lambda1_bound=lambda1_bound,
        lambda1_flag=bool(lambda1.max() <= lambda1_bound + tol),
        trace_min=float(trace.min()),
        trace_max=float(trace.max()),
        trace_lower=trace_lower,
        trace_flag=bool(trace.min() >= trace_lower - tol and trace.max() <= n + tol),
        convexity_flag=bool(lambda1.min() > 0),
        hess_min=float(min(lambda1.min(), boundary_eigenvalues[..., 0].min())),
        hess_max=max(hess_interior, hess_boundary),
        oblique_min=oblique.direct_min,
        oblique_identity_min=oblique.identity_min,
        oblique_discrepancy=oblique.max_discrepancy,
        oblique_flag=oblique.passed,
        oblique_identity_flag=oblique.max_discrepancy <= 1e-6 + grid.monitor_spacing,
        oblique_floor_flag=oblique.direct_min >= 0.5 * state.initial_oblique_min,
        lambda1_floor_flag=bool(lambda1.min() >= 0.5 * state.initial_lambda1_min),
        tangential_residual=tangential,
        tangential_flag=tangential is None or tangential <= 10 * tol_b,
        bc_residual_max=bc_residual,
        bc_flag=bc_residual <= 10 * tol_b,
        confinement_min=float(confinement.min()),
        confinement_flag=bool(confinement.min() >= -tol),
        gradient_max=gradient_max,
        gradient_bound=gradient_bound,
        gradient_flag=gradient_max <= gradient_bound + tol,
        hess_interior_max=hess_interior,
        hess_boundary_max=hess_boundary,
        hess_initial_max=state.initial_hess_max,
        hessian_bound_flag=hess_interior <= hess_boundary + state.initial_hess_max + tol,
        nonmonotone_columns=nonmonotone,
        monotonicity_flag=nonmonotone == 0,
    )
    if not report.passed:
        LOG.warning(f"Estimate check failed at step {state.steps}: {', '.join(report.failures)}")
    return report


@dataclass(frozen=True)
class MonitorRow:
    step: int
    t: float
    dt: float
    minF: float
    maxF: float
    oscF: float
    lambda1_min: float
    lambda1_max: float
    oblique_min: float
    hess_min: float
    hess_max: float
    bc_residual_max: float

    @staticmethod
    def from_report(report: EstimateReport, dt: float) -> MonitorRow:
        return MonitorRow(
            step=report.step,
            t=report.t,
            dt=float(dt),
            minF=report.phase_min,
            maxF=report.phase_max,
            oscF=report.phase_max - report.phase_min,
            lambda1_min=report.lambda1_min,
            lambda1_max=report.lambda1_max,
            oblique_min=report.oblique_min,
            hess_min=report.hess_min,
            hess_max=report.hess_max,
            bc_residual_max=report.bc_residual_max,
        )


MONITOR_COLUMNS = tuple(f.name for f in fields(MonitorRow))


def row_flags(
    rows: Sequence[MonitorRow], n: int, tol: float, *, tol_b: float = 1e-12
) -> dict[str, bool]:
    """
    Pass/fail verdicts recomputed from monitor rows only. The first row is the initial slice:
    its maxF is the phase ceiling and its oblique_min and lambda1_min set the floors.
    """
    if not rows:
        raise InvalidInputError("Cannot audit an empty monitor trajectory")
    first = rows[0]
    theta0 = first.maxF
    bound = math.tan(theta0 / n)
    pairs = list(zip(rows, rows[1:]))
    return {
        "theta0": theta0 < n * math.pi / 2,
        "phase": all(r.minF >= -tol and r.maxF <= theta0 + tol for r in rows),
        "lambda1": all(r.lambda1_max <= bound + tol for r in rows),
        "convexity": all(r.lambda1_min > 0 for r in rows),
        "monotone": all(b.maxF <= a.maxF + tol and b.minF >= a.minF - tol for a, b in pairs),
        "oblique_floor": first.oblique_min > 0
        and all(r.oblique_min >= 0.5 * first.oblique_min for r in rows),
        "lambda1_floor": all(r.lambda1_min >= 0.5 * first.lambda1_min for r in rows),
        "bc_residual": all(r.bc_residual_max <= 10 * tol_b for r in rows),
    }
