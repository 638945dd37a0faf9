# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
"""
Independent solvers for the steady problem sum arctan(lambda_i) = c with h(Du) = 0 on the
boundary: a closed form on intervals and a damped Newton oracle on any grid.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg

from .discretization import (
    Field,
    boundary_derivatives,
    build_grid,
    derivative_operators,
    differentiate,
)
from .errors import GridMismatchError, InvalidInputError
from .geometry import ConvexDomain, eval_defining, make_domain
from .models import SteadyControl

if TYPE_CHECKING:
    from .flow import FlowState

LOG = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SteadySolution:
    field: Field
    c: float
    iterations: int
    residual_interior: float
    residual_boundary: float
    residual_anchor: float
    converged: bool
    history: tuple[float, ...] = ()
    """Residual 2-norm of the initial guess and of every accepted iterate"""
    message: str = ""

    def to_dict(self) -> dict:
        return {
            "c": self.c,
            "converged": self.converged,
            "iterations": self.iterations,
            "residual_interior": self.residual_interior,
            "residual_boundary": self.residual_boundary,
            "residual_anchor": self.residual_anchor,
            "residual_history": list(self.history),
            "message": self.message,
        }


@dataclass(frozen=True)
class _Residual:
    interior: np.ndarray
    boundary: np.ndarray
    anchor: float
    convex: bool

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate([self.interior, self.boundary, [self.anchor]])

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))

    def within(self, tol: float) -> bool:
        return max(
            np.abs(self.interior).max(), np.abs(self.boundary).max(), abs(self.anchor)
        ) <= tol


def _residual(field: Field, c: float, omega_tilde: ConvexDomain, anchor: tuple[int, ...]):
    jet = differentiate(field)
    Du_b, _ = boundary_derivatives(field.grid, field.values, field.ghosts)
    h, beta, _ = eval_defining(omega_tilde, Du_b)
    residual = _Residual(
        interior=(jet.phase - c).reshape(-1),
        boundary=h,
        anchor=float(field.values[anchor]),
        convex=bool(jet.eigenvalues[..., 0].min() > 0),
    )
    return residual, jet, beta


def steady_1d_closed_form(
    a: float, b: float, a_tilde: float, b_tilde: float, *, resolution: int = 200
) -> SteadySolution:
    """u(x) = k (x - a)^2 / 2 + a_tilde (x - a) with k = (b_tilde - a_tilde) / (b - a)"""
    if not (a < b and a_tilde < b_tilde):
        raise InvalidInputError(
            f"Degenerate intervals: ({a}, {b}) -> ({a_tilde}, {b_tilde})"
        )
    k = (b_tilde - a_tilde) / (b - a)
    c = math.atan(k)
    grid = build_grid(make_domain("interval", interval=(a, b)), resolution)
    omega_tilde = make_domain("interval", interval=(a_tilde, b_tilde))

    def u(x: np.ndarray) -> np.ndarray:
        d = x[..., 0] - a
        return 0.5 * k * d**2 + a_tilde * d

    field = Field.sample(grid, u)
    residual, _, _ = _residual(field, c, omega_tilde, (0,))
    return SteadySolution(
        field=field,
        c=c,
        iterations=0,
        residual_interior=float(np.abs(residual.interior).max()),
        residual_boundary=float(np.abs(residual.boundary).max()),
        residual_anchor=abs(residual.anchor),
        converged=True,
        message="closed form",
    )


def solve_steady(
    omega: ConvexDomain,
    omega_tilde: ConvexDomain,
    guess: Field,
    control: SteadyControl = SteadyControl(),
) -> SteadySolution:
    """
    Damped Newton on the square system F(D^2 u) - c = 0 at every node, h(Du_b) = 0 for every
    boundary column and u(anchor) = 0, with the node values, ghosts and c as unknowns.

    Never raises on solver trouble: a singular Jacobian, line-search stagnation or loss of
    convexity return the best iterate with converged=False.
    """
    grid = guess.grid
    if grid.domain is not omega and not build_grid(omega, grid.resolution).matches(grid):
        raise GridMismatchError("The initial guess does not live on a grid over the given domain")

    P, C = grid.size, grid.columns
    anchor = grid.anchor
    anchor_index = int(np.ravel_multi_index(anchor, grid.shape))
    operators = derivative_operators(grid)

    def unpack(U: np.ndarray) -> Field:
        return guess.with_values(values=U[:P].reshape(grid.shape), ghosts=U[P:])

    U = np.concatenate([guess.values.reshape(-1), guess.ghosts])
    c = float(differentiate(guess).phase.mean())
    residual, jet, beta = _residual(guess, c, omega_tilde, anchor)
    history = [residual.norm]
    iterations = 0
    message = ""
    LOG.info(f"Starting steady Newton solve on grid {grid.shape}, residual {residual.norm:.3e}")

    while not residual.within(control.tol_s):
        if iterations >= control.max_iter:
            message = f"no convergence in {control.max_iter} iterations"
            break

        jacobian = np.zeros((P + C + 1, P + C + 1))
        jacobian[:P, :-1] = np.einsum(
            "pij,pijm->pm", jet.metric.reshape(P, grid.n, grid.n), operators.D2u
        )
        jacobian[:P, -1] = -1
        jacobian[P : P + C, :-1] = np.einsum("ci,cim->cm", beta, operators.boundary_Du)
        jacobian[-1, anchor_index] = 1

        try:
            update = scipy.linalg.solve(jacobian, -residual.vector)
        except (scipy.linalg.LinAlgError, ValueError) as e:
            message = f"Jacobian solve failed: {e}"
            LOG.warning(message)
            break

        alpha = 1.0
        for _ in range(control.max_line_search):
            U_trial = U + alpha * update[:-1]
            c_trial = c + alpha * update[-1]
            trial, trial_jet, trial_beta = _residual(unpack(U_trial), c_trial, omega_tilde, anchor)
            if trial.convex and trial.norm < residual.norm:
                break
            alpha /= 2
        else:
            message = "line search stagnated"
            LOG.warning(f"{message} at iteration {iterations + 1}")
            break

        U, c = U_trial, c_trial
        residual, jet, beta = trial, trial_jet, trial_beta
        history.append(residual.norm)
        iterations += 1
        LOG.debug(f"Newton iteration {iterations}: residual {residual.norm:.3e}, step {alpha:g}")

    converged = residual.within(control.tol_s)
    if converged:
        LOG.info(f"Steady solve converged in {iterations} iterations, c={c:.12g}")
    else:
        LOG.warning(f"Steady solve failed after {iterations} iterations: {message}")

    return SteadySolution(
        field=unpack(U),
        c=float(c),
        iterations=iterations,
        residual_interior=float(np.abs(residual.interior).max()),
        residual_boundary=float(np.abs(residual.boundary).max()),
        residual_anchor=abs(residual.anchor),
        converged=converged,
        history=tuple(history),
        message=message or "converged",
    )


@dataclass(frozen=True)
class FlowSteadyGap:
    gradient_gap: float
    c_gap: float


def compare_flow_vs_steady(state: FlowState, steady: SteadySolution) -> FlowSteadyGap:
    """Sup of |D(u_flow - u_steady)| over interior nodes, and |c_flow - c_steady|"""
    grid = state.field.grid
    if not grid.matches(steady.field.grid):
        raise GridMismatchError(
            f"Flow grid {grid.shape} does not match steady grid {steady.field.grid.shape}"
        )
    mask = grid.interior_mask()
    gap = np.abs(state.jet.Du - differentiate(steady.field).Du)[mask]
    return FlowSteadyGap(gradient_gap=float(gap.max()), c_gap=abs(state.c_estimate - steady.c))
