# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
"""
Discrete Legendre transform and the duality checks built on it.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .discretization import (
    Field,
    Grid,
    JetField,
    boundary_derivatives,
    differentiate,
    interpolate,
)
from .errors import InvalidInputError
from .geometry import ConvexDomain, eval_defining

LOG = logging.getLogger(__name__)

# Target rows scored against all source nodes at once
_CHUNK = 256


@dataclass(frozen=True, eq=False)
class DualField:
    field: Field
    """u* on a grid over the target domain, ghosts included"""
    extrapolated: np.ndarray
    """Node mask of targets whose maximiser sits on the source boundary layer outside Du(Omega)"""
    extrapolated_ghosts: np.ndarray
    maximisers: np.ndarray
    """Flat source index of the maximiser of every target node, then every ghost"""

    @property
    def t(self) -> float:
        return self.field.t


def _flatten(grid: Grid, jet: JetField, values: np.ndarray):
    n = grid.n
    return (
        grid.nodes.reshape(-1, n),
        values.reshape(-1),
        jet.Du.reshape(-1, n),
        jet.D2u.reshape(-1, n, n),
    )


def _boundary_layer(grid: Grid) -> np.ndarray:
    return ~grid.interior_mask().reshape(-1)


def legendre_transform(
    field: Field,
    target_grid: Grid,
    jet: Optional[JetField] = None,
    *,
    maximisers: Optional[np.ndarray] = None,
) -> DualField:
    """
    u*(y) = max_x (<x, y> - u(x)) over source nodes, refined at the maximiser x_hat by the
    quadratic step delta = (D^2 u)^-1 (y - Du(x_hat)) and the cubic term
    -(D^2 u(x_hat + delta) - D^2 u(x_hat))[delta, delta] / 6, with the Hessian at x_hat + delta
    interpolated. The cubic term is dropped where x_hat + delta leaves the interior band.

    Given the maximisers of an earlier slice, they are reused instead of searched for, so that
    two slices of one flow differ smoothly in time.
    """
    source = field.grid
    if target_grid.n != source.n:
        raise InvalidInputError("Source field and target grid must have the same dimension")
    jet = differentiate(field) if jet is None else jet
    lambda1_min = float(jet.eigenvalues[..., 0].min())
    if lambda1_min <= 0:
        raise InvalidInputError(
            f"Legendre transform needs strictly convex data, but min lambda1 = {lambda1_min:.6g}"
        )

    x, u, Du, D2u = _flatten(source, jet, field.values)
    boundary = _boundary_layer(source)
    targets = np.concatenate(
        [target_grid.nodes.reshape(-1, target_grid.n), target_grid.ghost_nodes]
    )

    if maximisers is None:
        argmax = np.empty(targets.shape[0], dtype=int)
        for start in range(0, targets.shape[0], _CHUNK):
            chunk = targets[start : start + _CHUNK]
            argmax[start : start + _CHUNK] = np.argmax(chunk @ x.T - u, axis=-1)
    elif maximisers.shape != (targets.shape[0],):
        raise InvalidInputError(
            f"Expected {targets.shape[0]} maximisers for the target grid, got {maximisers.shape}"
        )
    else:
        argmax = maximisers

    residual = targets - Du[argmax]
    delta = np.linalg.solve(D2u[argmax], residual[..., None])[..., 0]
    moved = x[argmax] + delta
    hessian_moved, inside = interpolate(source, jet.D2u, moved)
    change = np.einsum("ki,kij,kj->k", delta, hessian_moved - D2u[argmax], delta)
    dual = (
        np.sum(targets * x[argmax], axis=-1)
        - u[argmax]
        + 0.5 * np.sum(delta * residual, axis=-1)
        - np.where(inside, change / 6, 0.0)
    )

    leaves = ~source.domain.contains(moved)
    extrapolated = boundary[argmax] & leaves
    P = target_grid.size
    if extrapolated.any():
        LOG.debug(f"{int(extrapolated.sum())} dual targets lie outside Du(Omega)")

    return DualField(
        field=Field(
            grid=target_grid,
            values=dual[:P].reshape(target_grid.shape),
            ghosts=dual[P:],
            t=field.t,
        ),
        extrapolated=extrapolated[:P].reshape(target_grid.shape),
        extrapolated_ghosts=extrapolated[P:],
        maximisers=argmax,
    )


@dataclass(frozen=True)
class HessianInverseResult:
    max_discrepancy: float
    samples: int
    skipped: int


def hessian_inverse_check(
    field: Field, dual: DualField, jet: Optional[JetField] = None
) -> HessianInverseResult:
    """max over interior source nodes of |D^2 u*(Du(x)) D^2 u(x) - I| (Frobenius)"""
    source = field.grid
    jet = differentiate(field) if jet is None else jet
    mask = source.interior_mask()
    Du = jet.Du[mask]
    D2u = jet.D2u[mask]

    dual_jet = differentiate(dual.field)
    dual_hessian, inside = interpolate(dual.field.grid, dual_jet.D2u, Du)
    skipped = int(np.count_nonzero(~inside))
    if not inside.any():
        LOG.warning("No Hessian-inverse samples landed inside the dual grid")
        return HessianInverseResult(max_discrepancy=math.nan, samples=0, skipped=skipped)

    product = dual_hessian[inside] @ D2u[inside] - np.eye(source.n)
    discrepancy = np.linalg.norm(product, axis=(-2, -1))
    return HessianInverseResult(
        max_discrepancy=float(discrepancy.max()),
        samples=int(np.count_nonzero(inside)),
        skipped=skipped,
    )


@dataclass(frozen=True)
class DualFlowResult:
    max_residual: float
    samples: int


def dual_flow_residual(trajectory: Sequence[Field], target_grid: Grid) -> DualFlowResult:
    """
    max |d/dt u* - F(D^2 u*) + n pi / 2| at interior dual nodes, from consecutive slices.
    Both slices of a difference share the maximisers of the earlier one, and F(D^2 u*) is
    averaged over the two.
    """
    if len(trajectory) < 2:
        raise InvalidInputError("The dual flow residual needs at least two time slices")
    n = target_grid.n
    interior = target_grid.interior_mask()

    worst, samples = 0.0, 0
    for earlier, later in zip(trajectory, trajectory[1:]):
        dt = later.t - earlier.t
        if not dt > 0:
            raise InvalidInputError(f"Slices must be strictly increasing in time, got dt={dt}")
        d0 = legendre_transform(earlier, target_grid)
        d1 = legendre_transform(later, target_grid, maximisers=d0.maximisers)
        phase = 0.5 * (differentiate(d0.field).phase + differentiate(d1.field).phase)
        rate = (d1.field.values - d0.field.values) / dt
        residual = np.abs(rate - phase + n * math.pi / 2)
        usable = interior & ~d0.extrapolated & ~d1.extrapolated
        if usable.any():
            worst = max(worst, float(residual[usable].max()))
            samples += int(np.count_nonzero(usable))
    return DualFlowResult(max_residual=worst, samples=samples)


def dual_boundary_residual(dual: DualField, omega: ConvexDomain) -> float:
    """max |h(Du*)| over the dual boundary columns, h the defining function of the source domain"""
    grid = dual.field.grid
    Du_b, _ = boundary_derivatives(grid, dual.field.values, dual.field.ghosts)
    h, _, _ = eval_defining(omega, Du_b)
    return float(np.max(np.abs(h)))
