# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
"""
Boundary-fitted grids and the finite-difference machinery over them.

1D grids are uniform with one ghost node beyond each endpoint. 2D grids are the affine image
x = center + L (s cos phi, s sin phi) of a cell-centred polar grid on the unit disc, with an
across-pole neighbour at the innermost ring and one ghost ring at s = 1 + ds/2.

Every derivative routine accepts arbitrary leading batch dimensions on the value and ghost
arrays, so linear operators can be assembled by applying it to the identity.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Optional, Sequence, Union

import numpy as np

from .errors import InvalidInputError
from .geometry import ConvexDomain

LOG = logging.getLogger(__name__)

Resolution = Union[int, Sequence[int]]

MIN_NODES_1D = 8
MIN_RINGS = 8
MIN_ANGLES = 16

# Quadratic extrapolation from rings N-1, N-2, N-3 to s = 1
_RING_EXTRAPOLATION = (15 / 8, -5 / 4, 3 / 8)
# Second derivative at s = 1 from the ghost and rings N-1, N-2, N-3
_ONE_SIDED_SECOND = (3 / 2, -7 / 2, 5 / 2, -1 / 2)


@dataclass(frozen=True, eq=False)
class Grid:
    domain: ConvexDomain
    shape: tuple[int, ...]
    """(N + 1,) in 1D, (N_s, N_phi) in 2D"""
    spacing: float
    """Delta in 1D, ds in 2D"""
    nodes: np.ndarray
    ghost_nodes: np.ndarray
    """One ghost per boundary column: (left, right) in 1D, one per angle in 2D"""
    boundary_nodes: np.ndarray
    """Boundary point of each column"""
    s: Optional[np.ndarray] = None
    phi: Optional[np.ndarray] = None

    @property
    def n(self) -> int:
        return self.domain.n

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def columns(self) -> int:
        return self.ghost_nodes.shape[0]

    @property
    def resolution(self) -> tuple[int, ...]:
        if self.n == 1:
            return (self.shape[0] - 1,)
        return self.shape

    @cached_property
    def inverse_map(self) -> np.ndarray:
        """L^-1, mapping Cartesian offsets from the center back to the unit disc"""
        return np.linalg.inv(self.domain.unit_map)

    @cached_property
    def angular_cutoff(self) -> np.ndarray:
        """
        Highest angular wavenumber kept on each ring, min(2 j + 3, N_phi / 2) on ring j.

        Quadratics only carry wavenumbers up to 2, so they stay exact. The modes dropped near the
        pole are O(s^2) there.
        """
        assert self.n == 2, "Only planar grids filter angular modes"
        j = np.arange(self.shape[0])
        return np.minimum(2 * j + 3, self.shape[1] // 2)

    @cached_property
    def min_spacing(self) -> float:
        """
        Smallest Cartesian distance between stencil neighbours. The angular chord of ring j is
        scaled by N_phi / (pi M_j), the ratio of the central-difference wavenumber 2 / dphi to
        the ring's largest retained wavenumber M_j.
        """
        if self.n == 1:
            return self.spacing
        radial = np.linalg.norm(np.diff(self.nodes, axis=0), axis=-1).min()
        chords = np.linalg.norm(np.roll(self.nodes, -1, axis=1) - self.nodes, axis=-1).min(axis=1)
        angular = (chords * self.shape[1] / (np.pi * self.angular_cutoff)).min()
        ring = self.nodes[0]
        pole = np.linalg.norm(np.roll(ring, -self.shape[1] // 2, axis=0) - ring, axis=-1).min()
        return float(min(radial, angular, pole))

    @cached_property
    def ghost_direction(self) -> np.ndarray:
        """Boundary gradient of a unit ghost over zero node values, one row per column"""
        Du_b, _ = boundary_derivatives(self, np.zeros(self.shape), np.ones(self.columns))
        return Du_b

    @property
    def monitor_spacing(self) -> float:
        """Grid scale h entering the monitor tolerance"""
        if self.n == 1:
            return self.spacing
        return float(self.spacing * np.linalg.norm(self.domain.unit_map, 2))

    @property
    def anchor(self) -> tuple[int, ...]:
        """Index of the node nearest the domain center"""
        distance = np.linalg.norm(self.nodes - self.domain.center, axis=-1)
        return tuple(int(i) for i in np.unravel_index(np.argmin(distance), self.shape))

    def across_pole(self, k: int) -> tuple[int, int]:
        assert self.n == 2, "Only planar grids have an across-pole neighbour"
        return 0, (k + self.shape[1] // 2) % self.shape[1]

    def interior_mask(self) -> np.ndarray:
        """Nodes away from the boundary layer: 1D endpoints and the 2D outer ring are excluded"""
        mask = np.ones(self.shape, dtype=bool)
        if self.n == 1:
            mask[[0, -1]] = False
        else:
            mask[-1] = False
        return mask

    def matches(self, other: Grid) -> bool:
        return (
            self.shape == other.shape
            and self.n == other.n
            and bool(np.allclose(self.nodes, other.nodes, rtol=0, atol=1e-12))
        )


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray
    ghosts: np.ndarray
    t: float = 0.0

    def __post_init__(self) -> None:
        assert self.values.shape == self.grid.shape, (
            f"Field values have shape {self.values.shape}, expected {self.grid.shape}"
        )
        assert self.ghosts.shape == (self.grid.columns,), (
            f"Field ghosts have shape {self.ghosts.shape}, expected ({self.grid.columns},)"
        )

    @staticmethod
    def sample(grid: Grid, fn, t: float = 0.0) -> Field:
        """Samples fn at the nodes and at the ghost nodes"""
        return Field(
            grid=grid,
            values=np.asarray(fn(grid.nodes), dtype=float),
            ghosts=np.asarray(fn(grid.ghost_nodes), dtype=float),
            t=t,
        )

    def with_values(
        self,
        values: Optional[np.ndarray] = None,
        ghosts: Optional[np.ndarray] = None,
        t: Optional[float] = None,
    ) -> Field:
        return replace(
            self,
            values=self.values if values is None else values,
            ghosts=self.ghosts if ghosts is None else ghosts,
            t=self.t if t is None else t,
        )


@dataclass(frozen=True, eq=False)
class JetField:
    grid: Grid
    Du: np.ndarray
    D2u: np.ndarray
    eigenvalues: np.ndarray
    """Sorted ascending along the last axis"""
    phase: np.ndarray

    @cached_property
    def metric(self) -> np.ndarray:
        return linearized_metric(self.D2u)


def build_grid(domain: ConvexDomain, resolution: Resolution) -> Grid:
    sizes = (resolution,) if np.isscalar(resolution) else tuple(resolution)  # type: ignore[arg-type]
    sizes = tuple(int(v) for v in sizes)

    if domain.n == 1:
        if len(sizes) != 1:
            raise InvalidInputError(f"An interval needs a single resolution N, but got {sizes}")
        (N,) = sizes
        if N < MIN_NODES_1D:
            raise InvalidInputError(f"Resolution N={N} is below the minimum of {MIN_NODES_1D}")
        a, b = domain.interval
        delta = (b - a) / N
        return Grid(
            domain=domain,
            shape=(N + 1,),
            spacing=delta,
            nodes=(a + delta * np.arange(N + 1))[:, None],
            ghost_nodes=np.array([[a - delta], [b + delta]]),
            boundary_nodes=np.array([[a], [b]]),
        )

    if len(sizes) != 2:
        raise InvalidInputError(f"A planar domain needs (N_s, N_phi), but got {sizes}")
    n_s, n_phi = sizes
    if n_s < MIN_RINGS or n_phi < MIN_ANGLES or n_phi % 2:
        raise InvalidInputError(
            f"Resolution (N_s={n_s}, N_phi={n_phi}) rejected: need N_s >= {MIN_RINGS}, "
            f"N_phi >= {MIN_ANGLES} and N_phi even"
        )
    ds = 1 / n_s
    s = (np.arange(n_s) + 0.5) * ds
    phi = np.arange(n_phi) * (2 * np.pi / n_phi)
    e = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    L = domain.unit_map

    def place(radius: np.ndarray) -> np.ndarray:
        return domain.center + (radius[..., None, None] * e) @ L.T

    grid = Grid(
        domain=domain,
        shape=(n_s, n_phi),
        spacing=ds,
        nodes=place(s),
        ghost_nodes=place(np.array(1 + ds / 2)),
        boundary_nodes=place(np.array(1.0)),
        s=s,
        phi=phi,
    )
    LOG.debug(f"Built {n_s}x{n_phi} polar grid on {domain.describe()}")
    return grid


def _angular(u: np.ndarray, order: int, cutoff: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Spectral derivative along the periodic last axis. With a cutoff per ring (second to last
    axis), wavenumbers above it are dropped.
    """
    N = u.shape[-1]
    m = np.fft.rfftfreq(N, d=1 / N)
    if order == 1:
        factor = 1j * m
        factor[-1] = 0
    else:
        factor = -(m**2)
    if cutoff is not None:
        factor = np.where(m <= cutoff[:, None], factor, 0)
    return np.fft.irfft(np.fft.rfft(u, axis=-1) * factor, n=N, axis=-1)


def _polar_frames(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    assert grid.phi is not None
    e = np.stack([np.cos(grid.phi), np.sin(grid.phi)], axis=-1)
    e_perp = np.stack([-np.sin(grid.phi), np.cos(grid.phi)], axis=-1)
    return e, e_perp


def _to_cartesian(
    grid: Grid,
    s: np.ndarray,
    u_s: np.ndarray,
    u_phi: np.ndarray,
    u_ss: Optional[np.ndarray] = None,
    u_sphi: Optional[np.ndarray] = None,
    u_phiphi: Optional[np.ndarray] = None,
) -> tuple[np.ndarray, Optional[np.ndarray]]:
    e, e_perp = _polar_frames(grid)
    inverse = grid.inverse_map
    grad_w = u_s[..., None] * e + (u_phi / s)[..., None] * e_perp
    Du = grad_w @ inverse
    if u_ss is None:
        return Du, None

    assert u_sphi is not None and u_phiphi is not None
    ee = e[:, :, None] * e[:, None, :]
    pp = e_perp[:, :, None] * e_perp[:, None, :]
    mixed = e[:, :, None] * e_perp[:, None, :]
    mixed = mixed + np.swapaxes(mixed, -1, -2)
    H_w = (
        u_ss[..., None, None] * ee
        + (u_s / s + u_phiphi / s**2)[..., None, None] * pp
        + (u_sphi / s - u_phi / s**2)[..., None, None] * mixed
    )
    return Du, inverse @ H_w @ inverse


def cartesian_derivatives(
    grid: Grid, values: np.ndarray, ghosts: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Du with shape (..., *grid.shape, n) and D^2 u with shape (..., *grid.shape, n, n).

    In 2D the radial line through the pole is continued to negative s with the two innermost
    rings read across the pole. u_s is fourth-order on every ring but the outermost, which keeps
    u_s / s second-order at the pole; u_ss is second-order throughout.
    """
    if grid.n == 1:
        stack = np.concatenate([ghosts[..., :1], values, ghosts[..., 1:]], axis=-1)
        delta = grid.spacing
        Du = (stack[..., 2:] - stack[..., :-2]) / (2 * delta)
        D2u = (stack[..., 2:] - 2 * values + stack[..., :-2]) / delta**2
        return Du[..., None], D2u[..., None, None]

    assert grid.s is not None
    ds = grid.spacing
    across = np.roll(values[..., 1::-1, :], -grid.shape[1] // 2, axis=-1)
    # Signed radial line: rings -2, -1, 0 .. N_s - 1, ghost
    stack = np.concatenate([across, values, ghosts[..., None, :]], axis=-2)
    central = (stack[..., 3:, :] - stack[..., 1:-2, :]) / (2 * ds)
    fourth = (
        -stack[..., 4:, :] + 8 * stack[..., 3:-1, :] - 8 * stack[..., 1:-3, :] + stack[..., :-4, :]
    ) / (12 * ds)
    u_s = np.concatenate([fourth, central[..., -1:, :]], axis=-2)
    u_ss = (stack[..., 3:, :] - 2 * values + stack[..., 1:-2, :]) / ds**2
    cutoff = grid.angular_cutoff
    u_phi = _angular(values, 1, cutoff)
    u_phiphi = _angular(values, 2, cutoff)
    u_sphi = _angular(u_s, 1, cutoff)
    s = grid.s[:, None]
    Du, D2u = _to_cartesian(grid, s, u_s, u_phi, u_ss, u_sphi, u_phiphi)
    assert D2u is not None
    return Du, D2u


def boundary_derivatives(
    grid: Grid, values: np.ndarray, ghosts: np.ndarray, *, with_hessian: bool = False
) -> tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Gradient (and optionally Hessian) at the boundary point of every column.

    Each column's gradient depends on its own ghost only, which makes the boundary condition a
    scalar equation per column.
    """
    if grid.n == 1:
        delta = grid.spacing
        Du = np.stack(
            [values[..., 1] - ghosts[..., 0], ghosts[..., 1] - values[..., -2]], axis=-1
        ) / (2 * delta)
        if not with_hessian:
            return Du[..., None], None
        D2u = np.stack(
            [
                values[..., 1] - 2 * values[..., 0] + ghosts[..., 0],
                ghosts[..., 1] - 2 * values[..., -1] + values[..., -2],
            ],
            axis=-1,
        ) / delta**2
        return Du[..., None], D2u[..., None, None]

    ds = grid.spacing
    rings = [values[..., -1 - i, :] for i in range(3)]
    u_s = (ghosts - rings[0]) / ds
    u_phi = sum(w * _angular(r, 1) for w, r in zip(_RING_EXTRAPOLATION, rings))
    one = np.ones(1)
    if not with_hessian:
        return _to_cartesian(grid, one, u_s, u_phi)

    u_ss = (
        _ONE_SIDED_SECOND[0] * ghosts
        + sum(w * r for w, r in zip(_ONE_SIDED_SECOND[1:], rings))
    ) / ds**2
    u_phiphi = sum(w * _angular(r, 2) for w, r in zip(_RING_EXTRAPOLATION, rings))
    u_sphi = _angular(u_s, 1)
    return _to_cartesian(grid, one, u_s, u_phi, u_ss, u_sphi, u_phiphi)


def eigen_sym(H: np.ndarray, n: Optional[int] = None) -> np.ndarray:
    """Sorted eigenvalues of symmetric 1x1 or 2x2 matrices stacked along leading axes"""
    H = np.asarray(H, dtype=float)
    n = H.shape[-1] if n is None else n
    if n == 1:
        return H[..., 0, :1].copy()
    m = (H[..., 0, 0] + H[..., 1, 1]) / 2
    d = (H[..., 0, 0] - H[..., 1, 1]) / 2
    r = np.hypot(d, H[..., 0, 1])
    return np.stack([m - r, m + r], axis=-1)


def lagrangian_phase(eigenvalues: np.ndarray) -> np.ndarray:
    return np.sum(np.arctan(eigenvalues), axis=-1)


def linearized_metric(H: np.ndarray) -> np.ndarray:
    """g = (I + H^2)^-1 by direct inversion"""
    H = np.asarray(H, dtype=float)
    if H.shape[-1] == 1:
        return 1 / (1 + H**2)
    P = np.eye(2) + H @ H
    det = P[..., 0, 0] * P[..., 1, 1] - P[..., 0, 1] * P[..., 1, 0]
    g = np.empty_like(P)
    g[..., 0, 0] = P[..., 1, 1] / det
    g[..., 1, 1] = P[..., 0, 0] / det
    g[..., 0, 1] = -P[..., 0, 1] / det
    g[..., 1, 0] = -P[..., 1, 0] / det
    return g


def differentiate(field: Field) -> JetField:
    Du, D2u = cartesian_derivatives(field.grid, field.values, field.ghosts)
    eigenvalues = eigen_sym(D2u, field.grid.n)
    return JetField(
        grid=field.grid,
        Du=Du,
        D2u=D2u,
        eigenvalues=eigenvalues,
        phase=lagrangian_phase(eigenvalues),
    )


@dataclass(frozen=True)
class DerivativeOperators:
    """Derivatives as matrices acting on the unknown vector (node values, then ghosts)"""

    Du: np.ndarray
    """(nodes, n, unknowns)"""
    D2u: np.ndarray
    """(nodes, n, n, unknowns)"""
    boundary_Du: np.ndarray
    """(columns, n, unknowns)"""


def derivative_operators(grid: Grid) -> DerivativeOperators:
    P, C = grid.size, grid.columns
    identity = np.eye(P + C)
    values = identity[:, :P].reshape((P + C,) + grid.shape)
    ghosts = identity[:, P:]
    Du, D2u = cartesian_derivatives(grid, values, ghosts)
    Du_b, _ = boundary_derivatives(grid, values, ghosts)
    return DerivativeOperators(
        Du=np.moveaxis(Du.reshape(P + C, P, grid.n), 0, -1),
        D2u=np.moveaxis(D2u.reshape(P + C, P, grid.n, grid.n), 0, -1),
        boundary_Du=np.moveaxis(Du_b, 0, -1),
    )


def interpolate(
    grid: Grid, nodal: np.ndarray, points: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """
    Linear (1D) or bilinear-in-(s, phi) (2D) interpolation of nodal data of shape
    (*grid.shape, ...) at Cartesian points (K, n).

    Returns the interpolated values and a mask of points inside the interior band of the grid,
    i.e. not beyond the nodes adjacent to the boundary layer.
    """
    points = np.asarray(points, dtype=float).reshape(-1, grid.n)
    trailing = nodal.shape[len(grid.shape):]
    if grid.n == 1:
        x = grid.nodes[:, 0]
        flat = nodal.reshape(x.shape[0], -1)
        out = np.stack([np.interp(points[:, 0], x, flat[:, i]) for i in range(flat.shape[1])], -1)
        inside = (points[:, 0] >= x[1]) & (points[:, 0] <= x[-2])
        return out.reshape((points.shape[0],) + trailing), inside

    assert grid.s is not None
    n_s, n_phi = grid.shape
    ds, dphi = grid.spacing, 2 * np.pi / n_phi
    w = (points - grid.domain.center) @ grid.inverse_map.T
    s = np.linalg.norm(w, axis=-1)
    phi = np.mod(np.arctan2(w[:, 1], w[:, 0]), 2 * np.pi)
    inside = s <= grid.s[-2]

    across = np.roll(nodal[0], -n_phi // 2, axis=0)
    extended = np.concatenate([across[None], nodal], axis=0)
    r = np.clip(np.floor((s + ds / 2) / ds).astype(int), 0, n_s - 1)
    fr = (s - (r - 0.5) * ds) / ds
    position = phi / dphi
    k = np.floor(position).astype(int) % n_phi
    fk = position - np.floor(position)
    k1 = (k + 1) % n_phi

    expand = (slice(None),) + (None,) * len(trailing)
    fr, fk = fr[expand], fk[expand]
    out = (
        (1 - fr) * (1 - fk) * extended[r, k]
        + (1 - fr) * fk * extended[r, k1]
        + fr * (1 - fk) * extended[r + 1, k]
        + fr * fk * extended[r + 1, k1]
    )
    return out, inside
