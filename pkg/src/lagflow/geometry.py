# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.
"""
Convex domains described by strictly concave quadratic defining functions.

A domain is {p : (p - center)^T M (p - center) <= 1} with defining function
h(p) = s * (1 - (p - center)^T M (p - center)), positive inside, zero on the boundary and
negative outside. Intervals and discs use the exact |Dh| = 1 normalisation on the boundary;
general ellipses normalise the arc-length mean of |Dh| over the boundary to 1.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal, Optional, Union

import numpy as np

from .errors import InvalidInputError
from .models import require_spd

LOG = logging.getLogger(__name__)

DomainKind = Literal["interval", "disc", "ellipse"]

# Number of boundary samples used for the ellipse normalisation and for max |p| over the closure
_BOUNDARY_QUADRATURE_POINTS = 8192


@dataclass(frozen=True, eq=False)
class ConvexDomain:
    kind: DomainKind
    center: np.ndarray
    matrix: np.ndarray
    """Shape matrix M of {(p - center)^T M (p - center) <= 1}"""
    scale: float
    """Normalisation s of the defining function"""

    @property
    def n(self) -> int:
        return self.center.shape[0]

    @property
    def theta(self) -> float:
        """Strict concavity constant: D^2 h <= -theta I"""
        return float(2 * self.scale * np.linalg.eigvalsh(self.matrix)[0])

    @property
    def interval(self) -> tuple[float, float]:
        assert self.kind == "interval", f"{self.kind} domain has no interval endpoints"
        r = 1 / np.sqrt(self.matrix[0, 0])
        return float(self.center[0] - r), float(self.center[0] + r)

    @property
    def radius(self) -> float:
        assert self.kind in ("disc", "interval"), f"{self.kind} domain has no single radius"
        return float(1 / np.sqrt(self.matrix[0, 0]))

    @property
    def unit_map(self) -> np.ndarray:
        """L = M^(-1/2), mapping the closed unit ball onto the domain via p = center + L w"""
        if self.kind in ("disc", "interval"):
            return self.radius * np.eye(self.n)
        eigenvalues, vectors = np.linalg.eigh(self.matrix)
        return (vectors / np.sqrt(eigenvalues)) @ vectors.T

    def boundary_radius(self, phi: Union[float, np.ndarray]) -> np.ndarray:
        """rho(phi): distance from the center to the boundary along direction (cos phi, sin phi)"""
        assert self.n == 2, "boundary_radius is only defined for planar domains"
        e = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        return 1 / np.sqrt(np.einsum("...i,ij,...j->...", e, self.matrix, e))

    def boundary_points(self, phi: np.ndarray) -> np.ndarray:
        """Boundary positions center + L (cos phi, sin phi)"""
        assert self.n == 2, "boundary_points is only defined for planar domains"
        e = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        return self.center + e @ self.unit_map.T

    def contains(self, p: np.ndarray) -> np.ndarray:
        h, _, _ = eval_defining(self, p)
        return h > 0

    @property
    def max_norm(self) -> float:
        """max |p| over the closure of the domain"""
        if self.n == 1:
            a, b = self.interval
            return max(abs(a), abs(b))
        phi = np.linspace(0, 2 * np.pi, _BOUNDARY_QUADRATURE_POINTS, endpoint=False)
        return float(np.linalg.norm(self.boundary_points(phi), axis=-1).max())

    def describe(self) -> str:
        if self.kind == "interval":
            a, b = self.interval
            return f"interval ({a:g}, {b:g})"
        if self.kind == "disc":
            return f"disc radius {self.radius:g} center {self.center.tolist()}"
        return f"ellipse M={self.matrix.tolist()} center {self.center.tolist()}"


@dataclass(frozen=True, eq=False)
class BoundaryPoint:
    position: np.ndarray
    normal: np.ndarray
    """Inner unit normal"""
    parameter: Union[float, str]


def make_domain(
    kind: str,
    *,
    center: Optional[object] = None,
    radius: Optional[float] = None,
    matrix: Optional[object] = None,
    interval: Optional[tuple[float, float]] = None,
) -> ConvexDomain:
    if kind == "interval":
        if interval is None or len(interval) != 2:
            raise InvalidInputError(f"An interval domain needs two endpoints, but got {interval}")
        a, b = (float(v) for v in interval)
        if not a < b:
            raise InvalidInputError(f"Degenerate interval: expected a < b, but got ({a}, {b})")
        r = (b - a) / 2
        domain = ConvexDomain(
            kind="interval",
            center=np.array([(a + b) / 2]),
            matrix=np.array([[1 / r**2]]),
            scale=r / 2,
        )
    elif kind == "disc":
        if radius is None or not float(radius) > 0:
            raise InvalidInputError(f"A disc needs a positive radius, but got {radius}")
        R = float(radius)
        domain = ConvexDomain(
            kind="disc",
            center=_center(center, 2),
            matrix=np.eye(2) / R**2,
            scale=R / 2,
        )
    elif kind == "ellipse":
        if matrix is None:
            raise InvalidInputError("An ellipse needs a shape matrix")
        M = np.array(matrix, dtype=float)
        if M.shape != (2, 2):
            raise InvalidInputError(f"An ellipse shape matrix must be 2x2, but got {M.tolist()}")
        require_spd(M, "Ellipse shape matrix")
        domain = _ellipse(_center(center, 2), M)
    else:
        raise InvalidInputError(f"Unknown domain kind '{kind}'. Expected interval, disc or ellipse")

    LOG.debug(f"Built {domain.describe()} with theta={domain.theta:.6g}")
    return domain


def _center(center: Optional[object], n: int) -> np.ndarray:
    if center is None:
        return np.zeros(n)
    c = np.array(center, dtype=float).reshape(-1)
    if c.shape != (n,):
        raise InvalidInputError(f"Center must have {n} components, but got {center}")
    return c


def _ellipse(center: np.ndarray, M: np.ndarray) -> ConvexDomain:
    unnormalised = ConvexDomain(kind="ellipse", center=center, matrix=M, scale=1.0)
    L = unnormalised.unit_map
    phi = np.linspace(0, 2 * np.pi, _BOUNDARY_QUADRATURE_POINTS, endpoint=False)
    e = np.stack([np.cos(phi), np.sin(phi)], axis=-1)
    e_perp = np.stack([-np.sin(phi), np.cos(phi)], axis=-1)
    # |Dh| / s = 2 |M (p - c)| on the boundary, weighted by the arc length element |L e_perp|
    grad_norm = 2 * np.linalg.norm((e @ L.T) @ M.T, axis=-1)
    arc = np.linalg.norm(e_perp @ L.T, axis=-1)
    mean_grad = float(np.sum(grad_norm * arc) / np.sum(arc))
    return ConvexDomain(kind="ellipse", center=center, matrix=M, scale=1 / mean_grad)


def eval_defining(
    domain: ConvexDomain, p: Union[float, np.ndarray]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Evaluates h, Dh and D^2 h at p, an array of shape (..., n). A bare scalar is accepted for
    one-dimensional domains.
    """
    points = np.asarray(p, dtype=float)
    if domain.n == 1 and (points.ndim == 0 or points.shape[-1] != 1):
        points = points[..., None]
    d = points - domain.center
    Md = d @ domain.matrix.T
    h = domain.scale * (1 - np.sum(d * Md, axis=-1))
    Dh = -2 * domain.scale * Md
    D2h = np.broadcast_to(-2 * domain.scale * domain.matrix, Md.shape + (domain.n,))
    return h, Dh, D2h


def inner_normal(domain: ConvexDomain, phi: Union[float, str]) -> BoundaryPoint:
    """
    Boundary point and inner unit normal. For intervals phi is "left" or "right"; for planar
    domains it is the angle of the boundary parametrisation center + L (cos phi, sin phi).
    """
    if domain.n == 1:
        a, b = domain.interval
        if phi not in ("left", "right"):
            raise InvalidInputError(f"Interval boundary parameter must be left or right, got {phi}")
        position = np.array([a if phi == "left" else b])
    else:
        position = domain.boundary_points(np.asarray(float(phi)))

    _, Dh, _ = eval_defining(domain, position)
    return BoundaryPoint(position=position, normal=Dh / np.linalg.norm(Dh), parameter=phi)


def pushforward_quadratic(
    omega: ConvexDomain, A: object, b: object, x_c: object
) -> ConvexDomain:
    """Image of omega under p -> A (p - x_c) + b, the gradient map of a quadratic potential"""
    n = omega.n
    matrix = np.array(A, dtype=float).reshape(n, n)
    require_spd(matrix, "Pushforward matrix A")
    offset = np.array(b, dtype=float).reshape(n)
    origin = np.array(x_c, dtype=float).reshape(n)

    if omega.kind == "interval":
        a0, b0 = omega.interval
        k = matrix[0, 0]
        return make_domain(
            "interval",
            interval=(k * (a0 - origin[0]) + offset[0], k * (b0 - origin[0]) + offset[0]),
        )

    inverse = np.linalg.inv(matrix)
    shape = inverse @ omega.matrix @ inverse
    shape = (shape + shape.T) / 2
    center = matrix @ (omega.center - origin) + offset
    if shape[0, 1] == 0 and np.isclose(shape[0, 0], shape[1, 1], rtol=1e-14, atol=0):
        return make_domain("disc", center=center, radius=1 / np.sqrt(shape[0, 0]))
    return make_domain("ellipse", center=center, matrix=shape)
