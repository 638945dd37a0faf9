# Copyright Amazon.com, Inc. or its affiliates. All Rights Reserved.

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .errors import InvalidInputError


def _as_matrix(value: object, n: int, name: str) -> np.ndarray:
    matrix = np.array(value, dtype=float).reshape(n, n) if np.size(value) == n * n else None
    if matrix is None:
        raise InvalidInputError(f"{name} must be a {n}x{n} matrix, but got {value}")
    return matrix


def _as_vector(value: object, n: int, name: str) -> np.ndarray:
    vector = np.array(value, dtype=float).reshape(-1)
    if vector.shape != (n,):
        raise InvalidInputError(f"{name} must have {n} components, but got {value}")
    return vector


def require_spd(matrix: np.ndarray, name: str) -> None:
    if not np.allclose(matrix, matrix.T, rtol=0, atol=1e-14 * max(1.0, np.abs(matrix).max())):
        raise InvalidInputError(f"{name} must be symmetric, but got {matrix.tolist()}")
    eigenvalues = np.linalg.eigvalsh(matrix)
    if not np.all(eigenvalues > 0):
        raise InvalidInputError(
            f"{name} must be positive-definite, but has eigenvalues {eigenvalues.tolist()}"
        )


@dataclass(frozen=True)
class StepControl:
    cfl: float = 0.5
    """Safety factor sigma applied to the explicit heat CFL limit"""
    tol_c: float = 1e-6
    """Convergence tolerance on the spatial oscillation of the phase"""
    tol_b: float = 1e-12
    """Residual tolerance of the boundary projection"""
    newton_max_iter: int = 50
    max_steps: int = 100_000
    max_halvings: int = 10
    report_every: int = 100
    """An EstimateReport is sampled every report_every accepted steps"""
    snapshot_every: int = 0
    """Keep every snapshot_every-th field for the Legendre checks. 0 disables snapshots"""
    tol_mon: Optional[float] = None
    """Monitor tolerance. Defaults to 1e-8 + 10 h^2 for the grid in use"""

    def __post_init__(self) -> None:
        if not 0 < self.cfl <= 1:
            raise InvalidInputError(f"CFL safety factor must be in (0, 1], but got {self.cfl}")
        for name in ("tol_c", "tol_b"):
            if not getattr(self, name) > 0:
                raise InvalidInputError(f"{name} must be positive, but got {getattr(self, name)}")
        if self.tol_mon is not None and not self.tol_mon > 0:
            raise InvalidInputError(f"tol_mon must be positive, but got {self.tol_mon}")
        for name in ("newton_max_iter", "max_steps", "report_every"):
            if getattr(self, name) < 1:
                raise InvalidInputError(f"{name} must be at least 1, but got {getattr(self, name)}")
        if self.max_halvings < 0 or self.snapshot_every < 0:
            raise InvalidInputError("max_halvings and snapshot_every must be non-negative")


@dataclass(frozen=True)
class SteadyControl:
    tol_s: float = 1e-10
    max_iter: int = 50
    max_line_search: int = 30

    def __post_init__(self) -> None:
        if not self.tol_s > 0:
            raise InvalidInputError(f"tol_s must be positive, but got {self.tol_s}")
        if self.max_iter < 1 or self.max_line_search < 1:
            raise InvalidInputError("max_iter and max_line_search must be at least 1")


@dataclass(frozen=True)
class QuadraticGenerator:
    """u0(x) = 1/2 (x - x_c)^T A (x - x_c) + b^T x"""

    A: np.ndarray
    b: np.ndarray
    x_c: np.ndarray

    @staticmethod
    def create(n: int, A: object, b: object = None, x_c: object = None) -> QuadraticGenerator:
        matrix = _as_matrix(A, n, "A")
        require_spd(matrix, "A")
        return QuadraticGenerator(
            A=matrix,
            b=np.zeros(n) if b is None else _as_vector(b, n, "b"),
            x_c=np.zeros(n) if x_c is None else _as_vector(x_c, n, "x_c"),
        )

    @property
    def n(self) -> int:
        return self.A.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        d = x - self.x_c
        return 0.5 * np.einsum("...i,ij,...j->...", d, self.A, d) + x @ self.b


@dataclass(frozen=True)
class PerturbedGenerator:
    """A quadratic plus epsilon times a smooth bump supported in a ball strictly inside the domain"""

    quadratic: QuadraticGenerator
    epsilon: float
    bump_center: np.ndarray
    bump_width: float = field(default=0.25)

    def __post_init__(self) -> None:
        if not self.bump_width > 0:
            raise InvalidInputError(f"bump_width must be positive, but got {self.bump_width}")
        if self.bump_center.shape != (self.quadratic.n,):
            raise InvalidInputError(
                f"bump_center must have {self.quadratic.n} components, but got {self.bump_center}"
            )

    @property
    def n(self) -> int:
        return self.quadratic.n

    def bump(self, x: np.ndarray) -> np.ndarray:
        r2 = np.sum((x - self.bump_center) ** 2, axis=-1) / self.bump_width**2
        inside = r2 < 1
        out = np.zeros_like(r2)
        out[inside] = np.exp(1 - 1 / (1 - r2[inside]))
        return out

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.quadratic(x) + self.epsilon * self.bump(x)


Generator = Union[QuadraticGenerator, PerturbedGenerator]
