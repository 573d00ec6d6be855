"""Rectangular domain, boundary partition and tensor-product quadrature.

The domain is ``[0, L] x [0, H]`` with

* ``G0`` the inflow edge ``x = 0`` (Dirichlet, free-stream value),
* ``G1`` the outflow edge ``x = L`` (homogeneous Neumann),
* ``G2`` the walls ``y = 0`` and ``y = H`` (Dirichlet, wall value).

Corners belong to the adjacent Dirichlet segment: ``(0, 0)`` and ``(0, H)``
to ``G0``, ``(L, 0)`` and ``(L, H)`` to ``G2``.

Fields are stored as 2-D arrays indexed ``[i, j] -> (x_i, y_j)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError, ShapeError

G0, G1, G2, INTERIOR = "G0", "G1", "G2", "interior"

_BOUNDARY_ATOL = 1e-12


@dataclass(frozen=True)
class Domain:
    """Axis-aligned rectangle with its quadrature resolution.

    ``nx`` and ``ny`` count quadrature panels per axis; each panel carries
    ``order`` Gauss-Legendre nodes. The uniform sample grid uses the panel
    breakpoints, i.e. ``(nx + 1) x (ny + 1)`` nodes including the boundary.
    """

    L: float = 1.0
    H: float = 1.0
    nx: int = 64
    ny: int = 64
    order: int = 6

    def __post_init__(self):
        if not (self.L > 0 and self.H > 0):
            raise DomainError(f"L and H must be positive, got L={self.L}, H={self.H}")
        if self.nx < 4 or self.ny < 4:
            raise DomainError(f"nx and ny must be >= 4, got nx={self.nx}, ny={self.ny}")
        if self.order < 1:
            raise DomainError(f"quadrature order must be >= 1, got {self.order}")

    @property
    def area(self) -> float:
        return self.L * self.H

    def refined(self, nx: int, ny: int | None = None) -> "Domain":
        return Domain(self.L, self.H, nx, nx if ny is None else ny, self.order)

    @cached_property
    def quadrature(self) -> "QuadratureGrid":
        return QuadratureGrid.build(self)

    @cached_property
    def samples(self) -> "SampleGrid":
        return SampleGrid.build(self)


def _gauss_panels(a: float, b: float, panels: int, order: int):
    ref_x, ref_w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * ref_x[None, :]).ravel()
    weights = (half[:, None] * ref_w[None, :]).ravel()
    return nodes, weights


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Composite Gauss-Legendre tensor grid on a :class:`Domain`."""

    domain: Domain
    x: np.ndarray
    y: np.ndarray
    wx: np.ndarray
    wy: np.ndarray

    @classmethod
    def build(cls, domain: Domain) -> "QuadratureGrid":
        x, wx = _gauss_panels(0.0, domain.L, domain.nx, domain.order)
        y, wy = _gauss_panels(0.0, domain.H, domain.ny, domain.order)
        return cls(domain, x, y, wx, wy)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.x.size, self.y.size)

    @cached_property
    def weights(self) -> np.ndarray:
        return np.outer(self.wx, self.wy)

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    @property
    def nodes(self) -> np.ndarray:
        """Node coordinates, shape ``(Nx * Ny, 2)``, row-major in ``(x, y)``."""
        X, Y = self.mesh
        return np.column_stack([X.ravel(), Y.ravel()])

    def integrate(self, f: np.ndarray) -> float:
        _check_shape(f, self.shape)
        return float(self.wx @ f @ self.wy)


@dataclass(frozen=True, eq=False)
class SampleGrid:
    """Uniform grid of panel breakpoints, boundary nodes included."""

    domain: Domain
    x: np.ndarray
    y: np.ndarray

    @classmethod
    def build(cls, domain: Domain) -> "SampleGrid":
        return cls(domain, np.linspace(0.0, domain.L, domain.nx + 1),
                   np.linspace(0.0, domain.H, domain.ny + 1))

    @property
    def shape(self) -> tuple[int, int]:
        return (self.x.size, self.y.size)

    @property
    def hx(self) -> float:
        return self.domain.L / self.domain.nx

    @property
    def hy(self) -> float:
        return self.domain.H / self.domain.ny

    @cached_property
    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x, self.y, indexing="ij")

    @cached_property
    def tags(self) -> np.ndarray:
        """Boundary tag of every node (object array of strings)."""
        t = np.full(self.shape, INTERIOR, dtype=object)
        t[-1, :] = G1
        t[:, 0] = G2
        t[:, -1] = G2
        t[0, :] = G0
        return t

    def mask(self, *segments: str) -> np.ndarray:
        return np.isin(self.tags, segments)


def classify_boundary(point, domain: Domain) -> str:
    """Return the boundary segment tag of ``point`` in the closed rectangle.

    Raises :class:`DomainError` for points outside the closure.
    """
    x, y = float(point[0]), float(point[1])
    tol = _BOUNDARY_ATOL * max(domain.L, domain.H)
    if x < -tol or x > domain.L + tol or y < -tol or y > domain.H + tol:
        raise DomainError(f"point ({x}, {y}) lies outside [0, {domain.L}] x [0, {domain.H}]")
    if abs(x) <= tol:
        return G0
    if abs(y) <= tol or abs(y - domain.H) <= tol:
        return G2
    if abs(x - domain.L) <= tol:
        return G1
    return INTERIOR


def _check_shape(f, shape):
    if np.shape(f) != tuple(shape):
        raise ShapeError(f"field shape {np.shape(f)} does not match grid shape {tuple(shape)}")


def inner_l2(f: np.ndarray, g: np.ndarray, grid: QuadratureGrid) -> float:
    """L2 inner product ``sum_i w_i f_i g_i`` of two fields sampled on ``grid``."""
    f = np.asarray(f, dtype=float)
    g = np.asarray(g, dtype=float)
    if f.shape != g.shape:
        raise ShapeError(f"field shapes differ: {f.shape} vs {g.shape}")
    _check_shape(f, grid.shape)
    return float(grid.wx @ (f * g) @ grid.wy)


def lp_norm(f: np.ndarray, grid: QuadratureGrid, p: float) -> float:
    """L^p norm of a sampled field (``p = inf`` gives the nodal maximum)."""
    f = np.abs(np.asarray(f, dtype=float))
    _check_shape(f, grid.shape)
    if np.isinf(p):
        return float(f.max())
    return float(grid.wx @ f**p @ grid.wy) ** (1.0 / p)
