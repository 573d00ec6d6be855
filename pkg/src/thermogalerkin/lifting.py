"""Harmonic lifting of the wall temperature and the affine temperature maps.

The lifting solves::

    Laplace(theta_s) = 0  in the rectangle,
    theta_s = 0 on G0,  theta_s = 1 on G2,  d(theta_s)/dx = 0 on G1.

Separation of variables gives::

    theta_s = 1 - sum_{m odd} 4/(m pi) sin(k y) cosh(k (L - x)) / cosh(k L),   k = m pi / H.

Each cosh ratio splits as ``exp(-k x) + r_k(x)`` with a remainder
``r_k`` that is ``O(exp(-k L))`` uniformly in the domain. The
``exp(-k x)`` part sums to ``(2/pi) arctan(sin(pi y/H) / sinh(pi x/H))``,
which carries the whole corner singularity, so only the smooth remainder
series is truncated (``accelerated=True``). ``accelerated=False`` evaluates
the plain truncated series instead.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .errors import DegenerateScalingError, DomainError, NumericalError, ShapeError
from .geometry import Domain, QuadratureGrid, lp_norm

SOBOLEV_P = (1.0, 1.25, 1.5, 1.75, 1.9)
DEFAULT_DEPTH = 2000


@dataclass(frozen=True)
class PhysicalParams:
    a: float = 0.1
    theta_inf: float = 0.0
    theta_p: float = 1.0
    T: float = 1.0

    def __post_init__(self):
        if not self.a > 0:
            raise DomainError(f"diffusivity a must be positive, got {self.a}")
        if not self.T > 0:
            raise DomainError(f"time horizon T must be positive, got {self.T}")
        if self.theta_p == self.theta_inf:
            raise DegenerateScalingError(
                f"theta_p == theta_inf == {self.theta_p}: temperature scaling degenerates")


def nondimensionalize(theta_raw, params: PhysicalParams):
    """``(theta - theta_inf) / (theta_p - theta_inf)``."""
    if params.theta_p == params.theta_inf:
        raise DegenerateScalingError("theta_p == theta_inf")
    return (np.asarray(theta_raw, dtype=float) - params.theta_inf) / (params.theta_p - params.theta_inf)


def redimensionalize(theta_star, params: PhysicalParams):
    """Inverse of :func:`nondimensionalize`."""
    return params.theta_inf + (params.theta_p - params.theta_inf) * np.asarray(theta_star, dtype=float)


def homogenize(theta_star_0, lifting_values):
    """``theta_0 = theta*_0 - theta_s`` pointwise."""
    a = np.asarray(theta_star_0, dtype=float)
    b = np.asarray(lifting_values, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"field shapes differ: {a.shape} vs {b.shape}")
    return a - b


# closed-form evaluation ------------------------------------------------------

def _odd_wavenumbers(depth: int, H: float):
    m = 2 * np.arange(depth) + 1
    return m, m * np.pi / H


def _singular_part(x, y, H):
    """``(2/pi) arctan(sin(pi y/H) / sinh(pi x/H))`` and its gradient."""
    s = np.sin(np.pi * y / H)
    c = np.cos(np.pi * y / H)
    S = np.sinh(np.pi * x / H)
    C = np.cosh(np.pi * x / H)
    val = (2.0 / np.pi) * np.arctan2(s, S)
    den = S**2 + s**2
    with np.errstate(divide="ignore", invalid="ignore"):
        gx = -(2.0 / H) * s * C / den
        gy = (2.0 / H) * c * S / den
    return val, gx, gy


def _series(x, y, L, H, depth, remainder_only):
    """Sum of ``4/(m pi) sin(k y) q_k(x)`` and gradient, over ``depth`` odd m.

    ``q_k`` is the cosh ratio (``remainder_only=False``) or its remainder
    after removing ``exp(-k x)``. Written with decaying exponentials only,
    so no overflow for any depth.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    val = np.zeros(np.broadcast(x, y).shape)
    gx = np.zeros_like(val)
    gy = np.zeros_like(val)
    m_all, k_all = _odd_wavenumbers(depth, H)
    xs, ys = x[..., None], y[..., None]
    chunk = max(1, min(depth, 4_000_000 // max(val.size, 1)))
    for start in range(0, depth, chunk):
        m = m_all[start:start + chunk]
        k = k_all[start:start + chunk]
        if remainder_only and k[0] * L > 745.0:
            break  # exp(-k L) underflows: remaining terms are exactly zero in double
        amp = 4.0 / (m * np.pi)
        denom = 1.0 + np.exp(-2.0 * k * L)
        e_far_m = np.exp(-k * (2.0 * L - xs))
        e_far_p = np.exp(-k * (2.0 * L + xs))
        if remainder_only:
            q = (e_far_m - e_far_p) / denom
            dq = k * (e_far_m + e_far_p) / denom
        else:
            e_near = np.exp(-k * xs)
            q = (e_near + e_far_m) / denom
            dq = k * (-e_near + e_far_m) / denom
        sin_ky = np.sin(k * ys)
        val += np.sum(amp * sin_ky * q, axis=-1)
        gx += np.sum(amp * sin_ky * dq, axis=-1)
        gy += np.sum(amp * k * np.cos(k * ys) * q, axis=-1)
    return val, gx, gy


def _series_tensor(x, y, L, H, depth, remainder_only):
    """Same sum as :func:`_series` on the tensor grid ``x`` by ``y``.

    Every term is a product ``q_k(x) sin(k y)``, so the sum is a matrix
    product of two 1-D tables.
    """
    m, k = _odd_wavenumbers(depth, H)
    if remainder_only:
        keep = k * L <= 745.0
        m, k = m[keep], k[keep]
    amp = 4.0 / (m * np.pi)
    xs = np.asarray(x, dtype=float)[None, :]
    ys = np.asarray(y, dtype=float)[None, :]
    kc = k[:, None]
    denom = 1.0 + np.exp(-2.0 * kc * L)
    e_far_m = np.exp(-kc * (2.0 * L - xs))
    e_far_p = np.exp(-kc * (2.0 * L + xs))
    if remainder_only:
        q = (e_far_m - e_far_p) / denom
        dq = kc * (e_far_m + e_far_p) / denom
    else:
        e_near = np.exp(-kc * xs)
        q = (e_near + e_far_m) / denom
        dq = kc * (-e_near + e_far_m) / denom
    sy = amp[:, None] * np.sin(kc * ys)
    cy = (amp * k)[:, None] * np.cos(kc * ys)
    return q.T @ sy, dq.T @ sy, q.T @ cy


def lifting_value_and_gradient(x, y, domain: Domain, depth: int = DEFAULT_DEPTH,
                               accelerated: bool = True, tensor: bool = False):
    """theta_s and its gradient.

    With ``tensor=False`` ``x`` and ``y`` are broadcast point arrays; with
    ``tensor=True`` they are 1-D axes and the result has shape
    ``(len(x), len(y))``.
    """
    if depth < 1:
        raise DomainError(f"series depth must be >= 1, got {depth}")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    L, H = domain.L, domain.H
    series = _series_tensor if tensor else _series
    if tensor:
        x1, y1 = x, y
        x, y = np.meshgrid(x1, y1, indexing="ij")
    else:
        x1, y1 = x, y
    if accelerated:
        v0, gx0, gy0 = _singular_part(x, y, H)
        v1, gx1, gy1 = series(x1, y1, L, H, depth, remainder_only=True)
        val, gx, gy = 1.0 - v0 - v1, -gx0 - gx1, -gy0 - gy1
    else:
        v1, gx1, gy1 = series(x1, y1, L, H, depth, remainder_only=False)
        val, gx, gy = 1.0 - v1, -gx1, -gy1
    # corner convention: (0, 0) and (0, H) belong to G0
    corner = (x == 0.0) & ((y == 0.0) | (y == H))
    if np.any(corner):
        val = np.where(corner, 0.0, val)
        gx = np.where(corner, np.nan, gx)
        gy = np.where(corner, np.nan, gy)
    return val, gx, gy


@dataclass(frozen=True, eq=False)
class LiftingField:
    """theta_s on the domain's sample and quadrature grids.

    ``samples``/``gradient`` live on the uniform sample grid (boundary
    included; the gradient is NaN at the two singular corners),
    ``quad_values``/``quad_gradient`` on the quadrature grid.
    """

    domain: Domain
    series_depth: int
    accelerated: bool
    samples: np.ndarray
    gradient: tuple[np.ndarray, np.ndarray]
    quad_values: np.ndarray
    quad_gradient: tuple[np.ndarray, np.ndarray]
    sobolev_report: dict = field(default_factory=dict)

    def __call__(self, x, y):
        return lifting_value_and_gradient(x, y, self.domain, self.series_depth, self.accelerated)[0]

    def value_and_gradient(self, x, y):
        return lifting_value_and_gradient(x, y, self.domain, self.series_depth, self.accelerated)


def gradient_lp_norms(domain: Domain, p_values=SOBOLEV_P, depth: int = DEFAULT_DEPTH,
                      accelerated: bool = True, grid: QuadratureGrid | None = None) -> dict:
    """``||grad theta_s||_{L^p}`` by quadrature for each ``p``."""
    grid = domain.quadrature if grid is None else grid
    _, gx, gy = lifting_value_and_gradient(grid.x, grid.y, domain, depth, accelerated, tensor=True)
    mag = np.hypot(gx, gy)
    return {float(p): lp_norm(mag, grid, p) for p in p_values}


def solve_lifting(domain: Domain, depth: int = DEFAULT_DEPTH, accelerated: bool = True,
                  p_values=SOBOLEV_P) -> LiftingField:
    """Evaluate theta_s, its term-wise gradient and the L^p gradient report."""
    s, q = domain.samples, domain.quadrature
    val, gx, gy = lifting_value_and_gradient(s.x, s.y, domain, depth, accelerated, tensor=True)
    qval, qgx, qgy = lifting_value_and_gradient(q.x, q.y, domain, depth, accelerated, tensor=True)
    for arr in (qval, qgx, qgy):
        if not np.all(np.isfinite(arr)):
            raise NumericalError("non-finite lifting values on the quadrature grid")
    mag = np.hypot(qgx, qgy)
    report = {float(p): lp_norm(mag, q, p) for p in p_values}
    return LiftingField(domain, depth, accelerated, val, (gx, gy), qval, (qgx, qgy), report)


def harmonicity_residual(values: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """5-point stencil residual ``h^2 * Laplace_h(u)`` at interior nodes.

    Scaled by ``h^2 = hx * hy`` so it is the raw stencil sum on square
    cells. Shape ``(Nx - 2, Ny - 2)``.
    """
    u = np.asarray(values, dtype=float)
    lap = (u[2:, 1:-1] - 2 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / hx**2 \
        + (u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]) / hy**2
    return lap * hx * hy


def corner_distance(X, Y, domain: Domain) -> np.ndarray:
    """Distance to the nearer singular corner ``(0, 0)`` or ``(0, H)``."""
    return np.minimum(np.hypot(X, Y), np.hypot(X, Y - domain.H))


def fd_lifting_oracle(domain: Domain, n: int, ny: int | None = None,
                      wall_value: float = 1.0) -> np.ndarray:
    """5-point finite-difference solution of the lifting problem.

    Uses the uniform ``(n + 1) x (ny + 1)`` node grid; the Neumann edge
    takes the mirror ghost node. ``wall_value`` is the Dirichlet datum on
    ``G2``. Returns the full node array including boundary values (corners
    on ``x = 0`` set to 0).
    """
    ny = n if ny is None else ny
    if n < 32 or ny < 32:
        raise DomainError(f"finite-difference lifting needs n >= 32, got {n}")
    hx, hy = domain.L / n, domain.H / ny
    nyi = ny - 1
    dx = sp.diags([np.ones(n - 1), -2 * np.ones(n), np.ones(n - 1)], [-1, 0, 1], format="lil")
    dx[n - 1, n - 2] = 2.0
    dx = dx.tocsr() / hx**2
    dy = sp.diags([np.ones(nyi - 1), -2 * np.ones(nyi), np.ones(nyi - 1)], [-1, 0, 1]) / hy**2
    A = (sp.kron(dx, sp.identity(nyi)) + sp.kron(sp.identity(n), dy)).tocsc()
    rhs = np.zeros((n, nyi))
    rhs[:, 0] -= wall_value / hy**2
    rhs[:, -1] -= wall_value / hy**2
    u = spsolve(A, rhs.ravel())
    if not np.all(np.isfinite(u)):
        raise NumericalError("finite-difference lifting solve produced non-finite values")
    full = np.full((n + 1, ny + 1), float(wall_value))
    full[1:, 1:-1] = u.reshape(n, nyi)
    full[0, :] = 0.0
    return full
