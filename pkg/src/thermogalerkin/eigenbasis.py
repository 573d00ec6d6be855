"""Eigenpairs of -Laplace with psi = 0 on G0 u G2 and d(psi)/dx = 0 on G1.

On the rectangle the modes separate::

    psi(x, y) = norm * sin((kx - 1/2) pi x / L) * sin(my pi y / H)
    lambda    = ((kx - 1/2) pi / L)**2 + (my pi / H)**2

with ``norm = 2 / sqrt(L H)`` so that the mass matrix is the identity and
the stiffness matrix is ``diag(lambda)``.

All grid operations exploit the tensor structure: a modal vector is
scattered into a ``(Kx, My)`` coefficient table and synthesized with two
small matrix products.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import ArpackNoConvergence, eigsh

from .errors import DomainError, NumericalError, ShapeError
from .geometry import G0, G2, Domain, QuadratureGrid

BOUNDARY_WARN_TOL = 1e-8


@dataclass(frozen=True)
class EigenPair:
    lam: float
    kx: int
    my: int
    norm: float

    def mu_x(self, L: float) -> float:
        return (self.kx - 0.5) * np.pi / L

    def mu_y(self, H: float) -> float:
        return self.my * np.pi / H


def _lambda(kx, my, L, H):
    return ((kx - 0.5) * np.pi / L) ** 2 + (my * np.pi / H) ** 2


def enumerate_modes(domain: Domain, m: int) -> list[EigenPair]:
    """The ``m`` lowest modes, ties broken by ``(kx, my)``."""
    if m < 1:
        raise DomainError(f"basis size must be >= 1, got {m}")
    k = np.arange(1, m + 1)
    KX, MY = np.meshgrid(k, k, indexing="ij")
    lam = _lambda(KX, MY, domain.L, domain.H).ravel()
    # 12 significant digits so that analytically equal eigenvalues tie exactly
    key = np.array([float(f"{v:.12e}") for v in lam])
    order = np.lexsort((MY.ravel(), KX.ravel(), key))[:m]
    norm = 2.0 / np.sqrt(domain.area)
    return [EigenPair(float(lam[i]), int(KX.ravel()[i]), int(MY.ravel()[i]), norm)
            for i in order]


class EigenBasis:
    """Ordered truncated eigenbasis on a domain.

    Parameters
    ----------
    domain : Domain
    pairs : list of EigenPair
        Sorted by ascending eigenvalue.
    """

    def __init__(self, domain: Domain, pairs: list[EigenPair]):
        self.domain = domain
        self.pairs = list(pairs)
        self.lam = np.array([p.lam for p in self.pairs])
        self.kx = np.array([p.kx for p in self.pairs])
        self.my = np.array([p.my for p in self.pairs])
        self.norm = 2.0 / np.sqrt(domain.area)
        self.Kx = int(self.kx.max())
        self.My = int(self.my.max())

    @property
    def m(self) -> int:
        return len(self.pairs)

    def __len__(self):
        return self.m

    @property
    def mu_x(self) -> np.ndarray:
        return (np.arange(1, self.Kx + 1) - 0.5) * np.pi / self.domain.L

    @property
    def mu_y(self) -> np.ndarray:
        return np.arange(1, self.My + 1) * np.pi / self.domain.H

    # 1-D factor tables -------------------------------------------------

    def x_table(self, x, deriv: int = 0) -> np.ndarray:
        """``d^deriv/dx^deriv sin(mu_k x)`` for k = 1..Kx, shape ``(Kx, len(x))``."""
        arg = np.outer(self.mu_x, np.asarray(x, dtype=float))
        return _sin_deriv(arg, self.mu_x[:, None], deriv)

    def y_table(self, y, deriv: int = 0) -> np.ndarray:
        arg = np.outer(self.mu_y, np.asarray(y, dtype=float))
        return _sin_deriv(arg, self.mu_y[:, None], deriv)

    # modal <-> table ---------------------------------------------------

    def to_table(self, coeffs) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (self.m,):
            raise ShapeError(f"expected {self.m} coefficients, got shape {coeffs.shape}")
        table = np.zeros((self.Kx, self.My))
        table[self.kx - 1, self.my - 1] = coeffs
        return table

    def from_table(self, table: np.ndarray) -> np.ndarray:
        return table[self.kx - 1, self.my - 1]

    # synthesis ---------------------------------------------------------

    def synthesize(self, coeffs, x, y, dx: int = 0, dy: int = 0) -> np.ndarray:
        """Evaluate ``d^dx/dx d^dy/dy sum_j c_j psi_j`` on the tensor grid ``x`` by ``y``."""
        table = self.to_table(coeffs)
        return self.norm * self.x_table(x, dx).T @ table @ self.y_table(y, dy)

    def laplacian(self, coeffs, x, y) -> np.ndarray:
        return self.synthesize(-self.lam * np.asarray(coeffs, dtype=float), x, y)

    def evaluate(self, j: int, x, y, dx: int = 0, dy: int = 0) -> np.ndarray:
        """Mode ``j`` (0-based) on the tensor grid."""
        e = np.zeros(self.m)
        e[j] = 1.0
        return self.synthesize(e, x, y, dx, dy)

    def evaluate_points(self, j: int, x, y) -> np.ndarray:
        """Mode ``j`` at scattered points (broadcasting ``x`` and ``y``)."""
        p = self.pairs[j]
        return p.norm * np.sin(p.mu_x(self.domain.L) * np.asarray(x)) \
            * np.sin(p.mu_y(self.domain.H) * np.asarray(y))

    # analysis ----------------------------------------------------------

    def project_samples(self, f: np.ndarray, grid: QuadratureGrid) -> np.ndarray:
        """``(f | psi_j)`` for samples ``f`` on the quadrature grid."""
        f = np.asarray(f, dtype=float)
        if f.shape != grid.shape:
            raise ShapeError(f"field shape {f.shape} does not match grid shape {grid.shape}")
        tx = self._weighted_tables(grid)
        table = self.norm * tx[0] @ f @ tx[1].T
        return self.from_table(table)

    def project_stack(self, fs: np.ndarray, grid: QuadratureGrid) -> np.ndarray:
        """Project a stack of fields ``(n, Nx, Ny)``; returns ``(m, n)``."""
        tx, ty = self._weighted_tables(grid)
        tables = self.norm * np.einsum("ai,nij,bj->nab", tx, fs, ty, optimize=True)
        return tables[:, self.kx - 1, self.my - 1].T

    def _weighted_tables(self, grid: QuadratureGrid):
        key = id(grid)
        cache = self.__dict__.setdefault("_wt_cache", {})
        if key not in cache:
            cache.clear()
            cache[key] = (grid, self.x_table(grid.x) * grid.wx, self.y_table(grid.y) * grid.wy)
        return cache[key][1:]

    def gram(self, grid: QuadratureGrid) -> np.ndarray:
        """Mass matrix ``(psi_i | psi_j)`` by quadrature."""
        X = self.x_table(grid.x)
        Y = self.y_table(grid.y)
        gx = (X * grid.wx) @ X.T
        gy = (Y * grid.wy) @ Y.T
        return self.norm**2 * gx[np.ix_(self.kx - 1, self.kx - 1)] * gy[np.ix_(self.my - 1, self.my - 1)]

    def stiffness(self, grid: QuadratureGrid) -> np.ndarray:
        """Gradient pairing ``((psi_i, psi_j))`` by quadrature."""
        X, Xd = self.x_table(grid.x), self.x_table(grid.x, 1)
        Y, Yd = self.y_table(grid.y), self.y_table(grid.y, 1)
        gx, gxd = (X * grid.wx) @ X.T, (Xd * grid.wx) @ Xd.T
        gy, gyd = (Y * grid.wy) @ Y.T, (Yd * grid.wy) @ Yd.T
        ix, iy = np.ix_(self.kx - 1, self.kx - 1), np.ix_(self.my - 1, self.my - 1)
        return self.norm**2 * (gxd[ix] * gy[iy] + gx[ix] * gyd[iy])


def _sin_deriv(arg, mu, deriv):
    # d^n/dx^n sin(mu x) = mu^n sin(mu x + n pi / 2)
    phase = deriv % 4
    base = (np.sin, np.cos, lambda a: -np.sin(a), lambda a: -np.cos(a))[phase](arg)
    return base * mu**deriv


def build_basis(domain: Domain, m: int) -> EigenBasis:
    """The ``m`` lowest-eigenvalue separable modes of the mixed problem."""
    return EigenBasis(domain, enumerate_modes(domain, m))


def project(field, basis: EigenBasis, grid: QuadratureGrid | None = None) -> np.ndarray:
    """Coefficients ``c_j = (field | psi_j)``.

    ``field`` is either an array sampled on ``grid`` or a callable
    ``f(X, Y)``. For callables the Dirichlet edges are scanned on the
    sample grid and a warning is issued if the field does not vanish there.
    """
    grid = basis.domain.quadrature if grid is None else grid
    if callable(field):
        check_dirichlet_trace(field, basis.domain)
        field = field(*grid.mesh)
    return basis.project_samples(field, grid)


def dirichlet_trace_max(field, domain: Domain) -> float:
    s = domain.samples
    X, Y = s.mesh
    mask = s.mask(G0, G2)
    return float(np.max(np.abs(np.asarray(field(X[mask], Y[mask]), dtype=float)), initial=0.0))


def check_dirichlet_trace(field, domain: Domain, tol: float = BOUNDARY_WARN_TOL) -> float:
    worst = dirichlet_trace_max(field, domain)
    if worst > tol:
        warnings.warn(f"field does not vanish on the Dirichlet boundary (max |f| = {worst:.3e})",
                      stacklevel=3)
    return worst


def fd_eigen_oracle(domain: Domain, n: int, count: int, ny: int | None = None):
    """Smallest eigenpairs of the 5-point finite-difference mixed Laplacian.

    Unknowns sit at ``x_i = i hx`` (``i = 1..n``, the last on ``G1``) and
    ``y_j = j hy`` (``j = 1..ny-1``). Dirichlet rows are eliminated; the
    Neumann row uses the mirror ghost ``u_{n+1} = u_{n-1}`` and is
    symmetrized by the diagonal similarity that halves its weight.

    Returns
    -------
    list of (float, ndarray)
        Eigenvalues ascending, each with its eigenvector reshaped to
        ``(n, ny - 1)`` on the unknown nodes.
    """
    ny = n if ny is None else ny
    if n < 16 or ny < 16:
        raise DomainError(f"finite-difference oracle needs n >= 16, got {n}")
    hx, hy = domain.L / n, domain.H / ny
    ax = sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1], format="lil")
    ax[n - 1, n - 2] = -np.sqrt(2.0)
    ax[n - 2, n - 1] = -np.sqrt(2.0)
    ax = ax.tocsr() / hx**2
    ay = sp.diags([-np.ones(ny - 2), 2 * np.ones(ny - 1), -np.ones(ny - 2)], [-1, 0, 1]) / hy**2
    A = (sp.kron(ax, sp.identity(ny - 1)) + sp.kron(sp.identity(n), ay)).tocsc()
    try:
        vals, vecs = eigsh(A, k=count, sigma=0.0, which="LM", maxiter=10 * A.shape[0])
    except ArpackNoConvergence as exc:
        raise NumericalError(
            f"ARPACK did not converge: {len(exc.eigenvalues)} of {count} eigenvalues found "
            f"(matrix size {A.shape[0]})") from exc
    order = np.argsort(vals)
    scale = np.ones(n)
    scale[-1] = np.sqrt(2.0)  # undo the symmetrizing similarity on the Neumann row
    out = []
    for k in order:
        v = vecs[:, k].reshape(n, ny - 1) * scale[:, None]
        out.append((float(vals[k]), v))
    return out
