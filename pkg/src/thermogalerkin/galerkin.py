"""Modal Galerkin system for the homogenized energy equation.

With ``theta_m(t) = sum_j g_j(t) psi_j`` and an orthonormal eigenbasis the
Galerkin equations reduce to the linear ODE system::

    g' + (a Lambda + B(t)) g = f(t),     Lambda = diag(lambda_j),

where ``B_jk(t) = b(v(t), psi_k, psi_j)`` and ``f_j(t) = (h(t) | psi_j)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.linalg as sla

from .eigenbasis import EigenBasis, build_basis, dirichlet_trace_max
from .errors import BlowupError, ConfigError, NumericalError
from .geometry import Domain, QuadratureGrid
from .lifting import LiftingField
from .velocity import (Forcing, VelocityField, assemble_convection, build_forcing,  # noqa: F401
                       convection_frames, make_velocity)

SCHEMES = ("crank-nicolson", "backward-euler")
BOUNDARY_PRECONDITION_TOL = 1e-4


@dataclass(frozen=True)
class SolverConfig:
    m: int = 32
    dt: float = 1e-3
    T: float = 1.0
    scheme: str = "crank-nicolson"
    snapshot_stride: int = 100

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError(f"solver.m must be >= 1, got {self.m}")
        if not (self.dt > 0 and self.T > 0 and self.dt <= self.T * (1 + 1e-12)):
            raise ConfigError(f"need 0 < dt <= T, got dt={self.dt}, T={self.T}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"solver.scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.snapshot_stride < 1:
            raise ConfigError("solver.snapshot_stride must be >= 1")
        n = self.T / self.dt
        if abs(n - round(n)) > 1e-9 * max(n, 1.0):
            raise ConfigError(f"T / dt must be an integer, got {n}")

    @property
    def n_steps(self) -> int:
        return int(round(self.T / self.dt))


@dataclass
class GalerkinState:
    t: float
    g: np.ndarray
    dg: np.ndarray


@dataclass
class InitialProjection:
    """Projected initial data and its truncation errors."""

    coeffs: np.ndarray
    l2_error: float
    h1_error: float | None
    boundary_max: float
    warnings: list = field(default_factory=list)


def _fd_gradient(f, X, Y, h):
    gx = (f(X + h, Y) - f(X - h, Y)) / (2 * h)
    gy = (f(X, Y + h) - f(X, Y - h)) / (2 * h)
    return gx, gy


def initial_coefficients(theta0, basis: EigenBasis, grid: QuadratureGrid | None = None,
                         gradient: Callable | None = None) -> InitialProjection:
    """L2 projection of the initial field onto the basis.

    ``theta0`` is a callable ``f(X, Y)``, an array on the quadrature grid or
    ``None`` (zero data). The H1-seminorm truncation error uses
    ``gradient`` when given, else centred differences of the callable.
    """
    grid = basis.domain.quadrature if grid is None else grid
    m = basis.m
    if theta0 is None:
        return InitialProjection(np.zeros(m), 0.0, 0.0, 0.0)
    notes = []
    bmax = 0.0
    X, Y = grid.mesh
    if callable(theta0):
        bmax = dirichlet_trace_max(theta0, basis.domain)
        if bmax > BOUNDARY_PRECONDITION_TOL:
            notes.append(f"initial field does not vanish on G0/G2 (max {bmax:.3e})")
        values = theta0(X, Y)
    else:
        values = np.asarray(theta0, dtype=float)
    c = basis.project_samples(values, grid)
    resid = values - basis.synthesize(c, grid.x, grid.y)
    l2 = float(np.sqrt(max(grid.wx @ resid**2 @ grid.wy, 0.0)))
    h1 = None
    if callable(theta0):
        if gradient is not None:
            gx, gy = gradient(X, Y)
        else:
            gx, gy = _fd_gradient(theta0, X, Y, 1e-5 * min(basis.domain.L, basis.domain.H))
        rx = gx - basis.synthesize(c, grid.x, grid.y, dx=1)
        ry = gy - basis.synthesize(c, grid.x, grid.y, dy=1)
        h1 = float(np.sqrt(max(grid.wx @ (rx**2 + ry**2) @ grid.wy, 0.0)))
    return InitialProjection(c, l2, h1, bmax, notes)


def step(state: GalerkinState, dt: float, a: float, lam: np.ndarray, B: np.ndarray,
         f: np.ndarray, scheme: str = "crank-nicolson", B_new=None, f_new=None,
         lu=None) -> GalerkinState:
    """Advance one step.

    ``B`` and ``f`` are evaluated at the half step (Crank-Nicolson) or the
    new time level (backward Euler). ``B_new``/``f_new`` give the operator
    at the new time level for the stored derivative (default ``B``, ``f``).
    ``lu`` is an optional pre-factorized step matrix.
    """
    A = a * np.diag(lam) + B
    I = np.eye(len(lam))
    if scheme == "crank-nicolson":
        lhs = I + 0.5 * dt * A
        rhs = state.g - 0.5 * dt * (A @ state.g) + dt * f
    elif scheme == "backward-euler":
        lhs = I + dt * A
        rhs = state.g + dt * f
    else:
        raise ConfigError(f"unknown scheme {scheme!r}")
    if lu is None:
        lu = _factor(lhs)
    g = sla.lu_solve(lu, rhs)
    B_new = B if B_new is None else B_new
    f_new = f if f_new is None else f_new
    dg = f_new - a * lam * g - B_new @ g
    return GalerkinState(state.t + dt, g, dg)


def _factor(lhs):
    lu = sla.lu_factor(lhs, check_finite=False)
    piv = np.abs(np.diag(lu[0]))
    if not np.all(np.isfinite(piv)) or piv.min() <= 1e-14 * max(piv.max(), 1.0):
        raise NumericalError("step matrix is singular to working precision")
    return lu


@dataclass(eq=False)
class Problem:
    """Data of the homogenized problem independent of the basis size.

    ``lifting=None`` drops the lifting forcing (problem with ``h`` given by
    ``source`` only). ``source`` is an optional steady forcing ``h(X, Y)``.
    """

    domain: Domain
    a: float
    velocity: VelocityField
    T: float = 1.0
    lifting: LiftingField | None = None
    theta0: Callable | None = None
    theta0_gradient: Callable | None = None
    source: Callable | None = None

    def discretize(self, m: int) -> "Discretization":
        basis = build_basis(self.domain, m)
        grid = self.domain.quadrature
        conv = convection_frames(self.velocity, basis, grid)
        forcing = self.build_forcing(basis)
        init = initial_coefficients(self.theta0, basis, grid, self.theta0_gradient)
        return Discretization(self, basis, conv, forcing, init)

    def build_forcing(self, basis: EigenBasis) -> Forcing:
        grid = self.domain.quadrature
        if self.lifting is None or self.velocity.is_zero:
            forcing = Forcing.zero(self.velocity, basis.m)
        else:
            forcing = build_forcing(self.velocity, self.lifting, basis, grid=grid)
        if self.source is not None:
            forcing = forcing.with_source(self.source(*grid.mesh), basis, grid)
        return forcing


@dataclass(eq=False)
class Discretization:
    problem: Problem
    basis: EigenBasis
    convection: np.ndarray
    forcing: Forcing
    initial: InitialProjection

    def B(self, t: float) -> np.ndarray:
        return np.tensordot(self.problem.velocity.frame_weights(t), self.convection, axes=1)


@dataclass(eq=False)
class Trajectory:
    """Result of :func:`run`: coefficients and derivatives at every step."""

    config: SolverConfig
    basis: EigenBasis
    times: np.ndarray
    g: np.ndarray
    dg: np.ndarray
    initial: InitialProjection
    ledger: object = None
    aborted: str | None = None

    @property
    def snapshot_indices(self) -> np.ndarray:
        n = len(self.times) - 1
        idx = list(range(0, n + 1, self.config.snapshot_stride))
        if idx[-1] != n:
            idx.append(n)
        return np.array(idx)

    def field(self, n: int, x, y, which: str = "theta") -> np.ndarray:
        """Synthesize step ``n`` on the tensor grid ``x`` by ``y``.

        ``which`` is ``theta``, ``laplacian``, ``dtheta`` (time derivative),
        ``dxx``, ``dxy`` or ``dyy``.
        """
        b = self.basis
        if which == "theta":
            return b.synthesize(self.g[n], x, y)
        if which == "laplacian":
            return b.laplacian(self.g[n], x, y)
        if which == "dtheta":
            return b.synthesize(self.dg[n], x, y)
        d = {"dxx": (2, 0), "dxy": (1, 1), "dyy": (0, 2)}[which]
        return b.synthesize(self.g[n], x, y, *d)

    def final_state(self) -> GalerkinState:
        return GalerkinState(float(self.times[-1]), self.g[-1], self.dg[-1])


def run(problem: Problem, config: SolverConfig, record: bool = True,
        discretization: Discretization | None = None,
        ledger_options: dict | None = None) -> Trajectory:
    """Fixed-step integration of the modal system from 0 to ``T``.

    Every accepted state is fed to an :class:`~thermogalerkin.estimates.EstimateLedger`
    (built with ``ledger_options``) when ``record`` is true. Non-finite coefficients abort with
    :class:`BlowupError` carrying the trajectory up to the last finite step.
    """
    from .estimates import EstimateLedger

    disc = problem.discretize(config.m) if discretization is None else discretization
    basis, forcing, vel = disc.basis, disc.forcing, problem.velocity
    lam, a, dt = basis.lam, problem.a, config.dt
    n_steps = config.n_steps
    ledger = EstimateLedger(basis, a, dt, **(ledger_options or {})) if record else None

    g0 = disc.initial.coeffs.copy()
    state = GalerkinState(0.0, g0, forcing.modal(0.0) - a * lam * g0 - disc.B(0.0) @ g0)
    times = np.empty(n_steps + 1)
    G = np.empty((n_steps + 1, basis.m))
    DG = np.empty_like(G)
    times[0], G[0], DG[0] = 0.0, state.g, state.dg
    if ledger is not None:
        ledger.record_step(state, forcing.norm_sq(0.0), vel.sup_norm(0.0))

    steady = vel.kind in ("zero", "steady-vortex")
    I = np.eye(basis.m)
    lu_cache = None
    for n in range(n_steps):
        t_new = (n + 1) * dt
        t_eval = n * dt + 0.5 * dt if config.scheme == "crank-nicolson" else t_new
        B = disc.B(t_eval)
        f = forcing.modal(t_eval)
        if steady and lu_cache is not None:
            lu = lu_cache
        else:
            theta = 0.5 if config.scheme == "crank-nicolson" else 1.0
            lu = _factor(I + theta * dt * (a * np.diag(lam) + B))
            if steady:
                lu_cache = lu
        B_new = B if steady else disc.B(t_new)
        f_new = forcing.modal(t_new)
        new = step(state, dt, a, lam, B, f, config.scheme, B_new, f_new, lu=lu)
        new.t = t_new
        if not (np.all(np.isfinite(new.g)) and np.all(np.isfinite(new.dg))):
            traj = Trajectory(config, basis, times[:n + 1].copy(), G[:n + 1].copy(),
                              DG[:n + 1].copy(), disc.initial, ledger,
                              aborted=f"non-finite coefficients at step {n + 1} (t={t_new:g})")
            if ledger is not None:
                ledger.finalize()
            raise BlowupError(traj.aborted, traj)
        state = new
        times[n + 1], G[n + 1], DG[n + 1] = t_new, state.g, state.dg
        if ledger is not None:
            ledger.record_step(state, forcing.norm_sq(t_new), vel.sup_norm(t_new))
    if ledger is not None:
        ledger.finalize()
    return Trajectory(config, basis, times, G, DG, disc.initial, ledger)


def zero_velocity(domain: Domain, T: float = 1.0) -> VelocityField:
    return make_velocity("zero", 0.0, domain, T)


def with_m(config: SolverConfig, m: int) -> SolverConfig:
    return replace(config, m=m)


def smooth_bump(domain: Domain, amplitude: float = 1.0):
    """``A (x/L)(2 - x/L) (4 y (H - y) / H^2)^2`` and its gradient.

    Vanishes on ``G0`` and ``G2`` and has zero x-derivative on ``G1``.
    """
    L, H = domain.L, domain.H

    def f(X, Y):
        s = X / L
        return amplitude * s * (2 - s) * (4 * Y * (H - Y) / H**2) ** 2

    def grad(X, Y):
        s = X / L
        q = 4 * Y * (H - Y) / H**2
        gx = amplitude * (2 - 2 * s) / L * q**2
        gy = amplitude * s * (2 - s) * 2 * q * 4 * (H - 2 * Y) / H**2
        return gx, gy

    return f, grad


def single_mode(domain: Domain, index: int, amplitude: float = 1.0):
    """``A psi_index`` (1-based, eigenvalue order) and its gradient."""
    pair = build_basis(domain, index).pairs[index - 1]
    mx, my = pair.mu_x(domain.L), pair.mu_y(domain.H)

    def f(X, Y):
        return amplitude * pair.norm * np.sin(mx * X) * np.sin(my * Y)

    def grad(X, Y):
        return (amplitude * pair.norm * mx * np.cos(mx * X) * np.sin(my * Y),
                amplitude * pair.norm * my * np.sin(mx * X) * np.cos(my * Y))

    return f, grad
