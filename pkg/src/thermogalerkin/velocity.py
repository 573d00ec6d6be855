"""Prescribed divergence-free velocity fields and the lifting forcing.

A velocity field is stored as a small set of spatial *frames* combined
with time-dependent weights, ``v(x, t) = sum_i w_i(t) v_i(x)``:

* ``zero``                  one zero frame,
* ``steady-vortex``         one frame, ``w = 1``,
* ``time-modulated-vortex`` one frame, ``w = 1 + sin(2 pi t / T) / 2``,
* ``user-sampled``          one frame per file time, piecewise-linear hats.

Everything downstream that is linear in ``v`` (convection matrix, modal
forcing) is therefore assembled once per frame and recombined per step.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import minimize

from .eigenbasis import EigenBasis
from .errors import ConfigError
from .geometry import Domain, QuadratureGrid, lp_norm
from .lifting import LiftingField

KINDS = ("zero", "steady-vortex", "time-modulated-vortex", "user-sampled")
DIV_TOL = 1e-6
NORMAL_TOL = 1e-8
FORCING_P = (1.0, 1.5, 1.9)


def vortex(x, y, V0: float, L: float, H: float):
    """``v = (dPsi/dy, -dPsi/dx)`` for ``Psi = V0 sin^2(pi x/L) sin^2(pi y/H)``."""
    sx, sy = np.sin(np.pi * x / L), np.sin(np.pi * y / H)
    vx = V0 * (np.pi / H) * sx**2 * np.sin(2 * np.pi * y / H)
    vy = -V0 * (np.pi / L) * np.sin(2 * np.pi * x / L) * sy**2
    return vx, vy


def vortex_divergence(x, y, V0: float, L: float, H: float):
    # d(vx)/dx + d(vy)/dy, each term differentiated separately
    dvx_dx = V0 * (np.pi / H) * (np.pi / L) * np.sin(2 * np.pi * x / L) * np.sin(2 * np.pi * y / H)
    dvy_dy = -V0 * (np.pi / L) * np.sin(2 * np.pi * x / L) * (np.pi / H) * np.sin(2 * np.pi * y / H)
    return dvx_dx + dvy_dy


@dataclass(eq=False)
class VelocityField:
    """Time-dependent velocity built from spatial frames.

    For ``user-sampled`` fields ``frame_times``, ``grid_x``, ``grid_y``,
    ``vx`` and ``vy`` (shape ``(nt, nx, ny)``) hold the file data.
    """

    kind: str
    V0: float
    domain: Domain
    T: float = 1.0
    frame_times: np.ndarray | None = None
    grid_x: np.ndarray | None = None
    grid_y: np.ndarray | None = None
    vx: np.ndarray | None = None
    vy: np.ndarray | None = None
    _sup_cache: dict = field(default_factory=dict, repr=False)

    @property
    def analytic(self) -> bool:
        return self.kind != "user-sampled"

    @property
    def is_zero(self) -> bool:
        return self.kind == "zero" or (self.analytic and self.V0 == 0.0)

    @property
    def n_frames(self) -> int:
        return 1 if self.analytic else len(self.frame_times)

    def frame_weights(self, t: float) -> np.ndarray:
        if self.kind in ("zero", "steady-vortex"):
            return np.ones(1)
        if self.kind == "time-modulated-vortex":
            return np.array([1.0 + 0.5 * np.sin(2 * np.pi * t / self.T)])
        times = self.frame_times
        w = np.zeros(len(times))
        if len(times) == 1 or t <= times[0]:
            w[0] = 1.0
        elif t >= times[-1]:
            w[-1] = 1.0
        else:
            i = int(np.searchsorted(times, t, side="right")) - 1
            s = (t - times[i]) / (times[i + 1] - times[i])
            w[i], w[i + 1] = 1.0 - s, s
        return w

    def frame(self, i: int, x, y):
        """Spatial velocity of frame ``i`` at points ``x``, ``y``."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if self.kind == "zero":
            return np.zeros(np.broadcast(x, y).shape), np.zeros(np.broadcast(x, y).shape)
        if self.analytic:
            return vortex(x, y, self.V0, self.domain.L, self.domain.H)
        pts = np.stack(np.broadcast_arrays(x, y), axis=-1)
        ix = RegularGridInterpolator((self.grid_x, self.grid_y), self.vx[i])
        iy = RegularGridInterpolator((self.grid_x, self.grid_y), self.vy[i])
        return ix(pts), iy(pts)

    def __call__(self, x, y, t: float):
        w = self.frame_weights(t)
        vx = vy = 0.0
        for i, wi in enumerate(w):
            if wi != 0.0:
                fx, fy = self.frame(i, x, y)
                vx, vy = vx + wi * fx, vy + wi * fy
        shape = np.broadcast(np.asarray(x), np.asarray(y)).shape
        return np.broadcast_to(vx, shape).copy(), np.broadcast_to(vy, shape).copy()

    def divergence(self, t: float, x=None, y=None) -> np.ndarray:
        """Divergence at interior points.

        Analytic kinds differentiate the stream-function velocity exactly
        (``x``, ``y`` point arrays). Sampled fields use second-order
        centred differences on the file grid (``x``, ``y`` ignored).
        """
        w = self.frame_weights(t)
        if self.analytic:
            if self.kind == "zero":
                return np.zeros(np.broadcast(x, y).shape)
            return w[0] * vortex_divergence(x, y, self.V0, self.domain.L, self.domain.H)
        vx = np.tensordot(w, self.vx, axes=1)
        vy = np.tensordot(w, self.vy, axes=1)
        dvx = np.gradient(vx, self.grid_x, axis=0)
        dvy = np.gradient(vy, self.grid_y, axis=1)
        return (dvx + dvy)[1:-1, 1:-1]

    def sup_norm(self, t: float) -> float:
        """``||v(., t)||_inf`` (grid maximum polished by local optimization)."""
        w = self.frame_weights(t)
        if self.is_zero:
            return 0.0
        if self.analytic:
            if "frame" not in self._sup_cache:
                self._sup_cache["frame"] = _vortex_sup(self.V0, self.domain.L, self.domain.H)
            return abs(w[0]) * self._sup_cache["frame"]
        vx = np.tensordot(w, self.vx, axes=1)
        vy = np.tensordot(w, self.vy, axes=1)
        return float(np.hypot(vx, vy).max())


def _vortex_sup(V0, L, H, n=256):
    x = np.linspace(0, L, n + 1)
    y = np.linspace(0, H, n + 1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    speed = np.hypot(*vortex(X, Y, V0, L, H))
    i, j = np.unravel_index(np.argmax(speed), speed.shape)

    def neg(p):
        return -np.hypot(*vortex(p[0], p[1], V0, L, H))

    res = minimize(neg, [X[i, j], Y[i, j]], method="L-BFGS-B",
                   bounds=[(0, L), (0, H)], options={"ftol": 1e-15, "gtol": 1e-12})
    return float(max(speed[i, j], -res.fun))


def make_velocity(kind: str, V0: float, domain: Domain, T: float = 1.0) -> VelocityField:
    """Analytic velocity field of the given kind."""
    if kind not in KINDS or kind == "user-sampled":
        raise ConfigError(f"unknown analytic velocity kind {kind!r}; expected one of {KINDS[:3]}")
    if not np.isfinite(V0):
        raise ConfigError(f"velocity amplitude must be finite, got {V0}")
    return VelocityField(kind, float(V0), domain, T)


def sampled_velocity(times, x, y, vx, vy, domain: Domain, T: float = 1.0) -> VelocityField:
    """Velocity from arrays; ``vx``, ``vy`` have shape ``(nt, nx, ny)``."""
    times, x, y = (np.asarray(a, dtype=float) for a in (times, x, y))
    vx = np.asarray(vx, dtype=float).reshape(len(times), len(x), len(y))
    vy = np.asarray(vy, dtype=float).reshape(len(times), len(x), len(y))
    tol = 1e-9 * max(domain.L, domain.H)
    if abs(x[0]) > tol or abs(x[-1] - domain.L) > tol or abs(y[0]) > tol or abs(y[-1] - domain.H) > tol:
        raise ConfigError("sampled velocity grid must span the whole domain including its boundary")
    if np.any(np.diff(times) <= 0) or np.any(np.diff(x) <= 0) or np.any(np.diff(y) <= 0):
        raise ConfigError("sampled velocity times and coordinates must be strictly increasing")
    return VelocityField("user-sampled", float("nan"), domain, T, times, x, y, vx, vy)


def read_velocity_csv(path, domain: Domain, T: float = 1.0) -> VelocityField:
    """Read a ``t,x,y,vx,vy`` CSV on a rectilinear grid."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader)]
        if header != ["t", "x", "y", "vx", "vy"]:
            raise ConfigError(f"velocity file header must be t,x,y,vx,vy, got {header}")
        data = np.array([[float(v) for v in row] for row in reader if row])
    times, x, y = (np.unique(data[:, k]) for k in range(3))
    if data.shape[0] != len(times) * len(x) * len(y):
        raise ConfigError("velocity file is not a complete rectilinear time-space grid")
    order = np.lexsort((data[:, 2], data[:, 1], data[:, 0]))
    data = data[order]
    return sampled_velocity(times, x, y, data[:, 3], data[:, 4], domain, T)


def write_velocity_csv(path, times, x, y, vx, vy) -> None:
    vx = np.asarray(vx).reshape(len(times), len(x), len(y))
    vy = np.asarray(vy).reshape(len(times), len(x), len(y))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "y", "vx", "vy"])
        for n, t in enumerate(times):
            for i, xi in enumerate(x):
                for j, yj in enumerate(y):
                    w.writerow([repr(float(t)), repr(float(xi)), repr(float(yj)),
                                repr(float(vx[n, i, j])), repr(float(vy[n, i, j]))])


@dataclass
class ValidationReport:
    times: list
    max_div: list
    max_normal: list
    div_tol: float = DIV_TOL
    normal_tol: float = NORMAL_TOL

    @property
    def passed(self) -> bool:
        return all(d <= self.div_tol for d in self.max_div) and \
            all(n <= self.normal_tol for n in self.max_normal)

    def as_dict(self) -> dict:
        return {"times": self.times, "max_div": self.max_div, "max_normal": self.max_normal,
                "passed": self.passed}


def validate_velocity(v: VelocityField, domain: Domain, times) -> ValidationReport:
    """Interior divergence and boundary normal trace at each time."""
    if v.analytic:
        xs, ys = domain.samples.x, domain.samples.y
    else:
        xs, ys = v.grid_x, v.grid_y
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    max_div, max_normal = [], []
    for t in times:
        div = v.divergence(t, X[1:-1, 1:-1], Y[1:-1, 1:-1])
        vx, vy = v(X, Y, t)
        normal = np.concatenate([
            -vx[0, :], vx[-1, :],   # x = 0 (n = -e_x), x = L (n = +e_x)
            -vy[:, 0], vy[:, -1],   # y = 0, y = H
        ])
        max_div.append(float(np.max(np.abs(div), initial=0.0)))
        max_normal.append(float(np.max(np.abs(normal))))
    return ValidationReport([float(t) for t in times], max_div, max_normal)


# convection and forcing ----------------------------------------------------

def _mode_gradient_stack(basis: EigenBasis, grid: QuadratureGrid):
    X, Xd = basis.x_table(grid.x), basis.x_table(grid.x, 1)
    Y, Yd = basis.y_table(grid.y), basis.y_table(grid.y, 1)
    kx, my = basis.kx - 1, basis.my - 1
    gx = basis.norm * Xd[kx][:, :, None] * Y[my][:, None, :]
    gy = basis.norm * X[kx][:, :, None] * Yd[my][:, None, :]
    return gx, gy


def convection_frames(v: VelocityField, basis: EigenBasis, grid: QuadratureGrid | None = None):
    """``B_i[j, k] = int (v_i . grad psi_k) psi_j`` for every frame ``i``."""
    grid = basis.domain.quadrature if grid is None else grid
    m = basis.m
    if v.is_zero:
        return np.zeros((v.n_frames, m, m))
    gx, gy = _mode_gradient_stack(basis, grid)
    out = []
    for i in range(v.n_frames):
        vx, vy = v.frame(i, *grid.mesh)
        adv = vx[None] * gx + vy[None] * gy
        out.append(basis.project_stack(adv, grid))
    return np.array(out)


def assemble_convection(v: VelocityField, basis: EigenBasis, t: float,
                        grid: QuadratureGrid | None = None, frames=None) -> np.ndarray:
    """Convection matrix ``B_jk(t) = b(v(t), psi_k, psi_j)``."""
    frames = convection_frames(v, basis, grid) if frames is None else frames
    return np.tensordot(v.frame_weights(t), frames, axes=1)


@dataclass(eq=False)
class Forcing:
    """Modal forcing ``(h(t) | psi_j)`` with ``h = -v . grad theta_s``.

    ``frames`` has shape ``(n_frames, m)``; ``gram`` holds the L2 inner
    products of the spatial forcing frames so that ``|h(t)|^2 = w G w``.
    """

    velocity: VelocityField
    frames: np.ndarray
    gram: np.ndarray
    lp_report: dict = field(default_factory=dict)
    spatial: np.ndarray | None = field(default=None, repr=False)

    def modal(self, t: float) -> np.ndarray:
        return self.velocity.frame_weights(t) @ self.frames

    def norm_sq(self, t: float) -> float:
        w = self.velocity.frame_weights(t)
        return float(max(w @ self.gram @ w, 0.0))

    def with_source(self, source: np.ndarray, basis: EigenBasis,
                    grid: QuadratureGrid) -> "Forcing":
        """Add a steady spatial forcing sampled on ``grid``.

        The source is appended as an extra frame with constant weight 1.
        """
        src_modal = basis.project_samples(source, grid)
        v = _WithSteadyFrame(self.velocity)
        n = self.frames.shape[0]
        gram = np.zeros((n + 1, n + 1))
        gram[:n, :n] = self.gram
        gram[n, n] = float(grid.wx @ source**2 @ grid.wy)
        if n and self.spatial is not None:
            cross = np.einsum("i,aij,ij,j->a", grid.wx, self.spatial, source, grid.wy)
            gram[:n, n] = gram[n, :n] = cross
        spatial = None if self.spatial is None else np.concatenate([self.spatial, source[None]])
        return Forcing(v, np.vstack([self.frames, src_modal]), gram, self.lp_report, spatial)

    @classmethod
    def zero(cls, velocity: VelocityField, m: int) -> "Forcing":
        n = velocity.n_frames
        return cls(velocity, np.zeros((n, m)), np.zeros((n, n)), {}, None)


def forcing_field(v: VelocityField, lifting: LiftingField, t: float,
                  grid: QuadratureGrid | None = None) -> np.ndarray:
    """``h = -v . grad theta_s`` sampled on the quadrature grid."""
    grid = lifting.domain.quadrature if grid is None else grid
    if grid is lifting.domain.quadrature:
        gx, gy = lifting.quad_gradient
    else:
        _, gx, gy = lifting.value_and_gradient(*grid.mesh)
    vx, vy = v(*grid.mesh, t)
    return -(vx * gx + vy * gy)


def build_forcing(v: VelocityField, lifting: LiftingField, basis: EigenBasis,
                  sample_times=(), p_values=FORCING_P,
                  grid: QuadratureGrid | None = None) -> Forcing:
    """Project ``-v . grad theta_s`` onto the basis, frame by frame."""
    if lifting.quad_gradient is None:
        raise ConfigError("lifting field carries no gradient")
    grid = basis.domain.quadrature if grid is None else grid
    if grid is lifting.domain.quadrature:
        gx, gy = lifting.quad_gradient
    else:
        _, gx, gy = lifting.value_and_gradient(*grid.mesh)
    hs = []
    for i in range(v.n_frames):
        vx, vy = v.frame(i, *grid.mesh)
        hs.append(-(vx * gx + vy * gy))
    hs = np.array(hs)
    frames = basis.project_stack(hs, grid).T
    gram = np.einsum("i,aij,bij,j->ab", grid.wx, hs, hs, grid.wy, optimize=True)
    report = {}
    for t in sample_times:
        h = np.tensordot(v.frame_weights(t), hs, axes=1)
        report[float(t)] = {float(p): lp_norm(h, grid, p) for p in p_values}
    return Forcing(v, frames, gram, report, hs)


class _WithSteadyFrame:
    """Frame weights of a velocity field extended by a constant 1."""

    def __init__(self, velocity):
        self._v = velocity

    def frame_weights(self, t):
        return np.append(self._v.frame_weights(t), 1.0)
