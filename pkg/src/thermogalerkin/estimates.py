"""Runtime checks of the a-priori energy estimates and the m-convergence monitor.

Per step the ledger stores, from the modal coefficients alone,

    |theta|^2 = sum g^2,  ||theta||^2 = sum lam g^2,  |Lap theta|^2 = sum lam^2 g^2,
    |theta'|^2 = sum g'^2,

and forms three residuals which must be non-positive up to a
time-discretization tolerance::

    E1 = D|theta|^2 + alpha ||theta||^2 - (C^2/alpha) |h|^2
    E2 = D||theta||^2 + alpha |Lap theta|^2 - 3/(2 alpha) (|v|_inf^2 ||theta||^2 + |h|^2)
    E3 = |theta'|^2 + alpha D||theta||^2 - C3 (|v|_inf^2 ||theta||^2 + |h|^2)

``C = lambda_1^(-1/2)`` is the Poincare constant of the basis, ``D`` the
centred discrete time derivative (second-order one-sided at the ends) and
``C3 = max(2, 3/(2 alpha))``; 2 is the constant the Young inequality gives.
``residual_E1_inverse_constant`` is E1 with ``1/(alpha C^2)`` in place of
``C^2/alpha``; it is stored for comparison and never checked.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from .eigenbasis import EigenBasis
from .errors import ShapeError
from .geometry import QuadratureGrid, lp_norm

COLUMNS = ("t", "theta_l2_sq", "theta_h1_sq", "lap_sq", "dtheta_sq", "h_sq", "v_sup",
           "residual_E1", "residual_E2", "residual_E3", "residual_E1_inverse_constant",
           "tol_E1", "tol_E2", "tol_E3")

TOL_FLOOR = 1e-8


class EstimateLedger:
    """Per-step norms and estimate residuals for one run.

    Parameters
    ----------
    basis : EigenBasis
    alpha : float
        Diffusivity.
    dt : float
        Step size (enters the residual tolerances).
    e3_constant : float, optional
        Constant of the third estimate; default ``max(2, 3/(2 alpha))``.
    tol_floor, tol_k : float, optional
        Tolerance is ``max(tol_floor, K dt^2 scale)`` with
        ``K = tol_k (2 alpha lambda_m)^2`` by default.
    """

    def __init__(self, basis: EigenBasis, alpha: float, dt: float, e3_constant=None,
                 tol_floor: float = TOL_FLOOR, tol_k: float | None = None):
        self.lam = basis.lam
        self.alpha = float(alpha)
        self.dt = float(dt)
        self.C_poincare = float(self.lam[0] ** -0.5)
        self.e3_constant = max(2.0, 1.5 / self.alpha) if e3_constant is None else float(e3_constant)
        self.tol_floor = tol_floor
        stiff = 2.0 * self.alpha * float(self.lam[-1])
        self.K = (1.0 if tol_k is None else tol_k) * stiff**2
        self._rows: list[tuple] = []
        self.data: dict[str, np.ndarray] = {}

    @property
    def constants(self) -> dict:
        return {"C_poincare": self.C_poincare, "alpha": self.alpha, "e3_constant": self.e3_constant,
                "K": self.K, "tol_floor": self.tol_floor}

    def record_step(self, state, h_norm_sq: float, v_sup: float) -> dict:
        """Append the norms of ``state``; residuals are formed in :meth:`finalize`."""
        row = record_step(state, self.lam, h_norm_sq, v_sup)
        self._rows.append(tuple(row.values()))
        return row

    def __len__(self):
        return len(self._rows)

    def finalize(self) -> "EstimateLedger":
        arr = np.array(self._rows, dtype=float).reshape(-1, 7)
        names = COLUMNS[:7]
        d = {k: arr[:, i] for i, k in enumerate(names)}
        n = len(arr)
        t = d["t"]
        if n >= 3:
            D_l2 = np.gradient(d["theta_l2_sq"], t, edge_order=2)
            D_h1 = np.gradient(d["theta_h1_sq"], t, edge_order=2)
        elif n == 2:
            D_l2 = np.gradient(d["theta_l2_sq"], t)
            D_h1 = np.gradient(d["theta_h1_sq"], t)
        else:
            D_l2 = D_h1 = np.zeros(n)
        a, C = self.alpha, self.C_poincare
        v2 = d["v_sup"] ** 2
        drive = v2 * d["theta_h1_sq"] + d["h_sq"]
        e1_terms = (D_l2, a * d["theta_h1_sq"], C**2 / a * d["h_sq"])
        e2_terms = (D_h1, a * d["lap_sq"], 1.5 / a * drive)
        e3_terms = (d["dtheta_sq"], a * D_h1, self.e3_constant * drive)
        d["residual_E1"] = e1_terms[0] + e1_terms[1] - e1_terms[2]
        d["residual_E2"] = e2_terms[0] + e2_terms[1] - e2_terms[2]
        d["residual_E3"] = e3_terms[0] + e3_terms[1] - e3_terms[2]
        d["residual_E1_inverse_constant"] = D_l2 + a * d["theta_h1_sq"] - d["h_sq"] / (a * C**2)
        for name, terms in (("E1", e1_terms), ("E2", e2_terms), ("E3", e3_terms)):
            scale = np.max(np.abs(np.vstack(terms)), axis=0)
            d[f"tol_{name}"] = np.maximum(self.tol_floor, self.K * self.dt**2 * scale)
        d["D_theta_l2_sq"], d["D_theta_h1_sq"] = D_l2, D_h1
        self.data = d
        return self

    def __getitem__(self, key) -> np.ndarray:
        return self.data[key]

    def violations(self) -> dict:
        """Row indices where a residual exceeds its tolerance, per estimate."""
        return {name: np.flatnonzero(self.data[f"residual_{name}"] > self.data[f"tol_{name}"]).tolist()
                for name in ("E1", "E2", "E3")}

    @property
    def passed(self) -> bool:
        return not any(self.violations().values())

    def max_margin(self) -> dict:
        """Largest ``residual - tol`` per estimate (negative means slack)."""
        return {name: float(np.max(self.data[f"residual_{name}"] - self.data[f"tol_{name}"]))
                for name in ("E1", "E2", "E3")}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(COLUMNS)
            cols = [self.data[c] for c in COLUMNS]
            for row in zip(*cols):
                w.writerow([repr(float(v)) for v in row])


def record_step(state, lam: np.ndarray, h_norm_sq: float, v_sup: float) -> dict:
    """Norms of one Galerkin state from its modal coefficients."""
    g, dg = state.g, state.dg
    return {
        "t": float(state.t),
        "theta_l2_sq": float(g @ g),
        "theta_h1_sq": float(lam @ g**2),
        "lap_sq": float(lam**2 @ g**2),
        "dtheta_sq": float(dg @ dg),
        "h_sq": float(h_norm_sq),
        "v_sup": float(v_sup),
    }


@dataclass
class Envelope:
    """Gronwall bounds for ``|theta|^2`` (first estimate) and ``||theta||^2`` (second)."""

    l2_bound: np.ndarray
    h1_bound: np.ndarray
    l2_violations: list
    h1_violations: list
    seed: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.l2_violations and not self.h1_violations

    def margins(self) -> dict:
        return {"l2": self.l2_violations, "h1": self.h1_violations}


def gronwall_envelope(ledger: EstimateLedger, theta0_norms=None, rtol: float = 1e-10) -> Envelope:
    """Integrated bounds and their check against the trajectory.

    ``theta0_norms = (|theta_0|^2, ||theta_0||^2)`` defaults to the first
    ledger row. The first bound is seeded with the larger of the two::

        |theta(t)|^2  <= max(|theta_0|^2, ||theta_0||^2) + (C^2/alpha) int_0^t |h|^2

    and the second is the exponential Gronwall form of the second estimate::

        ||theta(t)||^2 <= e^{A(t)} (||theta_0||^2 + int_0^t e^{-A} 3/(2 alpha) |h|^2),
        A(t) = int_0^t 3/(2 alpha) |v|_inf^2.
    """
    d = ledger.data
    t = d["t"]
    a, C = ledger.alpha, ledger.C_poincare
    if theta0_norms is None:
        theta0_norms = (d["theta_l2_sq"][0], d["theta_h1_sq"][0])
    l2_0, h1_0 = (float(v) for v in theta0_norms)
    seed = max(l2_0, h1_0)
    int_h = cumulative_trapezoid(d["h_sq"], t, initial=0.0) if len(t) > 1 else np.zeros(1)
    l2_bound = seed + C**2 / a * int_h
    c = 1.5 / a
    A = cumulative_trapezoid(c * d["v_sup"] ** 2, t, initial=0.0) if len(t) > 1 else np.zeros(1)
    inner = cumulative_trapezoid(np.exp(-A) * c * d["h_sq"], t, initial=0.0) if len(t) > 1 else np.zeros(1)
    h1_bound = np.exp(A) * (h1_0 + inner)
    slack = lambda b: rtol * np.abs(b) + 1e-300  # noqa: E731
    l2_viol = np.flatnonzero(d["theta_l2_sq"] > l2_bound + slack(l2_bound)).tolist()
    h1_viol = np.flatnonzero(d["theta_h1_sq"] > h1_bound + slack(h1_bound)).tolist()
    return Envelope(l2_bound, h1_bound, l2_viol, h1_viol, {"theta0_l2_sq": l2_0, "theta0_h1_sq": h1_0})


# convergence monitor --------------------------------------------------------

@dataclass
class SweepReport:
    m_values: list
    norms: dict              # m -> dict of the four norm families
    cauchy_gaps: list        # ||theta_{m_{i+1}} - theta_{m_i}||_{L2(0,T;H1)}
    estimates_passed: dict   # m -> bool
    failures: dict = field(default_factory=dict)

    @property
    def gaps_decreasing(self) -> bool:
        g = self.cauchy_gaps
        return all(b < a for a, b in zip(g, g[1:]))

    def norms_bounded(self, factor: float = 2.0) -> bool:
        ref = self.norms[self.m_values[0]]
        return all(self.norms[m][k] <= factor * ref[k] + 1e-300
                   for m in self.m_values for k in ref)

    @property
    def passed(self) -> bool:
        return not self.failures and self.gaps_decreasing and self.norms_bounded() \
            and all(self.estimates_passed.values())

    def as_dict(self) -> dict:
        return {
            "m_values": list(self.m_values),
            "norms": {str(m): v for m, v in self.norms.items()},
            "cauchy_gaps": list(self.cauchy_gaps),
            "gaps_decreasing": self.gaps_decreasing,
            "norms_bounded": self.norms_bounded(),
            "estimates_passed": {str(m): v for m, v in self.estimates_passed.items()},
            "failures": {str(m): v for m, v in self.failures.items()},
            "passed": self.passed,
        }


def trajectory_norms(traj) -> dict:
    """``sup |theta|``, ``int ||theta||^2``, ``int |Lap theta|^2``, ``int |theta'|^2``."""
    lam, g, dg, t = traj.basis.lam, traj.g, traj.dg, traj.times
    return {
        "sup_l2": float(np.sqrt(np.max(np.sum(g**2, axis=1)))),
        "int_h1_sq": float(trapezoid(g**2 @ lam, t)),
        "int_lap_sq": float(trapezoid(g**2 @ lam**2, t)),
        "int_dtheta_sq": float(trapezoid(np.sum(dg**2, axis=1), t)),
    }


def cauchy_gap(coarse, fine) -> float:
    """``||theta_fine - theta_coarse||_{L2(0,T;H1)}`` with zero-padded coarse modes.

    The coarse basis is a prefix of the fine one (both are sorted with the
    same tie-break), so padding is a plain extension by zeros.
    """
    mc = coarse.basis.m
    if mc > fine.basis.m or not (np.array_equal(coarse.basis.kx, fine.basis.kx[:mc])
                                 and np.array_equal(coarse.basis.my, fine.basis.my[:mc])):
        raise ShapeError("coarse basis is not a prefix of the fine basis")
    if coarse.g.shape[0] != fine.g.shape[0]:
        raise ShapeError("trajectories use different time grids")
    pad = np.zeros_like(fine.g)
    pad[:, :mc] = coarse.g
    diff = fine.g - pad
    dt = fine.config.dt
    return float(np.sqrt(np.sum(dt * (diff**2 @ fine.basis.lam))))


def sweep(m_values, problem, config, ledger_options=None) -> SweepReport:
    """Run ``problem`` for each ``m`` and compare consecutive trajectories."""
    from .errors import NumericalError
    from .galerkin import run, with_m

    m_values = sorted(int(m) for m in m_values)
    trajs, norms, passed, failures = {}, {}, {}, {}
    for m in m_values:
        try:
            tr = run(problem, with_m(config, m), ledger_options=ledger_options)
        except NumericalError as exc:
            failures[m] = str(exc)
            continue
        trajs[m] = tr
        norms[m] = trajectory_norms(tr)
        passed[m] = bool(tr.ledger.passed and gronwall_envelope(tr.ledger).passed)
    ok = [m for m in m_values if m in trajs]
    gaps = [cauchy_gap(trajs[a], trajs[b]) for a, b in zip(ok, ok[1:])]
    return SweepReport(ok, norms, gaps, passed, failures)


# regularity indicators ------------------------------------------------------

def regularity_report(traj, p_values=(1.0, 1.5, 1.9), grid: QuadratureGrid | None = None,
                      indices=None) -> dict:
    """Time-integrated L^p indicators of second derivatives and ``theta'``.

    For each ``p`` returns ``laplacian = int ||Lap theta||_p^2 dt``,
    ``w2p = int (||Lap||_p + ||d_xx||_p + ||d_xy||_p + ||d_yy||_p)^2 dt`` and
    ``dtheta = int ||theta'||_p^2 dt``, integrated by the trapezoidal rule
    over the snapshot steps. Second derivatives are taken term-wise.
    """
    grid = traj.basis.domain.quadrature if grid is None else grid
    idx = traj.snapshot_indices if indices is None else np.asarray(indices)
    t = traj.times[idx]
    kinds = ("laplacian", "dxx", "dxy", "dyy", "dtheta")
    vals = {p: {k: np.empty(len(idx)) for k in kinds} for p in p_values}
    for s, n in enumerate(idx):
        for k in kinds:
            f = traj.field(n, grid.x, grid.y, k)
            for p in p_values:
                vals[p][k][s] = lp_norm(f, grid, p)
    out = {}
    integ = (lambda y: float(trapezoid(y, t))) if len(t) > 1 else (lambda y: 0.0)
    for p in p_values:
        v = vals[p]
        w2p = v["laplacian"] + v["dxx"] + v["dxy"] + v["dyy"]
        out[float(p)] = {
            "laplacian": integ(v["laplacian"] ** 2),
            "w2p": integ(w2p**2),
            "dtheta": integ(v["dtheta"] ** 2),
        }
    return out
