"""Command-line front end: ``eigs``, ``lift``, ``run`` and ``sweep``.

Exit codes: 0 success, 1 usage or configuration error, 2 an estimate
check failed, 3 numerical blowup or non-finite output.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, load_config
from .eigenbasis import build_basis, fd_eigen_oracle
from .errors import BlowupError, ConfigError, NumericalError
from .estimates import gronwall_envelope, regularity_report, sweep, trajectory_norms
from .galerkin import Problem, SolverConfig, run, single_mode, smooth_bump
from .geometry import Domain
from .lifting import (PhysicalParams, corner_distance, harmonicity_residual, redimensionalize,
                      solve_lifting)
from .velocity import make_velocity, read_velocity_csv, validate_velocity

EXIT_OK, EXIT_USAGE, EXIT_ESTIMATE, EXIT_BLOWUP = 0, 1, 2, 3
GRAM_TOL = 1e-10
HARMONIC_FAR = 0.25


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _domain(cfg: RunConfig) -> Domain:
    d = cfg.section("domain")
    return Domain(d["L"], d["H"], d["nx"], d["ny"], d["order"])


def _params(cfg: RunConfig) -> PhysicalParams:
    p = cfg.section("physics")
    return PhysicalParams(p["a"], p["theta_inf"], p["theta_p"], p["T"])


def _solver(cfg: RunConfig) -> SolverConfig:
    s = cfg.section("solver")
    return SolverConfig(s["m"], s["dt"], cfg["physics.T"], s["scheme"], s["snapshot_stride"])


def _out_dir(cfg: RunConfig) -> Path:
    out = Path(cfg["output.directory"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _formats(cfg):
    return {f.strip() for f in cfg["output.formats"].split(",")}


def _dump_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def _fmt(v) -> str:
    return repr(float(v))


def build_velocity(cfg: RunConfig, domain: Domain):
    kind = cfg["velocity.kind"]
    T = cfg["physics.T"]
    if kind == "user-sampled":
        return read_velocity_csv(cfg.velocity_file, domain, T)
    return make_velocity(kind, cfg["velocity.V0"], domain, T)


def build_problem(cfg: RunConfig, lifting=None) -> Problem:
    """Assemble the homogenized problem described by ``cfg``."""
    domain = _domain(cfg)
    params = _params(cfg)
    vel = build_velocity(cfg, domain)
    if lifting is None:
        lifting = solve_lifting(domain, cfg["lifting.depth"], cfg["lifting.accelerated"])
    kind, amp = cfg["initial.kind"], cfg["initial.amplitude"]
    if kind == "zero":
        f0, grad0 = None, None
    elif kind == "mode":
        f0, grad0 = single_mode(domain, cfg["initial.mode"], amp)
    else:
        f0, grad0 = smooth_bump(domain, amp)
    return Problem(domain, params.a, vel, params.T, lifting, f0, grad0)


def _ledger_options(cfg: RunConfig) -> dict:
    c = cfg["estimates.e3_constant"]
    return {"e3_constant": None if c == "auto" else float(c),
            "tol_floor": cfg["estimates.tol_floor"], "tol_k": cfg["estimates.tol_k"]}


# subcommands ---------------------------------------------------------------

def cmd_eigs(cfg: RunConfig) -> int:
    domain = _domain(cfg)
    m = cfg["solver.m"]
    basis = build_basis(domain, m)
    fd = fd_eigen_oracle(domain, cfg["eigs.fd_n"], m)
    gram = basis.gram(domain.quadrature)
    resid = np.max(np.abs(gram - np.eye(m)), axis=1)
    out = _out_dir(cfg)
    with open(out / "eigs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["j", "kx", "my", "lambda_analytic", "lambda_fd", "gram_residual"])
        for j, p in enumerate(basis.pairs):
            w.writerow([j + 1, p.kx, p.my, _fmt(p.lam), _fmt(fd[j][0]), _fmt(resid[j])])
    ok = bool(np.all(resid < GRAM_TOL))
    print(f"eigs: {m} modes, max gram residual {resid.max():.3e} -> {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_ESTIMATE


def cmd_lift(cfg: RunConfig) -> int:
    domain = _domain(cfg)
    lf = solve_lifting(domain, cfg["lifting.depth"], cfg["lifting.accelerated"])
    s = domain.samples
    X, Y = s.mesh
    finite = np.all(np.isfinite(lf.samples))
    res = harmonicity_residual(lf.samples, s.hx, s.hy)
    far = corner_distance(X, Y, domain)[1:-1, 1:-1] >= HARMONIC_FAR * min(domain.L, domain.H)
    summary = {
        "series_depth": lf.series_depth,
        "accelerated": lf.accelerated,
        "harmonicity_residual": float(np.max(np.abs(res[far]), initial=0.0)),
        "symmetry_error": float(np.max(np.abs(lf.samples - lf.samples[:, ::-1]))),
        "min": float(np.min(lf.samples)),
        "max": float(np.max(lf.samples)),
        "sobolev_report": lf.sobolev_report,
        "input_hash": cfg.input_hash(),
    }
    out = _out_dir(cfg)
    gx, gy = lf.gradient
    with open(out / "lift.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "theta_s", "dtheta_s_dx", "dtheta_s_dy"])
        for i in range(s.shape[0]):
            for j in range(s.shape[1]):
                w.writerow([_fmt(s.x[i]), _fmt(s.y[j]), _fmt(lf.samples[i, j]),
                            _fmt(gx[i, j]), _fmt(gy[i, j])])
    with open(out / "sobolev.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "grad_lp_norm"])
        for p, v in lf.sobolev_report.items():
            w.writerow([_fmt(p), _fmt(v)])
    _dump_json(out / "lift_summary.json", summary)
    print(f"lift: depth {lf.series_depth}, harmonicity residual {summary['harmonicity_residual']:.3e}")
    return EXIT_OK if finite else EXIT_BLOWUP


def _decay_check(problem: Problem, config: SolverConfig, cfg: RunConfig):
    """Richardson-extrapolated decay rate of a single unforced mode."""
    basis = build_basis(problem.domain, max(config.m, cfg["initial.mode"]))
    j = cfg["initial.mode"] - 1
    if j >= config.m:
        return None
    expected = problem.a * basis.lam[j]
    rates = []
    for dt in (config.dt, config.dt / 2):
        sc = SolverConfig(config.m, dt, config.T, config.scheme, config.snapshot_stride)
        tr = run(problem, sc, record=False)
        rates.append(-np.log(tr.g[-1, j] / tr.g[0, j]) / config.T)
    order = 2 if config.scheme == "crank-nicolson" else 1
    extrap = (2**order * rates[1] - rates[0]) / (2**order - 1)
    err = abs(extrap - expected)
    return {"mode": j + 1, "expected_rate": expected, "observed_rate": rates[0],
            "extrapolated_rate": extrap, "abs_error": err, "passed": bool(err <= 1e-4)}


def cmd_run(cfg: RunConfig) -> int:
    t_start = time.perf_counter()
    problem = build_problem(cfg)
    domain, vel = problem.domain, problem.velocity
    config = _solver(cfg)
    params = _params(cfg)
    validation = validate_velocity(vel, domain, [0.0, 0.5 * config.T, config.T])
    if not validation.passed:
        print(f"run: velocity field failed validation: {validation.as_dict()}", file=sys.stderr)
        return EXIT_USAGE
    out = _out_dir(cfg)
    disc = problem.discretize(config.m)
    try:
        traj = run(problem, config, discretization=disc, ledger_options=_ledger_options(cfg))
    except BlowupError as exc:
        _dump_json(out / "run_summary.json", {"status": "BLOWUP", "message": str(exc),
                                              "config": cfg.inputs(), "input_hash": cfg.input_hash()})
        if exc.trajectory is not None and exc.trajectory.ledger is not None:
            exc.trajectory.ledger.write_csv(out / "ledger.csv")
        print(f"run: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
    ledger = traj.ledger
    envelope = gronwall_envelope(ledger)
    status_ok = ledger.passed and envelope.passed

    s = domain.samples
    formats = _formats(cfg)
    if "csv" in formats:
        ledger.write_csv(out / "ledger.csv")
        with open(out / "coefficients.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + [f"g_{j + 1}" for j in range(config.m)])
            for t, g in zip(traj.times, traj.g):
                w.writerow([_fmt(t)] + [_fmt(v) for v in g])
        header = ["t"] + [f"theta[{i},{j}]" for i in range(s.shape[0]) for j in range(s.shape[1])]
        lift_s = problem.lifting.samples
        with open(out / "snapshots.csv", "w", newline="") as fs, \
                open(out / "temperature.csv", "w", newline="") as ft:
            ws, wt = csv.writer(fs), csv.writer(ft)
            ws.writerow(header)
            wt.writerow(header)
            for n in traj.snapshot_indices:
                theta = traj.field(n, s.x, s.y)
                raw = redimensionalize(theta + lift_s, params)
                ws.writerow([_fmt(traj.times[n])] + [_fmt(v) for v in theta.ravel()])
                wt.writerow([_fmt(traj.times[n])] + [_fmt(v) for v in raw.ravel()])

    summary = {
        "status": "PASS" if status_ok else "FAILED-ESTIMATE",
        "config": cfg.inputs(),
        "input_hash": cfg.input_hash(),
        "n_steps": config.n_steps,
        "norms": trajectory_norms(traj),
        "ledger": {"passed": ledger.passed, "violations": {k: len(v) for k, v in ledger.violations().items()},
                   "max_margin": ledger.max_margin(), "constants": ledger.constants},
        "envelope": {"passed": envelope.passed, "l2_violations": len(envelope.l2_violations),
                     "h1_violations": len(envelope.h1_violations),
                     "final_l2_bound": float(envelope.l2_bound[-1]),
                     "final_h1_bound": float(envelope.h1_bound[-1])},
        "initial": {"l2_truncation": traj.initial.l2_error, "h1_truncation": traj.initial.h1_error,
                    "boundary_max": traj.initial.boundary_max, "warnings": traj.initial.warnings},
        "velocity_validation": validation.as_dict(),
        "lifting_series_depth": problem.lifting.series_depth,
        "regularity": regularity_report(traj, cfg.floats("estimates.p_values")),
    }
    if vel.is_zero and cfg["initial.kind"] == "mode":
        summary["decay_rate_check"] = _decay_check(problem, config, cfg)
    if "json" in formats:
        _dump_json(out / "run_summary.json", summary)
        _dump_json(out / "timing.json", {"wall_time_s": time.perf_counter() - t_start})
    print(f"run: {config.n_steps} steps, m={config.m}, estimates "
          f"{'PASS' if ledger.passed else 'FAIL'}, envelope {'PASS' if envelope.passed else 'FAIL'}")
    return EXIT_OK if status_ok else EXIT_ESTIMATE


def cmd_sweep(cfg: RunConfig) -> int:
    problem = build_problem(cfg)
    config = _solver(cfg)
    report = sweep(cfg.ints("estimates.sweep_m_list"), problem, config, _ledger_options(cfg))
    out = _out_dir(cfg)
    data = report.as_dict()
    data["input_hash"] = cfg.input_hash()
    _dump_json(out / "sweep_report.json", data)
    ok = report.gaps_decreasing and report.norms_bounded() and not report.failures
    print(f"sweep: m={report.m_values}, gaps={['%.3e' % g for g in report.cauchy_gaps]} "
          f"-> {'PASS' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_ESTIMATE


COMMANDS = {"eigs": cmd_eigs, "lift": cmd_lift, "run": cmd_run, "sweep": cmd_sweep}


def make_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="thermogalerkin", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", metavar="PATH", help="configuration file (section.key = value lines)")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override one configuration key; repeatable")
    p.add_argument("--out", metavar="DIR", help="output directory (overrides output.directory)")
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    overrides = list(args.overrides)
    if args.out:
        overrides.append(f"output.directory={args.out}")
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"thermogalerkin: configuration error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"thermogalerkin: numerical error: {exc}", file=sys.stderr)
        return EXIT_BLOWUP
