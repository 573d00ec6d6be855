import numpy as np
import pytest
from scipy.special import gamma

from thermogalerkin.eigenbasis import build_basis
from thermogalerkin.errors import ShapeError
from thermogalerkin.estimates import (COLUMNS, EstimateLedger, cauchy_gap, gronwall_envelope,
                                      record_step, regularity_report, sweep, trajectory_norms)
from thermogalerkin.galerkin import (GalerkinState, Problem, SolverConfig, run, single_mode,
                                     smooth_bump, zero_velocity)
from thermogalerkin.geometry import Domain, inner_l2
from thermogalerkin.lifting import solve_lifting
from thermogalerkin.velocity import make_velocity

LAM1 = 5 * np.pi**2 / 4


@pytest.fixture(scope="module")
def unit():
    return Domain(1.0, 1.0, 32, 32)


@pytest.fixture(scope="module")
def vortex_run(unit):
    lf = solve_lifting(unit, p_values=())
    f, grad = smooth_bump(unit)
    pb = Problem(unit, 0.1, make_velocity("steady-vortex", 1.0, unit), 1.0, lf, f, grad)
    return pb, run(pb, SolverConfig(m=16, dt=1e-3))


def test_record_step_matches_quadrature(unit):
    b = build_basis(unit, 12)
    q = unit.quadrature
    rng = np.random.default_rng(0)
    g, dg = rng.standard_normal(12), rng.standard_normal(12)
    row = record_step(GalerkinState(0.5, g, dg), b.lam, 2.0, 3.0)
    u = b.synthesize(g, q.x, q.y)
    ux, uy = b.synthesize(g, q.x, q.y, dx=1), b.synthesize(g, q.x, q.y, dy=1)
    lap = b.laplacian(g, q.x, q.y)
    du = b.synthesize(dg, q.x, q.y)
    assert row["theta_l2_sq"] == pytest.approx(inner_l2(u, u, q), rel=1e-10)
    assert row["theta_h1_sq"] == pytest.approx(inner_l2(ux, ux, q) + inner_l2(uy, uy, q), rel=1e-10)
    assert row["lap_sq"] == pytest.approx(inner_l2(lap, lap, q), rel=1e-10)
    assert row["dtheta_sq"] == pytest.approx(inner_l2(du, du, q), rel=1e-10)
    assert (row["t"], row["h_sq"], row["v_sup"]) == (0.5, 2.0, 3.0)


def test_poincare_inequality(unit):
    b = build_basis(unit, 30)
    g = np.random.default_rng(1).standard_normal(30)
    row = record_step(GalerkinState(0.0, g, g), b.lam, 0.0, 0.0)
    C = EstimateLedger(b, 0.1, 1e-3).C_poincare
    assert C == pytest.approx(LAM1**-0.5)
    assert row["theta_l2_sq"] <= C**2 * row["theta_h1_sq"]
    assert row["theta_h1_sq"] ** 2 <= row["theta_l2_sq"] * row["lap_sq"] * (1 + 1e-12)


def test_decay_residuals_match_closed_form(unit):
    # h = 0, single mode: E1 -> -a lam g^2, E2 -> -a lam^2 g^2, E3 -> a^2 lam^2 g^2 - 2 a^2 lam^2 g^2
    f, grad = single_mode(unit, 1)
    a = 0.1
    pb = Problem(unit, a, zero_velocity(unit), 1.0, None, f, grad)
    traj = run(pb, SolverConfig(m=2, dt=1e-3))
    led = traj.ledger
    g2 = traj.g[:, 0] ** 2
    np.testing.assert_allclose(led["residual_E1"], -a * LAM1 * g2, rtol=1e-5)
    np.testing.assert_allclose(led["residual_E2"], -a * LAM1**2 * g2, rtol=1e-5)
    np.testing.assert_allclose(led["residual_E3"], -(a * LAM1) ** 2 * g2, rtol=1e-5)
    assert led.passed
    assert led.constants["e3_constant"] == pytest.approx(15.0)


def test_ledger_columns_and_csv(tmp_path, vortex_run):
    _, traj = vortex_run
    led = traj.ledger
    assert len(led) == 1001
    for c in COLUMNS:
        assert led[c].shape == (1001,)
        assert np.all(np.isfinite(led[c]))
    path = tmp_path / "ledger.csv"
    led.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(COLUMNS)
    assert len(lines) == 1002
    back = np.loadtxt(path, delimiter=",", skiprows=1)
    np.testing.assert_array_equal(back[:, COLUMNS.index("residual_E2")], led["residual_E2"])


def test_vortex_run_satisfies_estimates(vortex_run):
    _, traj = vortex_run
    led = traj.ledger
    assert led.passed, led.max_margin()
    assert all(v < 0 for v in led.max_margin().values())
    assert gronwall_envelope(led).passed


def test_tolerance_floor_and_scaling(vortex_run):
    _, traj = vortex_run
    led = traj.ledger
    assert np.all(led["tol_E1"] >= 1e-8)
    K = (2 * 0.1 * led.lam[-1]) ** 2
    assert led.K == pytest.approx(K)


def test_wrong_constant_is_detected(unit, vortex_run):
    pb, traj = vortex_run
    led = EstimateLedger(traj.basis, 0.1, 1e-3, e3_constant=-1e6)
    for n in range(len(traj.times)):
        led.record_step(GalerkinState(traj.times[n], traj.g[n], traj.dg[n]),
                        traj.ledger["h_sq"][n], traj.ledger["v_sup"][n])
    led.finalize()
    assert not led.passed
    assert len(led.violations()["E3"]) > 900
    assert not led.violations()["E1"]


def test_envelope_without_forcing_is_initial_seed(unit):
    f, grad = smooth_bump(unit)
    pb = Problem(unit, 0.1, zero_velocity(unit), 1.0, None, f, grad)
    traj = run(pb, SolverConfig(m=8, dt=1e-2))
    env = gronwall_envelope(traj.ledger)
    seed = max(traj.ledger["theta_l2_sq"][0], traj.ledger["theta_h1_sq"][0])
    np.testing.assert_allclose(env.l2_bound, seed)
    np.testing.assert_allclose(env.h1_bound, traj.ledger["theta_h1_sq"][0])
    assert env.passed


def test_envelope_flags_growth(unit):
    b = build_basis(unit, 2)
    led = EstimateLedger(b, 0.1, 0.1)
    for n in range(5):
        g = np.array([1.0 + n, 0.0])
        led.record_step(GalerkinState(0.1 * n, g, 0 * g), 0.0, 0.0)
    env = gronwall_envelope(led.finalize())
    # seed is max(|g|^2, lam_1 |g|^2) = lam_1 ~ 12.3
    assert env.l2_violations == [3, 4]
    assert not env.passed


def test_envelope_forced_bound_integrates_h(unit):
    b = build_basis(unit, 1)
    led = EstimateLedger(b, 0.5, 0.5)
    for t in (0.0, 0.5, 1.0):
        led.record_step(GalerkinState(t, np.zeros(1), np.zeros(1)), 2.0, 0.0)
    env = gronwall_envelope(led.finalize(), theta0_norms=(0.1, 0.3))
    C2 = 1 / LAM1
    np.testing.assert_allclose(env.l2_bound, 0.3 + C2 / 0.5 * 2.0 * np.array([0, 0.5, 1.0]))
    np.testing.assert_allclose(env.h1_bound, 0.3 + 3.0 * 2.0 * np.array([0, 0.5, 1.0]))


def test_trajectory_norms_closed_form(unit):
    f, grad = single_mode(unit, 1)
    a = 0.1
    traj = run(Problem(unit, a, zero_velocity(unit), 1.0, None, f, grad), SolverConfig(m=1, dt=1e-3))
    n = trajectory_norms(traj)
    k = 2 * a * LAM1
    integral = (1 - np.exp(-k)) / k
    assert n["sup_l2"] == pytest.approx(1.0)
    assert n["int_h1_sq"] == pytest.approx(LAM1 * integral, rel=1e-5)
    assert n["int_lap_sq"] == pytest.approx(LAM1**2 * integral, rel=1e-5)
    assert n["int_dtheta_sq"] == pytest.approx((a * LAM1) ** 2 * integral, rel=1e-5)


def test_cauchy_gap_of_decoupled_modes(unit):
    # zero velocity decouples the modes, so the gap is exactly the extra modes' energy
    f, grad = smooth_bump(unit)
    pb = Problem(unit, 0.1, zero_velocity(unit), 1.0, None, f, grad)
    cfg = SolverConfig(m=4, dt=1e-2)
    t4 = run(pb, cfg)
    t8 = run(pb, SolverConfig(m=8, dt=1e-2))
    np.testing.assert_allclose(t8.g[:, :4], t4.g, atol=1e-14)
    ref = np.sqrt(np.sum(1e-2 * (t8.g[:, 4:] ** 2 @ t8.basis.lam[4:])))
    assert cauchy_gap(t4, t8) == pytest.approx(ref, rel=1e-12)
    with pytest.raises(ShapeError):
        cauchy_gap(t8, t4)


def test_sweep_reports_convergence(vortex_run):
    pb, _ = vortex_run
    rep = sweep([16, 4, 8], pb, SolverConfig(dt=1e-2))
    assert rep.m_values == [4, 8, 16]
    assert len(rep.cauchy_gaps) == 2
    assert rep.gaps_decreasing
    assert rep.norms_bounded()
    assert rep.passed
    d = rep.as_dict()
    assert set(d["norms"]) == {"4", "8", "16"}


def _lp_sine(p):
    # int_0^1 sin(pi x / 2)^p dx = int_0^1 sin(pi y)^p dy
    return (1 / np.sqrt(np.pi)) * gamma((p + 1) / 2) / gamma(p / 2 + 1)


def test_regularity_report_closed_form():
    d = Domain(1.0, 1.0, 64, 64)
    f, grad = single_mode(d, 1)
    a = 0.1
    traj = run(Problem(d, a, zero_velocity(d), 1.0, None, f, grad),
               SolverConfig(m=1, dt=1e-3, snapshot_stride=10))
    rep = regularity_report(traj, (1.0, 1.5, 1.9))
    k = 2 * a * LAM1
    integral = (1 - np.exp(-k)) / k
    for p, r in rep.items():
        psi_p = 2 * _lp_sine(p) ** (2 / p)   # ||psi_1||_p, normalization 2 on the unit square
        assert r["laplacian"] == pytest.approx(LAM1**2 * psi_p**2 * integral, rel=1e-4)
        assert r["dtheta"] == pytest.approx((a * LAM1) ** 2 * psi_p**2 * integral, rel=1e-4)
        assert r["w2p"] > r["laplacian"]


def test_forced_single_mode_below_closed_form_envelope(unit):
    # g' + a lam g = c, g(0) = 0: |theta|^2 = g^2 and the envelope is (C^2/a) c^2 t
    a, c = 0.5, 3.0
    b = build_basis(unit, 1)
    pb = Problem(unit, a, zero_velocity(unit), 1.0, None, None,
                 source=lambda X, Y: c * b.evaluate_points(0, X, Y))
    traj = run(pb, SolverConfig(m=1, dt=1e-3))
    t = traj.times
    g = c / (a * LAM1) * (1 - np.exp(-a * LAM1 * t))
    np.testing.assert_allclose(traj.g[:, 0], g, atol=1e-6)
    env = gronwall_envelope(traj.ledger)
    np.testing.assert_allclose(env.l2_bound, c**2 / (LAM1 * a) * t, rtol=1e-6, atol=1e-12)
    assert np.all(g**2 <= env.l2_bound + 1e-12) and env.passed
    assert traj.ledger.passed


def test_forced_run_first_residual_is_small(vortex_run):
    _, traj = vortex_run
    led = traj.ledger
    scale = np.maximum.reduce([np.abs(led["D_theta_l2_sq"]), 0.1 * led["theta_h1_sq"],
                               led["h_sq"] / (0.1 * LAM1)])
    assert np.all(led["residual_E1"] <= 1e-6 * scale)


def test_gaps_vanish_for_data_in_span(unit):
    f, grad = single_mode(unit, 3)
    b = build_basis(unit, 4)
    pb = Problem(unit, 0.1, zero_velocity(unit), 1.0, None, f, grad,
                 source=lambda X, Y: b.evaluate_points(1, X, Y))
    rep = sweep([4, 8, 16], pb, SolverConfig(dt=1e-2))
    assert max(rep.cauchy_gaps) < 1e-12
