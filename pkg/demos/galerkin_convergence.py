"""
Convergence in the number of modes
==================================

Runs the same problem with 8, 16, 32 and 64 modes and prints the
L2(0,T;H1) distance between consecutive approximations together with
the four norm families of the a-priori bounds.
"""
from thermogalerkin import (Domain, Problem, SolverConfig, make_velocity, smooth_bump,
                            solve_lifting, sweep)

dom = Domain()
theta0, grad0 = smooth_bump(dom)
problem = Problem(dom, 0.1, make_velocity("time-modulated-vortex", 1.0, dom), 1.0,
                  solve_lifting(dom), theta0, grad0)

report = sweep([8, 16, 32, 64], problem, SolverConfig(dt=1e-3))
for (m0, m1), gap in zip(zip(report.m_values, report.m_values[1:]), report.cauchy_gaps):
    print(f"||theta_{m1} - theta_{m0}|| = {gap:.4e}")

print("\n  m   sup|theta|   int||theta||^2   int|Lap theta|^2   int|theta'|^2")
for m in report.m_values:
    n = report.norms[m]
    print(f"{m:3d}   {n['sup_l2']:10.5f}   {n['int_h1_sq']:14.5f}   {n['int_lap_sq']:16.3f}"
          f"   {n['int_dtheta_sq']:13.3f}")
print("\ngaps decreasing:", report.gaps_decreasing, " norms bounded:", report.norms_bounded())
