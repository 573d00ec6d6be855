"""
The harmonic lifting and its corner singularity
===============================================

theta_s jumps from 0 (left wall) to 1 (top and bottom walls) at the two
left corners, so its gradient behaves like 1/r there. This script shows
the consequence: the gradient is in L^p for every p < 2 but not in L^2.
"""
import numpy as np

from thermogalerkin import Domain, fd_lifting_oracle, gradient_lp_norms, solve_lifting
from thermogalerkin.lifting import corner_distance

dom = Domain(nx=64, ny=64)
lf = solve_lifting(dom)
s = dom.samples
print("theta_s along y = H/2:", lf.samples[::8, 32].round(4))

# Agreement with an independent finite-difference solve, away from the corners.
X, Y = s.mesh
far = corner_distance(X, Y, dom) > 0.1
for n in (32, 64, 128):
    d = Domain(nx=n, ny=n)
    Xn, Yn = d.samples.mesh
    diff = np.abs(fd_lifting_oracle(d, n) - solve_lifting(d, p_values=()).samples)
    print(f"n={n:4d}  max |FD - series| away from corners = {diff[corner_distance(Xn, Yn, d) > 0.1].max():.2e}")

# Refine the quadrature and watch the gradient norms.
print("\npanels   ||grad||_1.5   ||grad||_1.9   ||grad||_2")
for n in (16, 32, 64, 128, 256, 512):
    r = gradient_lp_norms(Domain(nx=n, ny=n), (1.5, 1.9, 2.0))
    print(f"{n:6d}   {r[1.5]:12.6f}   {r[1.9]:12.6f}   {r[2.0]:10.6f}")

# ||grad||_2^2 gains (4/pi) log 2 = 0.8825 every time the corner cell is
# halved: logarithmic growth. The p < 2 norms settle.
print("(4/pi) log 2 =", 4 / np.pi * np.log(2))
