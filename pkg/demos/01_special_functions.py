"""Constants and sphere-average functions that enter the radial kernels.

Run: python demos/01_special_functions.py
"""

from fracspec.special_fn import FractionalParams, b_one, psi, sphere_integral_F

for N in (2, 3, 4):
    for s in (0.25, 0.5, 0.75):
        p = FractionalParams(N, s)
        print(f"N={N} s={s:.2f}  kappa={p.kappa:.6f}  b={p.b:.6f}  b*kappa={p.b * p.kappa:.6f}  b_1={b_one(s):.6f}")

# psi decreases from psi(0) to its value at t = 1; for N = 3, s = 1/2 that value is 1/2
p = FractionalParams(3, 0.5)
for t in (0.0, 0.25, 0.5, 0.75, 1.0):
    print(f"psi_3,1/2({t:.2f}) = {float(psi(p, t)):.12f}")

# the sphere integral F at large R tends to kappa, the one-dimensional limit of the kernel
p = FractionalParams(2, 0.5)
for R in (10.0, 100.0, 1000.0):
    F = sphere_integral_F(p, R, 0.2, 0.5, 1)
    print(f"R={R:7.1f}  F={F:.8f}  kappa={p.kappa:.8f}  gap={abs(F - p.kappa):.2e}")
