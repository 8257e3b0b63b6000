"""Moving the obstacle off centre in B_1 minus a disc of radius tau.

For each shift a the 2D solver reports the second eigenvalue, the lowest
eigenvalue of the odd (mirror-antisymmetric) sector and the shape derivative of
the latter.  Takes under a minute at h = 0.1.

Run: python demos/03_eccentric_sweep.py
"""

from fracspec.eccentric_2d import sweep_a

rep = sweep_a(0.6, 0.5, [0.0, 0.05, 0.1, 0.15], h=0.1)
print("   a    lambda2     lambda_anti  d lambda_anti / da")
for r in rep.records:
    print(f"{r['value']:5.2f}  {r['lambda2']:10.5f}  {r['lambda_anti']:11.5f}  {r['shape_derivative']:+.4f}")
print("verdicts:", rep.verdicts)
