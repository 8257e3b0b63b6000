"""Spectra of shells R < |x| < R+1: the second eigenvalue stops being radial.

The full spectrum is assembled from radial problems in shifted dimensions.  The
lowest nonradial level is the first eigenvalue in dimension N+2; once it drops
below the second radial eigenvalue the second eigenfunction is nonradial.

Run: python demos/02_annulus_nonradial.py
"""

from fracspec.annulus_spectrum import interval_pairs, nonradiality_test, sign_product
from fracspec.radial_kernel import RadialGeometry
from fracspec.special_fn import FractionalParams

p = FractionalParams(2, 0.5)
phi = interval_pairs(0.5, 2, 256)
print(f"interval limit: lambda_1={phi[0].lam:.5f}  lambda_2={phi[1].lam:.5f}")
print(" R      lambda_1(N+2)  lambda_2(radial)  state       sign product")
for R in (1.0, 2.0, 5.0, 10.0, 50.0):
    res = nonradiality_test(p, RadialGeometry.shell(2, R), n=128)
    sgn = f"{sign_product(p, R).product:+.4f}" if R > 1.0 else "n/a"
    print(f"{R:5.1f}  {res.lambda1_next:13.5f}  {res.lambda2_radial:16.5f}  {res.state:10s}  {sgn}")
