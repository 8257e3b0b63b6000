import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st
from scipy import integrate

from fracspec.errors import DomainError, UnsupportedDimensionError
from fracspec.special_fn import (
    F_identity,
    FractionalParams,
    b_one,
    f_rho,
    g_rho,
    gamma_fn,
    psi,
    psi_big,
    psi_defining_integral,
    psi_extended,
    shifted_sphere_integral,
    sphere_integral_F,
    sphere_prefactor,
)

orders = st.floats(min_value=0.05, max_value=0.95)
dims = st.integers(min_value=2, max_value=6)


def psi_quad(N, s, t):
    """psi(t) by adaptive quadrature with the algebraic endpoint weight."""
    a = 0.5 * (N - 3)
    c = min(t * t, 0.5)
    opts = dict(epsabs=1e-15, epsrel=1e-13, limit=400)
    # split at the width t^2 of the peak; each piece carries one algebraic endpoint weight
    left, _ = integrate.quad(lambda h: (1.0 - h) ** a * (t * t + h) ** (-0.5 * N - s), 0.0, c,
                             weight="alg", wvar=(a, 0.0), **opts)
    right, _ = integrate.quad(lambda h: h ** a * (t * t + h) ** (-0.5 * N - s), c, 1.0,
                              weight="alg", wvar=(0.0, a), **opts)
    val = left + right
    return t ** (1.0 + 2.0 * s) * val


class TestGamma:
    @pytest.mark.parametrize("x, expected", [(1.0, 1.0), (0.5, math.sqrt(math.pi)),
                                             (1.5, 0.5 * math.sqrt(math.pi))])
    def test_examples(self, x, expected):
        assert gamma_fn(x) == pytest.approx(expected, rel=1e-14)

    @given(st.floats(min_value=1e-3, max_value=60.0))
    def test_matches_stdlib(self, x):
        assert gamma_fn(x) == pytest.approx(math.gamma(x), rel=1e-13)

    @pytest.mark.parametrize("x", [0.0, -1.0, math.inf, math.nan])
    def test_rejects_nonpositive(self, x):
        with pytest.raises(DomainError):
            gamma_fn(x)


class TestConstants:
    def test_params_validation(self):
        with pytest.raises(DomainError):
            FractionalParams(2, 1.0)
        with pytest.raises(DomainError):
            FractionalParams(0, 0.5)

    @pytest.mark.parametrize("N", range(2, 9))
    @pytest.mark.parametrize("s", np.round(np.arange(0.1, 0.91, 0.1), 10))
    def test_b_kappa_product(self, N, s):
        p = FractionalParams(N, s)
        assert p.b * p.kappa == pytest.approx(b_one(s), rel=1e-12)

    def test_b_one_half(self):
        # b_{1,1/2} = 1/pi
        assert b_one(0.5) == pytest.approx(1.0 / math.pi, rel=1e-14)

    def test_omega(self):
        assert FractionalParams(2, 0.5).omega == pytest.approx(2.0 * math.pi)
        assert FractionalParams(3, 0.5).omega == pytest.approx(4.0 * math.pi)


class TestPsi:
    def test_origin_examples(self):
        assert psi(FractionalParams(2, 0.5), 0.0) == pytest.approx(2.0, abs=1e-14)
        assert psi_big(FractionalParams(5, 0.25), 0.0) == pytest.approx(
            math.gamma(0.75) * math.gamma(2.0) / math.gamma(2.75), abs=1e-14)

    def test_n3_closed_form_example(self):
        assert psi(FractionalParams(3, 0.5), 1.0) == pytest.approx(0.5, abs=1e-14)

    def test_n2_against_quadrature(self):
        assert psi(FractionalParams(2, 0.3), 0.5) == pytest.approx(psi_quad(2, 0.3, 0.5), abs=1e-8)

    @pytest.mark.parametrize("N", [2, 4, 5])
    @pytest.mark.parametrize("s", [0.2, 0.5, 0.8])
    def test_defining_integral_grid(self, N, s):
        p = FractionalParams(N, s)
        for t in (1e-4, 0.01, 0.2, 0.7, 1.0):
            assert float(psi(p, t)) == pytest.approx(psi_quad(N, s, t), abs=1e-10)
            assert float(psi_defining_integral(p, t)) == pytest.approx(psi_quad(N, s, t), abs=1e-10)

    def test_domain(self):
        p = FractionalParams(2, 0.5)
        with pytest.raises(DomainError):
            psi(p, 1.5)
        with pytest.raises(DomainError):
            psi(p, -0.1)
        with pytest.raises(UnsupportedDimensionError):
            psi(FractionalParams(1, 0.5), 0.5)
        with pytest.raises(DomainError):
            psi_big(p, 0.6)

    def test_psi_big_example(self):
        p = FractionalParams(2, 0.7)
        assert float(psi_big(p, 0.25)) == pytest.approx(psi_quad(2, 0.7, 1.0 / math.sqrt(3.0)), abs=1e-10)

    @given(dims, orders, st.floats(min_value=0.0, max_value=1.0))
    @settings(max_examples=40, deadline=None)
    def test_change_of_variables(self, N, s, t):
        p = FractionalParams(N, s)
        assert float(psi_big(p, t * t / (1.0 + t * t))) == pytest.approx(float(psi(p, t)), abs=1e-10)

    @given(dims, orders, st.floats(min_value=0.0, max_value=0.5))
    @settings(max_examples=40, deadline=None)
    def test_upper_bound(self, N, s, T):
        bound = math.sqrt(math.pi) * math.gamma(0.5 * (N - 1)) / math.gamma(0.5 * N)
        assert float(psi_big(FractionalParams(N, s), T)) <= bound

    @given(dims, orders)
    @settings(max_examples=20, deadline=None)
    def test_continuity_at_origin(self, N, s):
        p = FractionalParams(N, s)
        gaps = np.abs(psi(p, np.array([1e-2, 1e-4, 1e-6])) - p.psi0)
        assert gaps[2] <= gaps[1] <= gaps[0]
        assert gaps[2] < 1e-5

    def test_extended_beyond_one(self):
        p = FractionalParams(2, 0.4)
        for t in (1.5, 3.0, 10.0):
            assert float(psi_extended(p, t)) == pytest.approx(psi_quad(2, 0.4, t), rel=1e-9)


class TestSphereIntegrals:
    def test_f_at_zero(self):
        assert float(f_rho(FractionalParams(2, 0.5), 0.0)) == pytest.approx(0.0, abs=1e-14)

    @pytest.mark.parametrize("N, s", [(2, 0.3), (3, 0.5), (4, 0.7)])
    def test_f_tends_to_kappa(self, N, s):
        p = FractionalParams(N, s)
        assert float(f_rho(p, 1e6)) == pytest.approx(p.kappa, abs=1e-4)
        assert float(g_rho(p, 1e6)) == pytest.approx(p.kappa, abs=1e-4)

    @pytest.mark.parametrize("N", [2, 3, 4])
    def test_g_endpoint_slope(self, N):
        p = FractionalParams(N, 0.5)
        eps = np.geomspace(1e-6, 1e-3, 8)
        slope = np.polyfit(np.log(eps), np.log(g_rho(p, 1.0 + eps)), 1)[0]
        assert slope == pytest.approx(0.5 * (N - 1), abs=0.02)

    def test_g_domain(self):
        with pytest.raises(DomainError):
            g_rho(FractionalParams(2, 0.5), 1.0)

    @pytest.mark.parametrize("N", [2, 3, 4])
    def test_F_at_r_zero(self, N):
        p = FractionalParams(N, 0.3)
        assert sphere_integral_F(p, 5.0, 0.5, 0.0) == pytest.approx(p.kappa, rel=1e-14)
        assert F_identity(p, 5.0, 0.5, 0.0) == pytest.approx(p.kappa, rel=1e-12)

    def test_F_n3_composition(self):
        p = FractionalParams(3, 0.5)
        expected = math.pi * float(psi(p, 1.0 / (2.0 * math.sqrt(110.0))))
        assert F_identity(p, 10.0, 0.0, 1.0) == pytest.approx(expected, rel=1e-14)
        assert sphere_integral_F(p, 10.0, 0.0, 1.0) == pytest.approx(expected, abs=1e-8)

    def test_F_n2_example(self):
        p = FractionalParams(2, 0.4)
        assert sphere_integral_F(p, 5.0, 1.0, 1.5, 1) == pytest.approx(F_identity(p, 5.0, 1.0, 1.5, 1), abs=1e-6)

    def test_circle_against_adaptive_quadrature(self):
        s, tau = 0.4, 0.8
        ref, _ = integrate.quad(lambda ph: tau * (1.0 + 4.0 * tau**2 * math.sin(0.5 * ph) ** 2) ** (-1.0 - s),
                                0.0, 2.0 * math.pi, epsabs=1e-13)
        assert float(shifted_sphere_integral(2, s, tau)) == pytest.approx(ref, rel=1e-12)

    def test_degenerate_radius(self):
        with pytest.raises(DomainError):
            sphere_integral_F(FractionalParams(2, 0.5), 1.5, -1.5, 0.5)

    @given(st.sampled_from([2, 3]), orders, st.floats(min_value=2.0, max_value=50.0),
           st.floats(min_value=-1.0, max_value=2.0), st.floats(min_value=0.01, max_value=2.0),
           st.sampled_from([1, -1]))
    @settings(max_examples=40, deadline=None)
    def test_identity_property(self, N, s, R, t, r, sign):
        assume(t + sign * r + R > 0.0)
        p = FractionalParams(N, s)
        assert sphere_integral_F(p, R, t, r, sign) == pytest.approx(F_identity(p, R, t, r, sign), abs=1e-6)

    def test_prefactor(self):
        assert sphere_prefactor(3) == pytest.approx(math.pi)
        with pytest.raises(UnsupportedDimensionError):
            sphere_prefactor(1)
