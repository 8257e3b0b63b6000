"""Reduced one-dimensional kernels and killing potentials for radial functions.

For a radial function u(x) = U(|x|) the fractional Dirichlet form in R^N
reduces, after averaging over spheres, to

    int int (u(x)-u(y))^2 |x-y|^{-N-2s} = omega_N * [ int int (U(rho)-U(rho'))^2 J drho drho'
                                                      + 2 int U^2 kappa_geom ],

with the core kernel

    J(rho, rho') = (rho rho')^{(N-1)/2} |rho-rho'|^{-1-2s} * C_N * psi(|rho-rho'| / (2 sqrt(rho rho'))),

C_N = pi^{(N-1)/2} / Gamma((N-1)/2), and kappa_geom the integral of J over
radii outside the domain. On the annulus R < |x| < R+1 the same form is
written in the shifted variable r = rho - R; there the kernel is K_R / |r-r'|^{1+2s}
and the far part of the killing integral is the potential V_R.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainError,
    ParameterError,
    SingularEvaluationError,
    UnsupportedDimensionError,
)
from .quadrature import gauss_jacobi01, gauss_legendre01, uniform_panels
from .special_fn import FractionalParams, smooth_I, sphere_prefactor

__all__ = [
    "KernelEval",
    "RadialGeometry",
    "core_kernel",
    "core_smooth",
    "interval_killing",
    "kernel_K_R",
    "kernel_Kbar_R",
    "killing_geom",
    "killing_potential",
    "potential_V_R",
    "rescaled_killing",
    "rescaled_smooth",
    "window_potential",
]


@dataclass(frozen=True)
class RadialGeometry:
    """Radial section of an annulus {inner < |x| < outer}, a ball, or the unit interval."""

    N: int
    inner: float
    outer: float
    kind: str = "annulus"

    def __post_init__(self) -> None:
        if self.kind not in ("annulus", "ball", "interval"):
            raise ParameterError(f"unknown geometry kind {self.kind!r}")
        if not self.outer > self.inner >= 0.0:
            raise ParameterError("need outer > inner >= 0")
        if self.kind == "ball" and self.inner != 0.0:
            raise ParameterError("a ball has inner radius 0")
        if self.kind == "annulus" and self.inner <= 0.0:
            raise ParameterError("an annulus needs a positive inner radius")
        if self.kind == "interval" and (self.inner, self.outer) != (0.0, 1.0):
            raise ParameterError("the interval geometry is (0, 1)")
        if self.kind != "interval" and self.N < 2:
            raise UnsupportedDimensionError("radial geometries need N >= 2")

    @classmethod
    def annulus(cls, N: int, inner: float, outer: float) -> RadialGeometry:
        return cls(N, float(inner), float(outer), "annulus")

    @classmethod
    def shell(cls, N: int, R: float) -> RadialGeometry:
        """The annulus A_R = {R < |x| < R + 1}."""
        return cls(N, float(R), float(R) + 1.0, "annulus")

    @classmethod
    def ball(cls, N: int, outer: float = 1.0) -> RadialGeometry:
        return cls(N, 0.0, float(outer), "ball")

    @classmethod
    def interval(cls) -> RadialGeometry:
        return cls(1, 0.0, 1.0, "interval")

    @property
    def width(self) -> float:
        return self.outer - self.inner

    def distance(self, rho):
        """Distance to the boundary of the radial section."""
        rho = np.asarray(rho, dtype=float)
        if self.kind == "ball":
            return self.outer - rho
        return np.minimum(rho - self.inner, self.outer - rho)


@dataclass(frozen=True)
class KernelEval:
    """Kernel value split into its singular and smooth factors."""

    value: float
    singular_factor: float
    smooth_factor: float


def core_smooth(N: int, s: float, rho, rho_t, diff=None) -> np.ndarray:
    """Smooth factor (rho rho')^{(N-1)/2} C_N psi(.) of the core kernel J.

    diff = rho - rho' may be passed when the caller knows it more
    accurately than the difference of two large radii.
    """
    rho = np.asarray(rho, dtype=float)
    rho_t = np.asarray(rho_t, dtype=float)
    if diff is None:
        diff = rho - rho_t
    tot = rho + rho_t
    T = (np.asarray(diff, dtype=float) / tot) ** 2
    z = 4.0 * rho * rho_t / (tot * tot)
    half = 0.5 * (N - 1)
    return sphere_prefactor(N) * (rho * rho_t * z) ** half * smooth_I(N, s, T, z)


def core_kernel(params: FractionalParams, rho: float, rho_t: float) -> KernelEval:
    """J(rho, rho') together with its singular and smooth factors."""
    if params.N < 2:
        raise UnsupportedDimensionError("the core kernel needs N >= 2")
    if not (rho > 0.0 and rho_t > 0.0):
        raise DomainError("radii must be positive")
    if rho == rho_t:
        raise SingularEvaluationError("the core kernel is singular on the diagonal")
    smooth = float(core_smooth(params.N, params.s, rho, rho_t))
    singular = abs(rho - rho_t) ** (-1.0 - 2.0 * params.s)
    return KernelEval(smooth * singular, singular, smooth)


def rescaled_smooth(N: int, s: float, R: float, r, r_t, diff=None) -> np.ndarray:
    """K_R(r, r'): the smooth factor of the shifted annulus kernel.

    Evaluated through psi(t) with t = |r-r'|/(2 sqrt((r+R)(r'+R))).
    """
    r = np.asarray(r, dtype=float)
    r_t = np.asarray(r_t, dtype=float)
    if diff is None:
        diff = r - r_t
    diff = np.asarray(diff, dtype=float)
    a = (r + R) / R
    b = (r_t + R) / R
    four_ab = 4.0 * a * b
    d2 = (diff / R) ** 2
    T = d2 / (d2 + four_ab)
    z = four_ab / (d2 + four_ab)
    half = 0.5 * (N - 1)
    return sphere_prefactor(N) * (a * b) ** half * z**half * smooth_I(N, s, T, z)


def kernel_K_R(params: FractionalParams, R: float, r: float, r_t: float) -> float:
    """K_R(r, r'), continuous across r = r'."""
    if R < 1.0:
        raise DomainError("K_R needs R >= 1")
    if r <= -R or r_t <= -R:
        raise DomainError("K_R needs r, r' > -R")
    return float(rescaled_smooth(params.N, params.s, R, r, r_t))


def kernel_Kbar_R(params: FractionalParams, R: float, r: float, r_t: float) -> KernelEval:
    """K_R(r, r') / |r - r'|^{1+2s} with its factors."""
    if r == r_t:
        raise SingularEvaluationError("the rescaled kernel is singular on the diagonal")
    smooth = kernel_K_R(params, R, r, r_t)
    singular = abs(r - r_t) ** (-1.0 - 2.0 * params.s)
    return KernelEval(smooth * singular, singular, smooth)


# ---------------------------------------------------------------------------
# killing integrals in the substituted variables
#
# For radii inside the hole, rho' = rho mu/(1+mu) turns int J drho' into
#   rho^{N-1-2s} C_N int (1+mu)^{2s-1} (2mu/(2mu+1))^{N-1} I(T(mu)) dmu,
# and for radii beyond the outer sphere, rho' = rho (1+nu)/nu gives
#   rho^{N-1-2s} C_N int nu^{2s-1} (2(1+nu)/(2nu+1))^{N-1} I(T(nu)) dnu,
# with T(x) = 1/(2x+1)^2 in both cases (I is the bounded factor of psi).

_N_GAUSS = 24
_PANEL = 12


def _T_z(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    q = 2.0 * x + 1.0
    return 1.0 / (q * q), 4.0 * x * (x + 1.0) / (q * q)


def _inner_integral(N: int, s: float, mu_max: np.ndarray) -> np.ndarray:
    mu_max = np.asarray(mu_max, dtype=float)
    out = np.zeros(mu_max.shape)

    def integrand(mu):
        T, z = _T_z(mu)
        return (1.0 + mu) ** (2.0 * s - 1.0) * (2.0 * mu / (2.0 * mu + 1.0)) ** (N - 1) * smooth_I(N, s, T, z)

    m = np.minimum(mu_max, 1.0)
    xg, wg = gauss_legendre01(_N_GAUSS)
    mu = m[:, None] * xg[None, :]
    out += m * (integrand(mu) @ wg)
    big = mu_max > 1.0
    if np.any(big):
        v_lo = np.full(int(big.sum()), math.log(2.0))
        v_hi = np.log1p(mu_max[big])
        v, w = uniform_panels(v_lo, v_hi, 1.0, _PANEL)
        mu = np.expm1(v)
        out[big] += np.sum(w * integrand(mu) * (1.0 + mu), axis=1)
    return out


def _outer_integral(N: int, s: float, nu_max: np.ndarray) -> np.ndarray:
    nu_max = np.asarray(nu_max, dtype=float)
    out = np.zeros(nu_max.shape)

    def smooth(nu):
        T, z = _T_z(nu)
        return (2.0 * (1.0 + nu) / (2.0 * nu + 1.0)) ** (N - 1) * smooth_I(N, s, T, z)

    m = np.minimum(nu_max, 1.0)
    xj, wj = gauss_jacobi01(_N_GAUSS, 2.0 * s - 1.0)
    nu = m[:, None] * xj[None, :]
    out += m ** (2.0 * s) * (smooth(nu) @ wj)
    big = nu_max > 1.0
    if np.any(big):
        v_lo = np.zeros(int(big.sum()))
        v_hi = np.log(nu_max[big])
        v, w = uniform_panels(v_lo, v_hi, 1.0, _PANEL)
        nu = np.exp(v)
        out[big] += np.sum(w * nu ** (2.0 * s) * smooth(nu), axis=1)
    return out


def killing_geom(N: int, s: float, rho, d_in, d_out, inner: float, outer: float) -> np.ndarray:
    """kappa_geom(rho) = int over (0, inf) minus (inner, outer) of J(rho, .).

    d_in = rho - inner and d_out = outer - rho are passed separately so that
    points close to a boundary keep their relative accuracy.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    d_in = np.broadcast_to(np.asarray(d_in, dtype=float), rho.shape)
    d_out = np.broadcast_to(np.asarray(d_out, dtype=float), rho.shape)
    pref = sphere_prefactor(N) * rho ** (N - 1 - 2.0 * s)
    total = _outer_integral(N, s, rho / d_out)
    if inner > 0.0:
        total = total + _inner_integral(N, s, inner / d_in)
    return pref * total


def killing_potential(geometry: RadialGeometry, params: FractionalParams, rho):
    """Radial killing potential kappa_geom at radii strictly inside the section."""
    if geometry.kind == "interval":
        return interval_killing(rho, params.s)
    if params.N != geometry.N:
        raise ParameterError("geometry and parameters disagree on N")
    scalar = np.ndim(rho) == 0
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if np.any(rho <= geometry.inner) or np.any(rho >= geometry.outer):
        raise DomainError("the killing potential diverges at the boundary; rho must be interior")
    out = killing_geom(params.N, params.s, rho, rho - geometry.inner, geometry.outer - rho,
                       geometry.inner, geometry.outer)
    return float(out[0]) if scalar else out


def potential_V_R(params: FractionalParams, R: float, r):
    """V_R(r) = 2 int over (-R, inf) minus (-2, 2) of K_R / |r - r'|^{1+2s}."""
    if R < 2.0:
        raise DomainError("V_R needs R >= 2")
    scalar = np.ndim(r) == 0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r <= -2.0) or np.any(r >= 2.0):
        raise DomainError("V_R is evaluated for r in (-2, 2)")
    N, s = params.N, params.s
    rho = R + r
    pref = sphere_prefactor(N) * rho ** (N - 1 - 2.0 * s) / R ** (N - 1)
    inner = _inner_integral(N, s, (R - 2.0) / (r + 2.0)) if R > 2.0 else 0.0
    outer = _outer_integral(N, s, rho / (2.0 - r))
    out = 2.0 * pref * (inner + outer)
    return float(out[0]) if scalar else out


def window_potential(params: FractionalParams, R: float, r, d0=None, d1=None) -> np.ndarray:
    """int over (-2, 0) and (1, 2) of K_R(r, r') / |r - r'|^{1+2s} dr', r in (0, 1).

    d0 = r and d1 = 1 - r may be supplied for accuracy near the ends.
    """
    r = np.atleast_1d(np.asarray(r, dtype=float))
    d0 = r if d0 is None else np.broadcast_to(np.asarray(d0, dtype=float), r.shape)
    d1 = 1.0 - r if d1 is None else np.broadcast_to(np.asarray(d1, dtype=float), r.shape)
    if np.any(d0 <= 0.0) or np.any(d1 <= 0.0):
        raise DomainError("window potential needs r strictly inside (0, 1)")
    N, s = params.N, params.s
    total = np.zeros(r.shape)
    for lo, hi, sign in ((d0, d0 + 2.0, -1.0), (d1, d1 + 1.0, 1.0)):
        v, w = uniform_panels(np.log(lo), np.log(hi), 0.5, _PANEL)
        delta = np.exp(v)
        rr = r[:, None]
        k = rescaled_smooth(N, s, R, rr, rr + sign * delta, diff=-sign * delta)
        total += np.sum(w * delta ** (-2.0 * s) * k, axis=1)
    return total


def rescaled_killing(params: FractionalParams, R: float, r, d0=None, d1=None) -> np.ndarray:
    """Total killing weight of the shifted form: window part + V_R / 2."""
    return window_potential(params, R, r, d0, d1) + 0.5 * np.atleast_1d(potential_V_R(params, R, r))


def interval_killing(r, s: float, d0=None, d1=None):
    """Exact killing term of (0, 1): int over R minus (0, 1) of |r - r'|^{-1-2s} dr'."""
    r = np.asarray(r, dtype=float)
    d0 = r if d0 is None else np.asarray(d0, dtype=float)
    d1 = 1.0 - r if d1 is None else np.asarray(d1, dtype=float)
    if np.any(d0 <= 0.0) or np.any(d1 <= 0.0):
        raise DomainError("interval killing term needs r in (0, 1)")
    return (d0 ** (-2.0 * s) + d1 ** (-2.0 * s)) / (2.0 * s)
