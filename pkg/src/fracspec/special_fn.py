"""Special functions behind the radial reduction of the fractional Laplacian.

The central object is the spherical-average profile

    psi(t) = t**(1+2s) * int_0^1 (h(1-h))**((N-3)/2) / (t**2 + h)**((N+2s)/2) dh,

together with its regularized form Psi(T), T = t**2/(1+t**2), the shifted
sphere integrals F built from it, and the normalization constants of the
fractional Laplacian. Substituting h = x/(1-x) in the integral defining
Psi gives

    Psi(T) = (1-T)**((N-1)/2) * int_0^1 (x(1-x))**((N-3)/2) (1-(1-T)x)**(s+1-N/2) dx,

which is smooth in T except for a T**(s+1/2) type term at T = 0. That
representation holds for every T in [0, 1) and therefore also provides the
continuation of psi to t > 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .errors import DomainError, UnsupportedDimensionError
from .quadrature import gauss_jacobi01, near_singular_half

__all__ = [
    "F_identity",
    "FractionalParams",
    "b_one",
    "f_rho",
    "g_rho",
    "gamma_fn",
    "psi",
    "psi_T",
    "psi_big",
    "psi_defining_integral",
    "psi_extended",
    "shifted_sphere_integral",
    "smooth_I",
    "sphere_integral_F",
    "sphere_prefactor",
]

_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def gamma_fn(x: float) -> float:
    """Gamma function for x > 0 (Lanczos, g=7, nine terms)."""
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise DomainError(f"gamma_fn needs a positive finite argument, got {x!r}")
    if x < 0.5:
        return gamma_fn(x + 1.0) / x
    z = x - 1.0
    acc = _LANCZOS[0]
    for i in range(1, len(_LANCZOS)):
        acc += _LANCZOS[i] / (z + i)
    t = z + _LANCZOS_G + 0.5
    # split the power to stay clear of overflow for large x
    half = t ** (0.5 * (z + 0.5))
    return _SQRT_2PI * half * half * math.exp(-t) * acc


def b_one(s: float) -> float:
    """Normalization constant of the one-dimensional fractional Laplacian."""
    return s * 4.0**s * gamma_fn(s + 0.5) / (math.sqrt(math.pi) * gamma_fn(1.0 - s))


def sphere_prefactor(N: int) -> float:
    """pi**((N-1)/2) / Gamma((N-1)/2), the factor relating F and psi."""
    if N < 2:
        raise UnsupportedDimensionError("the sphere prefactor needs N >= 2")
    return math.pi ** (0.5 * (N - 1)) / gamma_fn(0.5 * (N - 1))


@dataclass(frozen=True)
class FractionalParams:
    """Dimension N and order s of (-Delta)^s with the derived constants."""

    N: int
    s: float

    def __post_init__(self) -> None:
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.N!r}")
        if not 0.0 < float(self.s) < 1.0:
            raise DomainError(f"order s must lie in (0, 1), got {self.s!r}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "s", float(self.s))

    @cached_property
    def b(self) -> float:
        N, s = self.N, self.s
        return s * 4.0**s * gamma_fn(0.5 * N + s) / (math.pi ** (0.5 * N) * gamma_fn(1.0 - s))

    @cached_property
    def kappa(self) -> float:
        N, s = self.N, self.s
        return math.pi ** (0.5 * (N - 1)) * gamma_fn(0.5 + s) / gamma_fn(0.5 * N + s)

    @cached_property
    def omega(self) -> float:
        return 2.0 * math.pi ** (0.5 * self.N) / gamma_fn(0.5 * self.N)

    @cached_property
    def psi0(self) -> float:
        """psi(0) = Gamma(1/2+s) Gamma((N-1)/2) / Gamma((N+2s)/2)."""
        if self.N < 2:
            raise UnsupportedDimensionError("psi needs N >= 2")
        N, s = self.N, self.s
        return gamma_fn(0.5 + s) * gamma_fn(0.5 * (N - 1)) / gamma_fn(0.5 * N + s)

    def with_dimension(self, N: int) -> FractionalParams:
        return FractionalParams(N, self.s)


def _check_dim(params: FractionalParams) -> None:
    if params.N < 2:
        raise UnsupportedDimensionError("psi and the sphere integrals need N >= 2")


def _as_output(values: np.ndarray, scalar: bool):
    return float(values[0]) if scalar else values


# ---------------------------------------------------------------------------
# reference quadrature routes


def _I_reference(N: int, s: float, T: np.ndarray) -> np.ndarray:
    """int_0^1 (x(1-x))**a (1 - (1-T)x)**(-c) dx, a=(N-3)/2, c=N/2-1-s."""
    a = 0.5 * (N - 3)
    c = 0.5 * N - 1.0 - s
    T = np.atleast_1d(np.asarray(T, dtype=float))
    z = 1.0 - T
    # x in [0, 1/2]: only the x**a endpoint factor is singular
    xj, wj = gauss_jacobi01(40, a)
    x = 0.5 * xj
    left = 0.5 ** (a + 1.0) * (((1.0 - x) ** a)[None, :] * (1.0 - z[:, None] * x[None, :]) ** (-c)) @ wj
    # x = 1 - y, y in [0, 1/2]: (1 - zx) = T + z y is near-singular for small T
    right = near_singular_half(a, c, np.maximum(T, 1e-300), z)
    return left + right


def _Psi_reference(N: int, s: float, T: np.ndarray) -> np.ndarray:
    T = np.atleast_1d(np.asarray(T, dtype=float))
    if N == 3:
        return (2.0 / (1.0 + 2.0 * s)) * (1.0 - T ** (s + 0.5))
    return (1.0 - T) ** (0.5 * (N - 1)) * _I_reference(N, s, T)


def psi_defining_integral(params: FractionalParams, t):
    """psi(t) by direct quadrature of its defining integral, any t >= 0."""
    _check_dim(params)
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0) or not np.all(np.isfinite(t)):
        raise DomainError("psi_defining_integral needs finite t >= 0")
    N, s = params.N, params.s
    a = 0.5 * (N - 3)
    p = 0.5 * N + s
    out = np.full(t.shape, params.psi0)
    pos = t > 0
    if np.any(pos):
        tt = t[pos]
        eps = tt * tt
        # h in [0, 1/2]: near singularity at h = -t^2
        near = near_singular_half(a, p, eps, np.ones_like(eps))
        # h = 1 - y, y in [0, 1/2]
        xj, wj = gauss_jacobi01(40, a)
        y = 0.5 * xj
        far = 0.5 ** (a + 1.0) * (((1.0 - y) ** a)[None, :] * (eps[:, None] + 1.0 - y[None, :]) ** (-p)) @ wj
        out[pos] = tt ** (1.0 + 2.0 * s) * (near + far)
    return _as_output(out, scalar)


# ---------------------------------------------------------------------------
# fast tabulated route (piecewise Chebyshev in T, dyadic toward T = 0)

_CHEB_DEG = 24
_DYADIC_LEVELS = 56


class _PsiTable:
    """Piecewise Chebyshev interpolant of the smooth factor I(T) on [0, 1]."""

    def __init__(self, N: int, s: float) -> None:
        self.N, self.s = N, s
        edges = [(0.75, 1.0), (0.5, 0.75)]
        edges += [(2.0 ** (-k - 1), 2.0 ** (-k)) for k in range(1, _DYADIC_LEVELS + 1)]
        self.lo = np.array([e[0] for e in edges])
        self.hi = np.array([e[1] for e in edges])
        m = _CHEB_DEG + 1
        u = np.cos(np.pi * (np.arange(m) + 0.5) / m)
        T = 0.5 * (self.lo[:, None] + self.hi[:, None]) + 0.5 * (self.hi - self.lo)[:, None] * u[None, :]
        vals = _I_reference(N, s, T.ravel()).reshape(T.shape)
        V = np.polynomial.chebyshev.chebvander(u, _CHEB_DEG)
        self.coeffs = np.linalg.solve(V, vals.T).T
        a = 0.5 * (N - 3)
        self.I0 = gamma_fn(a + 1.0) * gamma_fn(s + 0.5) / gamma_fn(a + s + 1.5)
        self.T_min = self.lo[-1]
        self.I_min = float(_I_reference(N, s, np.array([self.T_min]))[0])

    def __call__(self, T: np.ndarray) -> np.ndarray:
        T = np.asarray(T, dtype=float)
        out = np.empty(T.shape)
        _, expo = np.frexp(T)
        idx = np.where(T >= 0.75, 0, np.where(T >= 0.5, 1, 1 - expo))
        tiny = T < self.T_min
        ok = ~tiny
        flat_T = T[ok]
        flat_idx = idx[ok]
        vals = np.empty(flat_T.shape)
        # group by piece so each Chebyshev series is evaluated once per group
        for piece in np.unique(flat_idx):
            sel = flat_idx == piece
            lo, hi = self.lo[piece], self.hi[piece]
            u = (2.0 * flat_T[sel] - lo - hi) / (hi - lo)
            vals[sel] = np.polynomial.chebyshev.chebval(u, self.coeffs[piece])
        out[ok] = vals
        if np.any(tiny):
            # leading singular behaviour I(T) - I(0) ~ T**(s+1/2)
            frac = (T[tiny] / self.T_min) ** (self.s + 0.5)
            out[tiny] = self.I0 + (self.I_min - self.I0) * frac
        return out


@lru_cache(maxsize=64)
def _table(N: int, s: float) -> _PsiTable:
    return _PsiTable(N, s)


def psi_T(N: int, s: float, T) -> np.ndarray:
    """Vectorized Psi(T) for T in [0, 1]; tabulated for N != 3."""
    T = np.asarray(T, dtype=float)
    if N == 3:
        return (2.0 / (1.0 + 2.0 * s)) * (1.0 - T ** (s + 0.5))
    return (1.0 - T) ** (0.5 * (N - 1)) * _table(N, float(s))(T)


def smooth_I(N: int, s: float, T, z) -> np.ndarray:
    """Psi(T) / z**((N-1)/2) with z = 1 - T supplied accurately by the caller.

    This factor is bounded and smooth near T = 1, where Psi itself
    vanishes like z**((N-1)/2).
    """
    T = np.asarray(T, dtype=float)
    z = np.asarray(z, dtype=float)
    if N != 3:
        return _table(N, float(s))(T)
    sigma = s + 0.5
    with np.errstate(invalid="ignore", divide="ignore"):
        logT = np.where(T < 0.5, np.log(np.maximum(T, 1e-300)), np.log1p(-np.minimum(z, 0.5)))
        ratio = -np.expm1(sigma * logT) / z
    ratio = np.where(z > 0.0, ratio, sigma)
    return (2.0 / (1.0 + 2.0 * s)) * ratio


# ---------------------------------------------------------------------------
# public psi / Psi


def psi(params: FractionalParams, t):
    """psi(t) on [0, 1] with the three analytic routes (t=0, N=3, Psi)."""
    _check_dim(params)
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(~np.isfinite(t)) or np.any(t < 0.0) or np.any(t > 1.0):
        raise DomainError("psi is defined for t in [0, 1]")
    T = t * t / (1.0 + t * t)
    out = _Psi_reference(params.N, params.s, T)
    out[t == 0.0] = params.psi0
    return _as_output(out, scalar)


def psi_big(params: FractionalParams, T):
    """Psi(T) on [0, 1/2], the regularized form of psi."""
    _check_dim(params)
    scalar = np.ndim(T) == 0
    T = np.atleast_1d(np.asarray(T, dtype=float))
    if np.any(~np.isfinite(T)) or np.any(T < 0.0) or np.any(T > 0.5):
        raise DomainError("Psi is defined for T in [0, 1/2]")
    out = _Psi_reference(params.N, params.s, T)
    out[T == 0.0] = params.psi0
    return _as_output(out, scalar)


def psi_extended(params: FractionalParams, t):
    """psi continued to all t >= 0 through the same defining integral."""
    _check_dim(params)
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0.0) or np.any(np.isnan(t)):
        raise DomainError("psi_extended needs t >= 0")
    with np.errstate(over="ignore", invalid="ignore"):
        T = np.where(np.isinf(t), 1.0, t * t / (1.0 + t * t))
    out = _Psi_reference(params.N, params.s, T)
    out[t == 0.0] = params.psi0
    return _as_output(out, scalar)


# ---------------------------------------------------------------------------
# shifted sphere integrals


def shifted_sphere_integral(N: int, s: float, tau):
    """int over tau(S^{N-1} - e1) of (1 + |theta|^2)**(-(N+2s)/2) by direct quadrature.

    N = 2 uses the periodic trapezoidal rule on the circle; N >= 3 uses the
    polar-angle reduction to a one-dimensional Jacobi-weighted integral.
    """
    if N < 2:
        raise UnsupportedDimensionError("sphere integrals need N >= 2")
    scalar = np.ndim(tau) == 0
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    if np.any(tau < 0) or not np.all(np.isfinite(tau)):
        raise DomainError("sphere radius must be finite and nonnegative")
    p = 0.5 * N + s
    out = np.empty(tau.shape)
    if N == 2:
        for k, tk in enumerate(tau):
            m = 64 + int(math.ceil(48.0 * tk))
            phi = 2.0 * math.pi * np.arange(m) / m
            dist2 = 4.0 * tk * tk * np.sin(0.5 * phi) ** 2
            out[k] = tk * (2.0 * math.pi / m) * np.sum((1.0 + dist2) ** (-p))
        return _as_output(out, scalar)
    a = 0.5 * (N - 3)
    surf = 2.0 * math.pi ** (0.5 * (N - 1)) / gamma_fn(0.5 * (N - 1))
    # polar angle: |theta|^2 = 2 tau^2 (1 - cos); u = 1 - cos = 2v, v in [0, 1]
    beta = 4.0 * tau * tau
    near = near_singular_half(a, p, np.ones_like(tau), beta)
    xj, wj = gauss_jacobi01(40, a)
    y = 0.5 * xj
    far = 0.5 ** (a + 1.0) * (((1.0 - y) ** a)[None, :] * (1.0 + beta[:, None] * (1.0 - y[None, :])) ** (-p)) @ wj
    out[:] = tau ** (N - 1) * surf * 2.0 ** (2.0 * a + 1.0) * (near + far)
    return _as_output(out, scalar)


def _F_radius(R: float, t: float, r: float, sign: int) -> float:
    """Radius sqrt((t+R)(t+-r+R))/r of the shifted sphere, inf for r = 0."""
    if sign not in (1, -1):
        raise DomainError("sign must be +1 or -1")
    a = t + R
    b = t + sign * r + R
    if a <= 0.0 or b <= 0.0:
        raise DomainError("degenerate radius: (t+R) and (t +- r + R) must be positive")
    if r == 0.0:
        return math.inf
    return math.sqrt(a * b) / r


def sphere_integral_F(params: FractionalParams, R: float, t: float, r: float, sign: int = 1) -> float:
    """F_R^{+-}(t, r) by direct quadrature over the shifted sphere."""
    _check_dim(params)
    if not (-2.0 <= t <= 2.0 and 0.0 <= r <= 2.0 and R > 1.0):
        raise DomainError("sphere_integral_F needs R > 1, t in [-2, 2], r in [0, 2]")
    tau = _F_radius(R, t, r, sign)
    if math.isinf(tau):
        return params.kappa
    return float(shifted_sphere_integral(params.N, params.s, tau))


def F_identity(params: FractionalParams, R: float, t: float, r: float, sign: int = 1) -> float:
    """F_R^{+-}(t, r) through psi: prefactor * psi(r / (2 sqrt((t+R)(t+-r+R))))."""
    _check_dim(params)
    tau = _F_radius(R, t, r, sign)
    arg = 0.0 if math.isinf(tau) else 0.5 / tau
    return sphere_prefactor(params.N) * float(psi_extended(params, arg))


def _f_or_g(params: FractionalParams, rho: np.ndarray, shift: float) -> np.ndarray:
    taus = np.sqrt(rho * (rho + shift))
    out = np.zeros(rho.shape)
    pos = taus > 0
    if not np.any(pos):
        return out
    arg = 0.5 / taus[pos]
    small = arg <= 1.0
    vals = np.empty(arg.shape)
    if np.any(small):
        vals[small] = sphere_prefactor(params.N) * np.atleast_1d(psi(params, arg[small]))
    if np.any(~small):
        vals[~small] = np.atleast_1d(shifted_sphere_integral(params.N, params.s, taus[pos][~small]))
    out[pos] = vals
    return out


def f_rho(params: FractionalParams, rho):
    """Sphere integral over radius sqrt(rho(rho+1)); tends to kappa as rho grows."""
    _check_dim(params)
    scalar = np.ndim(rho) == 0
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if np.any(rho < 0.0) or not np.all(np.isfinite(rho)):
        raise DomainError("f_rho needs finite rho >= 0")
    return _as_output(_f_or_g(params, rho, 1.0), scalar)


def g_rho(params: FractionalParams, rho):
    """Sphere integral over radius sqrt(rho(rho-1)) for rho > 1."""
    _check_dim(params)
    scalar = np.ndim(rho) == 0
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    if np.any(rho <= 1.0) or not np.all(np.isfinite(rho)):
        raise DomainError("g_rho needs finite rho > 1")
    return _as_output(_f_or_g(params, rho, -1.0), scalar)
