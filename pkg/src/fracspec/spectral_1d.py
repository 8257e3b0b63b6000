"""Galerkin discretization of the reduced one-dimensional eigenproblem.

Three formulations share one assembly routine:

* ``interval``: (-Delta)^s on (0, 1), kernel b_{1,s} |r-r'|^{-1-2s};
* ``direct``: radial functions on {inner < |x| < outer} with the core kernel J,
  the geometric killing potential and mass weight omega_N rho^{N-1};
* ``rescaled``: the annulus R < |x| < R+1 in the shifted variable r = rho - R,
  with kernel K_R/|r-r'|^{1+2s}, potential V_R and mass weight (1+r/R)^{N-1}.

Each has the form  stiffness = c [ int int (phi_i(x)-phi_i(y))(phi_j(x)-phi_j(y)) k(x,y)
+ 2 int phi_i phi_j kill ]  with k = lam(x,y) |x-y|^{-1-2s} and lam bounded.
Basis functions are continuous piecewise-linear hats vanishing at both ends.
"""

from __future__ import annotations

import json
import math
from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import AssemblyDefectError, DomainError, ParameterError
from .quadrature import gauss_jacobi01, gauss_legendre01
from .radial_kernel import (
    RadialGeometry,
    core_smooth,
    interval_killing,
    killing_geom,
    rescaled_killing,
    rescaled_smooth,
)
from .special_fn import FractionalParams, b_one

__all__ = [
    "EigenPair",
    "Mesh1D",
    "ReducedOperator",
    "assemble_direct",
    "assemble_interval",
    "assemble_rescaled",
    "boundary_quotient",
    "build_mesh",
    "eigen_data_json",
    "fit_ds_quotient",
    "rayleigh_quotient",
    "solve_smallest",
]

FAR_ORDER = 6
NEAR_ORDER = 10
KILL_ORDER = 10


@dataclass(frozen=True)
class Mesh1D:
    """Graded mesh of [lo, hi]; distances to both ends are stored exactly."""

    lo: float
    hi: float
    grading: float
    widths: np.ndarray = field(repr=False)

    @property
    def n_elements(self) -> int:
        return int(self.widths.size)

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def left(self) -> np.ndarray:
        """Distance of each node from lo."""
        return self.length * np.concatenate(([0.0], np.cumsum(self.widths)))

    @property
    def right(self) -> np.ndarray:
        """Distance of each node from hi."""
        return self.length * np.concatenate((np.cumsum(self.widths[::-1])[::-1], [0.0]))

    @property
    def nodes(self) -> np.ndarray:
        x = self.lo + self.left
        x[-1] = self.hi
        return x

    @property
    def h(self) -> np.ndarray:
        return self.length * self.widths


def build_mesh(lo: float, hi: float, n: int, gamma: float = 2.0) -> Mesh1D:
    """Mesh symmetric about the midpoint with nodes x_k = lo + L g(k/n).

    g(t) = (2t)^gamma / 2 on [0, 1/2] and 1 - g(1 - t) beyond, so the k-th
    node lies at distance proportional to (k/n)^gamma from the nearer end.
    """
    if int(n) != n or n < 8:
        raise ParameterError("mesh needs an integer n >= 8")
    if not 1.0 <= gamma <= 4.0:
        raise ParameterError("grading exponent must lie in [1, 4]")
    if not hi > lo:
        raise ParameterError("need hi > lo")
    n = int(n)
    t = np.arange(n + 1) / n
    half = 0.5 * (2.0 * np.minimum(t, 1.0 - t)) ** gamma
    # widths from the left half, mirrored so the mesh is exactly symmetric
    g = np.where(t <= 0.5, half, 1.0 - half)
    w = np.diff(g)
    m = n // 2
    w[n - m:] = w[:m][::-1]
    return Mesh1D(float(lo), float(hi), float(gamma), w / w.sum())


@dataclass
class ReducedOperator:
    """Stiffness/mass pair on the interior nodes of a mesh."""

    stiffness: np.ndarray
    mass: np.ndarray
    mesh: Mesh1D
    s: float
    meta: dict

    @property
    def size(self) -> int:
        return self.stiffness.shape[0]


@dataclass
class EigenPair:
    """Eigenvalue, nodal eigenfunction (boundary zeros included) and boundary data."""

    lam: float
    coeffs: np.ndarray
    q_inner: float
    q_outer: float
    residual: float
    fit_residual: tuple[float, float] = (0.0, 0.0)
    low_confidence: bool = False


# ---------------------------------------------------------------------------
# formulations


@dataclass
class _Formulation:
    tag: str
    prefactor: float
    smooth: Callable  # (x, y, diff) -> lam, with x, y physical coordinates
    kill: Callable  # (x, d_lo, d_hi) -> killing weight
    weight: Callable  # (x) -> mass weight
    mass_prefactor: float = 1.0
    constant_kernel: bool = False


def _interval_formulation(s: float) -> _Formulation:
    return _Formulation(
        tag="interval",
        prefactor=0.5 * b_one(s),
        smooth=lambda x, y, d: np.ones(np.broadcast(x, y).shape),
        kill=lambda x, d0, d1: interval_killing(x, s, d0, d1),
        weight=lambda x: np.ones_like(x),
        constant_kernel=True,
    )


def _direct_formulation(geometry: RadialGeometry, params: FractionalParams) -> _Formulation:
    N, s = params.N, params.s
    inner, outer = geometry.inner, geometry.outer
    return _Formulation(
        tag="direct",
        prefactor=0.5 * params.b * params.omega,
        smooth=lambda x, y, d: core_smooth(N, s, x, y, d),
        kill=lambda x, d0, d1: killing_geom(N, s, x, d0, d1, inner, outer),
        weight=lambda x: x ** (N - 1),
        mass_prefactor=params.omega,
    )


def _rescaled_formulation(R: float, params: FractionalParams) -> _Formulation:
    N, s = params.N, params.s
    return _Formulation(
        tag="rescaled",
        prefactor=0.5 * params.b,
        smooth=lambda x, y, d: rescaled_smooth(N, s, R, x, y, d),
        kill=lambda x, d0, d1: rescaled_killing(params, R, x, d0, d1),
        weight=lambda x: (1.0 + x / R) ** (N - 1),
    )


# ---------------------------------------------------------------------------
# assembly


def _far_part(form: _Formulation, mesh: Mesh1D, s: float, workers: int) -> np.ndarray:
    """Element pairs that do not touch, tensor Gauss-Legendre."""
    n = mesh.n_elements
    xg, wg = gauss_legendre01(FAR_ORDER)
    h = mesh.h
    left = mesh.left[:-1]
    dist = left[:, None] + h[:, None] * xg[None, :]  # distance from lo
    x = (mesh.lo + dist).ravel()
    dist = dist.ravel()
    w = (h[:, None] * wg[None, :]).ravel()
    elem = np.repeat(np.arange(n), FAR_ORDER)
    # basis values: element e carries nodes e (1 - xi) and e+1 (xi)
    P = np.zeros((x.size, n + 1))
    rows = np.arange(x.size)
    xi = np.tile(xg, n)
    P[rows, elem] = 1.0 - xi
    P[rows, elem + 1] = xi

    def block(sl: slice) -> tuple[np.ndarray, np.ndarray]:
        diff = dist[sl, None] - dist[None, :]
        far = np.abs(elem[sl, None] - elem[None, :]) >= 2
        with np.errstate(divide="ignore"):
            kern = np.where(far, np.abs(diff) ** (-1.0 - 2.0 * s), 0.0)
        if not form.constant_kernel:
            lam = form.smooth(x[sl, None], x[None, :], diff)
            kern = np.where(far, kern * lam, 0.0)
        return kern @ w, kern @ (w[:, None] * P)

    chunk = max(1, 2_000_000 // max(1, x.size))
    slices = [slice(i, min(i + chunk, x.size)) for i in range(0, x.size, chunk)]
    if workers > 1 and len(slices) > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(block, slices))
    else:
        parts = [block(sl) for sl in slices]
    kw = np.concatenate([p[0] for p in parts])
    kwp = np.concatenate([p[1] for p in parts], axis=0)
    WP = w[:, None] * P
    return 2.0 * (P.T @ ((w * kw)[:, None] * P)) - 2.0 * (WP.T @ kwp)


def _self_part(form: _Formulation, mesh: Mesh1D, s: float) -> np.ndarray:
    """Identical element pairs: (u(x)-u(y))^2 = u'^2 (x-y)^2 on one element."""
    n = mesh.n_elements
    A = np.zeros((n + 1, n + 1))
    zj, wz = gauss_jacobi01(NEAR_ORDER, 1.0 - 2.0 * s)
    xg, wg = gauss_legendre01(NEAR_ORDER)
    h = mesh.h
    left = mesh.left[:-1]
    # xi = eta + z, eta = (1 - z) v
    z = zj[:, None]
    eta = (1.0 - z) * xg[None, :]
    W = 2.0 * wz[:, None] * (1.0 - z) * wg[None, :]
    if form.constant_kernel:
        integral = np.full(n, W.sum())
    else:
        dy = left[:, None, None] + h[:, None, None] * eta[None]
        dx = dy + h[:, None, None] * z[None]
        lam = form.smooth(mesh.lo + dx, mesh.lo + dy, h[:, None, None] * z[None])
        integral = np.einsum("eqv,qv->e", lam, W)
    g = h ** (1.0 - 2.0 * s) * integral  # h^{3-2s} * integral / h^2
    idx = np.arange(n)
    np.add.at(A, (idx, idx), g)
    np.add.at(A, (idx + 1, idx + 1), g)
    np.add.at(A, (idx, idx + 1), -g)
    np.add.at(A, (idx + 1, idx), -g)
    return A


def _adjacent_part(form: _Formulation, mesh: Mesh1D, s: float) -> np.ndarray:
    """Element pairs sharing a node, by a Duffy split at the shared node."""
    n = mesh.n_elements
    A = np.zeros((n + 1, n + 1))
    if n < 2:
        return A
    zj, wz = gauss_jacobi01(NEAR_ORDER, 1.0 - 2.0 * s)
    vg, wv = gauss_legendre01(NEAR_ORDER)
    hE = mesh.h[:-1][:, None, None]
    hF = mesh.h[1:][:, None, None]
    shared = mesh.left[1:-1][:, None, None]  # distance of the shared node from lo
    z = zj[None, :, None]
    v = vg[None, None, :]
    W = wz[None, :, None] * wv[None, None, :]
    local = np.zeros((n - 1, 3, 3))
    one = np.ones_like(v)
    for a_, b_ in ((one, v), (v, one)):
        # x = shared - hE z a_, y = shared + hF z b_
        sep = hE * a_ + hF * b_
        diff = -z * sep
        if form.constant_kernel:
            lam = 1.0
        else:
            dx = shared - hE * z * a_
            dy = shared + hF * z * b_
            lam = form.smooth(mesh.lo + dx, mesh.lo + dy, diff)
        weight = W * z * lam * sep ** (-1.0 - 2.0 * s) * hE * hF
        weight = np.broadcast_to(weight, (n - 1, zj.size, vg.size))
        c = [np.broadcast_to(a_, weight.shape), np.broadcast_to(b_ - a_, weight.shape),
             np.broadcast_to(-b_, weight.shape)]
        for i in range(3):
            for j in range(3):
                local[:, i, j] += np.einsum("eqv,eqv->e", weight, c[i] * c[j])
    local *= 2.0  # ordered pairs (E, F) and (F, E)
    for i in range(3):
        for j in range(3):
            np.add.at(A, (np.arange(n - 1) + i, np.arange(n - 1) + j), local[:, i, j])
    return A


def _killing_and_mass(form: _Formulation, mesh: Mesh1D, s: float) -> tuple[np.ndarray, np.ndarray]:
    n = mesh.n_elements
    K = np.zeros((n + 1, n + 1))
    M = np.zeros((n + 1, n + 1))
    h = mesh.h
    lefts = mesh.left
    rights = mesh.right

    def potential(elements, xi):
        d0 = lefts[elements][:, None] + h[elements][:, None] * xi[None, :]
        d1 = rights[elements + 1][:, None] + h[elements][:, None] * (1.0 - xi)[None, :]
        return form.kill((mesh.lo + d0).ravel(), d0.ravel(), d1.ravel()).reshape(d0.shape)

    interior = np.arange(1, n - 1)
    xg, wg = gauss_legendre01(KILL_ORDER)
    wk = h[interior][:, None] * wg[None, :] * potential(interior, xg)
    basis = (1.0 - xg, xg)
    for i in range(2):
        for j in range(2):
            np.add.at(K, (interior + i, interior + j), wk @ (basis[i] * basis[j]))
    # End elements: only the interior node's hat t survives, with t the
    # distance to the end in element units; the weight t^{2-2s} absorbs
    # hat^2 * d^{-2s}.
    tj, wj = gauss_jacobi01(KILL_ORDER, 2.0 - 2.0 * s)
    for e, node, xi in ((0, 1, tj), (n - 1, n - 1, 1.0 - tj)):
        kv = potential(np.array([e]), xi)[0]
        K[node, node] += h[e] * np.sum(wj * kv * tj ** (2.0 * s))

    xm, wm = gauss_legendre01(FAR_ORDER)
    x = mesh.lo + lefts[:-1][:, None] + h[:, None] * xm[None, :]
    wt = form.mass_prefactor * h[:, None] * wm[None, :] * form.weight(x)
    basis = (1.0 - xm, xm)
    el = np.arange(n)
    for i in range(2):
        for j in range(2):
            np.add.at(M, (el + i, el + j), wt @ (basis[i] * basis[j]))
    return 2.0 * K, M


def _assemble(form: _Formulation, mesh: Mesh1D, s: float, meta: dict, workers: int = 1) -> ReducedOperator:
    if mesh.n_elements < 8:
        raise ParameterError("mesh too coarse")
    A = _far_part(form, mesh, s, workers) + _self_part(form, mesh, s) + _adjacent_part(form, mesh, s)
    Kk, M = _killing_and_mass(form, mesh, s)
    A = form.prefactor * (A + Kk)
    inner = slice(1, mesh.n_elements)
    A = A[inner, inner]
    M = M[inner, inner]
    A = 0.5 * (A + A.T)
    M = 0.5 * (M + M.T)
    meta = dict(meta)
    meta.update(formulation=form.tag, n_elements=mesh.n_elements, grading=mesh.grading,
                lo=mesh.lo, hi=mesh.hi, s=s)
    return ReducedOperator(A, M, mesh, s, meta)


def assemble_interval(s: float, mesh: Mesh1D, workers: int = 1) -> ReducedOperator:
    """(-Delta)^s on (0, 1) with the exact killing term."""
    if not 0.0 < s < 1.0:
        raise DomainError("order s must lie in (0, 1)")
    if (mesh.lo, mesh.hi) != (0.0, 1.0):
        raise ParameterError("the interval formulation needs a mesh of (0, 1)")
    return _assemble(_interval_formulation(s), mesh, s, {"N": 1}, workers)


def assemble_direct(geometry: RadialGeometry, params: FractionalParams, mesh: Mesh1D,
                    workers: int = 1) -> ReducedOperator:
    """Radial functions on an annulus or ball, written in the radius."""
    if geometry.kind == "interval" or params.N < 2:
        raise ParameterError("direct assembly needs an annulus or ball with N >= 2")
    if geometry.N != params.N:
        raise ParameterError("geometry and parameters disagree on N")
    if (mesh.lo, mesh.hi) != (geometry.inner, geometry.outer):
        raise ParameterError("mesh does not span the radial section")
    if geometry.kind == "ball":
        raise ParameterError("ball sections need a mesh avoiding rho = 0; not supported by hats vanishing at 0")
    meta = {"N": params.N, "inner": geometry.inner, "outer": geometry.outer, "kind": geometry.kind}
    return _assemble(_direct_formulation(geometry, params), mesh, params.s, meta, workers)


def assemble_rescaled(R: float, params: FractionalParams, mesh: Mesh1D, workers: int = 1) -> ReducedOperator:
    """The annulus R < |x| < R+1 in the shifted variable r in (0, 1)."""
    if R < 2.0:
        raise ParameterError("rescaled formulation needs R >= 2")
    if (mesh.lo, mesh.hi) != (0.0, 1.0):
        raise ParameterError("the rescaled formulation needs a mesh of (0, 1)")
    meta = {"N": params.N, "R": float(R)}
    return _assemble(_rescaled_formulation(float(R), params), mesh, params.s, meta, workers)


# ---------------------------------------------------------------------------
# eigenpairs and boundary quotients


def fit_ds_quotient(dist: np.ndarray, vals: np.ndarray, s: float) -> tuple[float, float]:
    """Least-squares fit u ~ q d^s (1 + c d); returns (q, residual).

    The residual is the largest deviation of u/d^s from the fitted line
    relative to |q|.
    """
    dist = np.asarray(dist, dtype=float)
    vals = np.asarray(vals, dtype=float)
    A = np.column_stack([dist**s, dist ** (s + 1.0)])
    (q, qc), *_ = np.linalg.lstsq(A, vals, rcond=None)
    res = np.max(np.abs(vals / dist**s - (q + qc * dist)))
    return float(q), (float(res / abs(q)) if q != 0.0 else math.inf)


def boundary_quotient(values: np.ndarray, mesh: Mesh1D, s: float, n_fit: int = 4):
    """Fit u ~ q d^s (1 + c d) on the n_fit interior nodes nearest each end.

    Returns ((q_lo, q_hi), (res_lo, res_hi)), see fit_ds_quotient.
    """
    values = np.asarray(values, dtype=float)
    lo = fit_ds_quotient(mesh.left[1:n_fit + 1], values[1:n_fit + 1], s)
    hi = fit_ds_quotient(mesh.right[-n_fit - 1:-1][::-1], values[-n_fit - 1:-1][::-1], s)
    return (lo[0], hi[0]), (lo[1], hi[1])


def solve_smallest(op: ReducedOperator, k: int) -> list[EigenPair]:
    """k smallest eigenpairs of stiffness v = lam mass v (dense Cholesky route)."""
    if not 1 <= k <= op.size:
        raise ParameterError("k must lie between 1 and the matrix dimension")
    try:
        scipy.linalg.cholesky(op.mass, lower=True)
    except np.linalg.LinAlgError as exc:
        raise AssemblyDefectError("mass matrix is not positive definite") from exc
    try:
        lam, vec = scipy.linalg.eigh(op.stiffness, op.mass, subset_by_index=[0, k - 1])
    except np.linalg.LinAlgError as exc:
        raise AssemblyDefectError(f"generalized eigensolve failed: {exc}") from exc
    pairs = []
    for j in range(k):
        v = vec[:, j]
        v = v / math.sqrt(v @ op.mass @ v)
        full = np.concatenate(([0.0], v, [0.0]))
        (q_lo, q_hi), (r_lo, r_hi) = boundary_quotient(full, op.mesh, op.s)
        flip = q_hi < 0.0 or (q_hi == 0.0 and full[1] < 0.0)
        if flip:
            full, v, q_lo, q_hi = -full, -v, -q_lo, -q_hi
        resid = float(np.linalg.norm(op.stiffness @ v - lam[j] * (op.mass @ v)) / np.linalg.norm(v))
        pairs.append(EigenPair(float(lam[j]), full, q_lo, q_hi, resid, (r_lo, r_hi),
                               bool(max(r_lo, r_hi) > 0.1)))
    return pairs


def rayleigh_quotient(op: ReducedOperator, values: np.ndarray) -> float:
    """Rayleigh quotient of nodal values (boundary zeros included or not)."""
    v = np.asarray(values, dtype=float)
    if v.size == op.size + 2:
        v = v[1:-1]
    return float(v @ op.stiffness @ v / (v @ op.mass @ v))


def eigen_data_json(op: ReducedOperator, pairs: list[EigenPair], meta: dict | None = None) -> str:
    """Serialize eigen data as {meta, nodes, lambda, coeffs, q_inner, q_outer, residual}."""
    payload = {
        "meta": {**op.meta, **(meta or {})},
        "nodes": op.mesh.nodes.tolist(),
        "lambda": [p.lam for p in pairs],
        "coeffs": [p.coeffs.tolist() for p in pairs],
        "q_inner": [p.q_inner for p in pairs],
        "q_outer": [p.q_outer for p in pairs],
        "residual": [p.residual for p in pairs],
    }
    return json.dumps(payload, sort_keys=True)
