"""Dense Galerkin eigensolver for (-Delta)^s on planar eccentric annuli.

The domain is Omega_a = B_1 minus the closed disc of radius tau centred at
(a, 0). It is meshed by a fixed family of nested circles (centre a(1-w),
radius tau(1-w)+w for w in [0, 1]) so that the mesh topology depends on tau
only and moves smoothly with a. Continuous P1 elements vanishing on both
polygonal boundaries are used. The quadratic form splits into
  * the double integral over Omega_h x Omega_h: tensor Gauss rules for
    well-separated triangle pairs, and for nearby pairs a polar integration
    around each outer quadrature point in which the radial integral is exact;
  * the killing term int u v kappa, with kappa of the polygonal domain in
    closed form edge by edge (divergence identity).
Reflection x2 -> -x2 is an exact symmetry of mesh and quadrature, so the
problem splits into even and odd parts.
"""

from __future__ import annotations

import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cache, lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.special import beta as beta_fn
from scipy.special import betainc

from .annulus_spectrum import SweepReport, interval_pairs, nonradiality_test
from .errors import (
    AssemblyDefectError,
    DomainError,
    FracSpecError,
    InvariantViolation,
    ParameterError,
    ResolutionError,
    ResourceError,
)
from .quadrature import gauss_jacobi01, gauss_legendre01
from .radial_kernel import RadialGeometry
from .special_fn import FractionalParams, gamma_fn
from .spectral_1d import build_mesh

__all__ = [
    "SWEEP_A_COLUMNS",
    "DenseForm2D",
    "EccentricGeometry",
    "EccentricSolution",
    "ShapeDerivative",
    "TriMesh",
    "assemble_2d",
    "finite_difference_anti",
    "lambda2",
    "lambda_anti",
    "mesh_eccentric",
    "noise_floors",
    "obstacle_quotients",
    "polygon_killing",
    "read_mesh",
    "shape_derivative",
    "solve_2d",
    "sweep_a",
    "triangle_rule",
    "write_mesh",
]

INTERIOR, OUTER, OBSTACLE = 0, 1, 2
DEFAULT_GRADING = 1.5
DEFAULT_MIN_RINGS = 6
DEFAULT_BUDGET = 3.0e9  # kernel evaluations per assembly


@dataclass(frozen=True)
class EccentricGeometry:
    """B_1 minus the closed disc B_tau(a e_1)."""

    tau: float
    a: float
    s: float

    def __post_init__(self) -> None:
        if not 0.0 < self.tau < 1.0:
            raise DomainError("tau must lie in (0, 1)")
        if not abs(self.a) < 1.0 - self.tau:
            raise DomainError("the obstacle must lie strictly inside the unit disc: |a| < 1 - tau")
        if not 0.0 < self.s < 1.0:
            raise DomainError("order s must lie in (0, 1)")

    @property
    def min_gap(self) -> float:
        return 1.0 - self.tau - abs(self.a)


# ---------------------------------------------------------------------------
# symmetric triangle rules (barycentric nodes, weights summing to 1)


def _orbit(weights_and_points):
    nodes, weights = [], []
    for w, pt in weights_and_points:
        a, b, c = pt
        perms = {(a, b, c), (b, c, a), (c, a, b), (a, c, b), (c, b, a), (b, a, c)}
        for p in sorted(perms):
            nodes.append(p)
            weights.append(w)
    return np.array(nodes), np.array(weights)


@cache
def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Fully symmetric Gauss rule exact for polynomials of the given degree (2, 4 or 6)."""
    if degree == 2:
        table = [(1.0 / 3.0, (2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0))]
    elif degree == 4:
        a, b = 0.445948490915965, 0.091576213509771
        table = [(0.223381589678011, (a, a, 1.0 - 2.0 * a)),
                 (0.109951743655322, (b, b, 1.0 - 2.0 * b))]
    elif degree == 6:
        a, b = 0.249286745170910, 0.063089014491502
        c, d = 0.053145049844817, 0.310352451033784
        table = [(0.116786275726379, (a, a, 1.0 - 2.0 * a)),
                 (0.050844906370207, (b, b, 1.0 - 2.0 * b)),
                 (0.082851075618374, (c, d, 1.0 - c - d))]
    else:
        raise ParameterError("triangle rules exist for degree 2, 4 or 6")
    nodes, weights = _orbit(table)
    weights = weights / weights.sum()
    nodes.flags.writeable = False
    weights.flags.writeable = False
    return nodes, weights


# ---------------------------------------------------------------------------
# mesh


@dataclass
class TriMesh:
    """Conforming triangulation of an eccentric annulus, closed under x2 -> -x2."""

    vertices: np.ndarray  # (V, 2)
    triangles: np.ndarray  # (T, 3)
    tags: np.ndarray  # (V,) INTERIOR / OUTER / OBSTACLE
    mirror: np.ndarray  # (V,) index of the x2-mirror vertex
    ring: np.ndarray  # (V,) ring index, 0 on the obstacle
    slot: np.ndarray  # (V,) angular index within the ring
    ring_sizes: np.ndarray  # (K+1,) vertices per ring
    tau: float
    a: float

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    def edges(self) -> np.ndarray:
        t = self.triangles
        e = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        e.sort(axis=1)
        return np.unique(e, axis=0)

    def euler_characteristic(self) -> int:
        return self.n_vertices - self.edges().shape[0] + self.n_triangles

    def areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
        return 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    def min_angle(self) -> float:
        p = self.vertices[self.triangles]
        angles = []
        for k in range(3):
            u = p[:, (k + 1) % 3] - p[:, k]
            v = p[:, (k + 2) % 3] - p[:, k]
            cosang = np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
            angles.append(np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0))))
        return float(np.min(angles))

    def max_edge(self) -> float:
        e = self.edges()
        return float(np.max(np.linalg.norm(self.vertices[e[:, 1]] - self.vertices[e[:, 0]], axis=1)))

    def boundary_edges(self) -> tuple[np.ndarray, np.ndarray]:
        """Boundary edges (E, 2) with the opposite vertex of their triangle (E,)."""
        t = self.triangles
        bnd = self.tags != INTERIOR
        out_e, out_o = [], []
        for k in range(3):
            i, j, o = t[:, k], t[:, (k + 1) % 3], t[:, (k + 2) % 3]
            on = bnd[i] & bnd[j] & (self.tags[i] == self.tags[j])
            out_e.append(np.stack([i[on], j[on]], axis=1))
            out_o.append(o[on])
        return np.concatenate(out_e), np.concatenate(out_o)


def _ring_layout(tau: float, h: float, grading: float, min_rings: int = DEFAULT_MIN_RINGS):
    """Ring parameters w_k and angular counts for the concentric reference annulus."""
    width = 1.0 - tau
    K = max(min_rings, int(math.ceil(grading * width / h)))
    t = np.arange(K + 1) / K
    half = 0.5 * (2.0 * np.minimum(t, 1.0 - t)) ** grading
    w = np.where(t <= 0.5, half, 1.0 - half)
    w[0], w[-1] = 0.0, 1.0
    radius = tau * (1.0 - w) + w
    spacing = width * np.diff(w)  # radial layer thickness
    # finest admissible angular spacing per ring: <= h and <= 2.5 x adjacent layer thickness
    layer = np.minimum(np.concatenate(([spacing[0]], spacing)), np.concatenate((spacing, [spacing[-1]])))
    target = np.minimum(h, 2.5 * layer)
    counts = np.empty(K + 1, dtype=int)
    for k in range(K + 1):
        m = 32
        while 2.0 * math.pi * radius[k] / m > target[k]:
            m *= 2
        counts[k] = m
    # neighbouring rings differ by at most a factor 2
    changed = True
    while changed:
        changed = False
        for k in range(K):
            for i, j in ((k, k + 1), (k + 1, k)):
                if counts[i] > 2 * counts[j]:
                    counts[j] = counts[i] // 2
                    changed = True
    return w, counts


def _angle_map(phi: np.ndarray, beta: float) -> np.ndarray:
    """theta(phi) = phi - beta sin(phi): concentrates nodes where the gap is thin."""
    return phi - beta * np.sin(phi)


def mesh_eccentric(geometry: EccentricGeometry, h: float, grading: float = DEFAULT_GRADING,
                   min_rings: int = DEFAULT_MIN_RINGS) -> TriMesh:
    """Mirror-symmetric ring mesh of Omega_a graded toward both circles.

    The ring layout (number of rings and points per ring) is a function of
    tau, h and grading only; a < 0 returns the exact x1-mirror of the mesh
    for |a|.
    """
    tau, a = geometry.tau, geometry.a
    if not h > 0.0:
        raise ParameterError("target edge length must be positive")
    if not 1.0 <= grading <= 3.0:
        raise ParameterError("grading exponent must lie in [1, 3]")
    if h > 0.25:
        raise ResolutionError("h too large: the mesh needs h <= 0.25")
    if geometry.min_gap <= 0.5 * h:
        raise ResolutionError(
            f"gap {geometry.min_gap:.4g} too thin for h={h:.4g} (needs more than h/2)")
    if a < 0.0:
        m = mesh_eccentric(EccentricGeometry(tau, -a, geometry.s), h, grading, min_rings)
        v = m.vertices.copy()
        v[:, 0] = -v[:, 0]
        return TriMesh(v, m.triangles.copy(), m.tags, m.mirror, m.ring, m.slot, m.ring_sizes, tau, a)

    if min_rings < 6:
        raise ParameterError("at least 6 rings are required")
    w, counts = _ring_layout(tau, h, grading, min_rings)
    K = w.size - 1
    beta = a / (1.0 - tau)
    offsets = np.concatenate(([0], np.cumsum(counts)))
    V = int(offsets[-1])
    verts = np.empty((V, 2))
    tags = np.full(V, INTERIOR, dtype=int)
    mirror = np.empty(V, dtype=int)
    ring = np.empty(V, dtype=int)
    slot = np.empty(V, dtype=int)
    for k in range(K + 1):
        m = counts[k]
        j = np.arange(m)
        half = m // 2
        upper = np.arange(half + 1)
        theta = _angle_map(2.0 * math.pi * upper / m, beta)
        theta[0], theta[-1] = 0.0, math.pi
        centre = a * (1.0 - w[k])
        radius = tau * (1.0 - w[k]) + w[k]
        xy_up = np.stack([centre + radius * np.cos(theta), radius * np.sin(theta)], axis=1)
        xy_up[0, 1] = 0.0
        xy_up[-1, 1] = 0.0
        block = np.empty((m, 2))
        block[: half + 1] = xy_up
        lower = np.arange(half + 1, m)
        block[lower] = xy_up[m - lower] * np.array([1.0, -1.0])
        idx = offsets[k] + j
        verts[idx] = block
        mirror[idx] = offsets[k] + (m - j) % m
        ring[idx] = k
        slot[idx] = j
    tags[ring == 0] = OBSTACLE
    tags[ring == K] = OUTER

    tris = []
    for k in range(K):
        mi, mo = counts[k], counts[k + 1]
        oi, oo = offsets[k], offsets[k + 1]
        if mi == mo:
            for i in range(mi // 2):
                c0, c1 = oi + i, oi + i + 1
                f0, f1 = oo + i, oo + i + 1
                if (i + k) % 2 == 0:
                    tris += [(c0, c1, f1), (c0, f1, f0)]
                else:
                    tris += [(c0, c1, f0), (c1, f1, f0)]
        else:
            coarse_inner = mi < mo
            mc = min(mi, mo)
            oc, of = (oi, oo) if coarse_inner else (oo, oi)
            for i in range(mc // 2):
                c0, c1 = oc + i, oc + i + 1
                f0, f1, f2 = of + 2 * i, of + 2 * i + 1, of + 2 * i + 2
                tris += [(c0, f1, f0), (c0, c1, f1), (c1, f2, f1)]
    upper = np.array(tris, dtype=int)
    # wrap-around indices: the last upper slot of ring k is m/2, always present
    lower = mirror[upper]
    triangles = np.concatenate([upper, lower])
    return TriMesh(verts, triangles, tags, mirror, ring, slot, counts.copy(), tau, a)


# ---------------------------------------------------------------------------
# killing potential of the polygonal domain


def _edge_profile(s: float, cos2: np.ndarray) -> np.ndarray:
    """(1/2) B(cos2; s+1/2, 1/2), i.e. int_phi^{pi/2} cos^{2s} with cos^2(phi) = cos2."""
    if s == 0.5:
        return 1.0 - np.sqrt(np.maximum(1.0 - cos2, 0.0))
    return 0.5 * beta_fn(s + 0.5, 0.5) * betainc(s + 0.5, 0.5, cos2)


_EDGE_GL = 4
_EDGE_FAR = 3.0  # edges seen from farther than this many lengths use Gauss-Legendre


def polygon_killing(s: float, edges: np.ndarray, normals: np.ndarray, points: np.ndarray,
                    chunk: int = 2048) -> np.ndarray:
    """kappa(x) = int over the complement of |x-y|^{-2-2s} dy for x strictly inside.

    edges: (E, 2, 2) endpoints; normals: (E, 2) unit normals pointing out of
    the domain. Each edge contributes (1/2s) int_edge p |y-x|^{-2-2s} dy, with
    p the signed distance of the edge line. Nearby edges use the closed form
    (1/2s) sign(p) |p|^{-2s} int cos^{2s} over the angle they subtend.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    out = np.empty(points.shape[0])
    p0 = edges[:, 0]
    tangent = edges[:, 1] - edges[:, 0]
    length = np.linalg.norm(tangent, axis=1)
    tangent = tangent / length[:, None]
    gx, gw = gauss_legendre01(_EDGE_GL)
    full = 0.5 * beta_fn(s + 0.5, 0.5)
    for start in range(0, points.shape[0], chunk):
        x = points[start:start + chunk]
        rel = p0[None, :, :] - x[:, None, :]
        p = rel[..., 0] * normals[None, :, 0] + rel[..., 1] * normals[None, :, 1]
        u0 = rel[..., 0] * tangent[None, :, 0] + rel[..., 1] * tangent[None, :, 1]
        u1 = u0 + length[None, :]
        p2 = p * p
        um = u0 + 0.5 * length[None, :]
        far = p2 + um * um > (_EDGE_FAR * length[None, :]) ** 2
        contrib = np.zeros_like(p)
        # far edges: smooth integrand along the edge
        acc = np.zeros_like(p)
        for xg, wg in zip(gx, gw):
            u = u0 + xg * length[None, :]
            r2 = p2 + u * u
            acc += wg * (1.0 / (r2 * np.sqrt(r2)) if s == 0.5 else r2 ** (-1.0 - s))
        contrib = np.where(far, p * length[None, :] * acc, 0.0)
        # near edges: closed form in the subtended angle
        near = ~far & (p != 0.0)
        if near.any():
            pn, a0, a1 = p[near], u0[near], u1[near]
            q2 = pn * pn
            c0 = q2 / (q2 + a0 * a0)
            c1 = q2 / (q2 + a1 * a1)
            h0, h1 = _edge_profile(s, c0), _edge_profile(s, c1)
            straddle = (a0 < 0.0) & (a1 > 0.0)
            ang = np.where(straddle, 2.0 * full - h0 - h1, np.abs(h0 - h1))
            contrib[near] = np.sign(pn) * np.abs(pn) ** (-2.0 * s) * ang
        out[start:start + chunk] = contrib.sum(axis=1) / (2.0 * s)
    return out


def _boundary_geometry(mesh: TriMesh) -> tuple[np.ndarray, np.ndarray]:
    e, opp = mesh.boundary_edges()
    pts = mesh.vertices[e]
    t = pts[:, 1] - pts[:, 0]
    n = np.stack([t[:, 1], -t[:, 0]], axis=1)
    n /= np.linalg.norm(n, axis=1)[:, None]
    inward = mesh.vertices[opp] - pts[:, 0]
    flip = np.sum(n * inward, axis=1) > 0.0
    n[flip] = -n[flip]
    return pts, n


# ---------------------------------------------------------------------------
# assembly


@dataclass
class DenseForm2D:
    """Stiffness and mass on the interior vertices, with the mirror splitting."""

    stiffness: np.ndarray
    mass: np.ndarray
    dofs: np.ndarray  # global vertex index of each unknown
    mirror: np.ndarray  # unknown index of the mirror unknown
    odd_basis: np.ndarray  # (n, n_odd) orthonormal columns (phi_v - phi_sv)/sqrt2
    even_basis: np.ndarray
    commutation_residual: float
    meta: dict = field(default_factory=dict)


def _triangle_geometry(mesh: TriMesh):
    p = mesh.vertices[mesh.triangles]  # (T, 3, 2)
    d1, d2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    area = 0.5 * np.abs(det)
    # gradients of barycentric coordinates
    g = np.empty((p.shape[0], 3, 2))
    for k in range(3):
        a, b = p[:, (k + 1) % 3], p[:, (k + 2) % 3]
        g[:, k, 0] = (a[:, 1] - b[:, 1]) / det
        g[:, k, 1] = (b[:, 0] - a[:, 0]) / det
    # edge k is opposite vertex k; outward unit normal and offset
    normals = np.empty((p.shape[0], 3, 2))
    offsets = np.empty((p.shape[0], 3))
    for k in range(3):
        a, b = p[:, (k + 1) % 3], p[:, (k + 2) % 3]
        t = b - a
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
        n /= np.linalg.norm(n, axis=1)[:, None]
        flip = np.sum(n * (p[:, k] - a), axis=1) > 0.0
        n[flip] = -n[flip]
        normals[:, k] = n
        offsets[:, k] = np.sum(n * a, axis=1)
    return p, area, g, normals, offsets


def _barycentric(p: np.ndarray, g: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Barycentric coordinates (linearly extended) of points x (..., 2) w.r.t. triangles."""
    # lambda_k(x) = lambda_k(p_j) + g_k . (x - p_j) with p_j any vertex; use vertex 0
    rel = x - p[:, None, 0, :]
    lam = np.einsum("tkd,tqd->tqk", g, rel)
    lam[..., 0] += 1.0
    return lam


def _radial_moment(r1, r2, c):
    """int_{r1}^{r2} r^{c-1} dr, stable as c -> 0."""
    with np.errstate(divide="ignore", invalid="ignore"):
        lr = np.log(r2 / r1)
        if abs(c) < 1e-14:
            return lr
        return r1**c * np.expm1(c * lr) / c


def _directions(alpha_lo, alpha_hi, n_sub, nodes, weights):
    """Angles and weights over [lo, hi] split into n_sub equal parts."""
    span = (alpha_hi - alpha_lo) / n_sub
    k = np.arange(n_sub)
    ang = alpha_lo[..., None, None] + span[..., None, None] * (k[:, None] + nodes[None, :])
    wts = np.broadcast_to(span[..., None, None] * weights[None, :], ang.shape)
    shape = ang.shape[:-2] + (n_sub * nodes.size,)
    return ang.reshape(shape), wts.reshape(shape)


def _self_pairs(geo, s, rule, n_sub, n_theta):
    """Local 3x3 matrices for identical triangle pairs."""
    p, area, g, normals, offsets = geo
    bary, bw = rule
    x = np.einsum("qk,tkd->tqd", bary, p)  # (T, Q, 2)
    rel = p[:, None, :, :] - x[:, :, None, :]  # (T, Q, 3, 2)
    ang = np.arctan2(rel[..., 1], rel[..., 0])
    ang.sort(axis=-1)
    lo = ang
    hi = np.concatenate([ang[..., 1:], ang[..., :1] + 2.0 * math.pi], axis=-1)
    tg, tw = gauss_legendre01(n_theta)
    th, wt = _directions(lo, hi, n_sub, tg, tw)  # (T, Q, 3, D)
    e = np.stack([np.cos(th), np.sin(th)], axis=-1)  # (T, Q, 3, D, 2)
    delta = offsets[:, None, :] - np.einsum("tkd,tqd->tqk", normals, x)  # (T, Q, 3)
    ne = np.einsum("tkd,tqsjd->tqsjk", normals, e)  # (T, Q, 3, D, 3)
    with np.errstate(divide="ignore", invalid="ignore"):
        cand = np.where(ne > 0.0, delta[:, :, None, None, :] / ne, np.inf)
    r2 = cand.min(axis=-1)
    m2 = r2 ** (2.0 - 2.0 * s) / (2.0 - 2.0 * s)
    S2 = np.einsum("tqsj,tqsja,tqsjb,q->tab", wt * m2, e, e, bw)
    local = np.einsum("tia,tab,tjb->tij", g, S2, g) * area[:, None, None]
    return local


def _pair_block(geo, tris, s, t1, t2, rule, n_sub, n_theta):
    """Local 6x6 matrices for ordered pairs of distinct triangles (x in t1, y in t2)."""
    p, area, g, normals, offsets = geo
    bary, bw = rule
    P1, P2 = p[t1], p[t2]
    x = np.einsum("qk,pkd->pqd", bary, P1)  # (P, Q, 2)
    cen = P2.mean(axis=1)
    dc = cen[:, None, :] - x  # (P, Q, 2)
    dcn = dc / np.linalg.norm(dc, axis=-1, keepdims=True)
    rel = P2[:, None, :, :] - x[:, :, None, :]  # (P, Q, 3, 2)
    cr = dcn[..., None, 0] * rel[..., 1] - dcn[..., None, 1] * rel[..., 0]
    dt = np.einsum("pqd,pqkd->pqk", dcn, rel)
    alpha = np.arctan2(cr, dt)
    alpha.sort(axis=-1)
    lo, hi = alpha[..., :2], alpha[..., 1:]
    tg, tw = gauss_legendre01(n_theta)
    th, wt = _directions(lo, hi, n_sub, tg, tw)  # (P, Q, 2, D)
    c, sn = np.cos(th), np.sin(th)
    e0 = c * dcn[..., None, None, 0] - sn * dcn[..., None, None, 1]
    e1 = c * dcn[..., None, None, 1] + sn * dcn[..., None, None, 0]
    e = np.stack([e0, e1], axis=-1)  # (P, Q, 2, D, 2)
    nrm, off = normals[t2], offsets[t2]
    delta = off[:, None, :] - np.einsum("pkd,pqd->pqk", nrm, x)  # (P, Q, 3)
    ne = np.einsum("pkd,pqsjd->pqsjk", nrm, e)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = delta[:, :, None, None, :] / ne
        r2 = np.where(ne > 0.0, ratio, np.inf).min(axis=-1)
        r1 = np.maximum(np.where(ne < 0.0, ratio, -np.inf).max(axis=-1), 0.0)
    r1 = np.minimum(r1, r2)
    m0 = _radial_moment(r1, r2, -2.0 * s)
    m1 = _radial_moment(r1, r2, 1.0 - 2.0 * s)
    m2 = (r2 ** (2.0 - 2.0 * s) - r1 ** (2.0 - 2.0 * s)) / (2.0 - 2.0 * s)
    m0 = np.where(r2 > r1, m0, 0.0)
    m1 = np.where(r2 > r1, m1, 0.0)
    S0 = np.einsum("pqsj->pq", wt * m0)
    S1 = np.einsum("pqsj,pqsja->pqa", wt * m1, e)
    S2 = np.einsum("pqsj,pqsja,pqsjb->pqab", wt * m2, e, e)

    lam1 = np.broadcast_to(bary[None], (t1.size,) + bary.shape)
    lam2 = _barycentric(P2, g[t2], x)  # (P, Q, 3)
    A = np.concatenate([lam1, -lam2], axis=-1)  # (P, Q, 6)
    G = np.concatenate([np.zeros((t1.size, 3, 2)), g[t2]], axis=1)  # (P, 6, 2)
    # merge the slot of a shared vertex into the slot of t1
    v1, v2 = tris[t1], tris[t2]
    share = v1[:, :, None] == v2[:, None, :]  # (P, 3, 3)
    C = np.zeros((t1.size, 6, 6))
    C[:, np.arange(6), np.arange(6)] = 1.0
    pi_, ai_, bi_ = np.nonzero(share)
    C[pi_, ai_, 3 + bi_] = 1.0
    C[pi_, 3 + bi_, 3 + bi_] = 0.0
    A = np.einsum("pab,pqb->pqa", C, A)
    G = np.einsum("pab,pbd->pad", C, G)
    GS1 = np.einsum("pad,pqd->pqa", G, S1)
    local = (np.einsum("pqa,pqb,pq,q->pab", A, A, S0, bw)
             - np.einsum("pqa,pqb,q->pab", A, GS1, bw)
             - np.einsum("pqa,pqb,q->pab", GS1, A, bw)
             + np.einsum("pad,pqde,pbe,q->pab", G, S2, G, bw))
    local *= area[t1][:, None, None]
    idx = np.concatenate([v1, v2], axis=1)
    return local, idx


def _near_pairs(mesh: TriMesh, level: int) -> tuple[np.ndarray, np.ndarray]:
    T, V = mesh.n_triangles, mesh.n_vertices
    rows = np.repeat(np.arange(T), 3)
    B = sp.csr_matrix((np.ones(3 * T), (rows, mesh.triangles.ravel())), shape=(T, V))
    adj = (B @ B.T).tocsr()
    adj.data[:] = 1.0
    if level >= 2:
        adj = (adj @ adj).tocsr()
    adj = adj.tocoo()
    keep = adj.row != adj.col
    return adj.row[keep].astype(int), adj.col[keep].astype(int)


def _far_block(points, weights, P, near_lists, s, rows):
    """Contribution of separated pairs for the outer points in rows.

    Returns K W 1 restricted to rows and P^T W K[:, rows], with K zeroed on
    near and identical triangle pairs. K is built transposed so that the
    sparse product needs no copy.
    """
    x = points[rows]
    d2 = (points[:, None, 0] - x[None, :, 0]) ** 2 + (points[:, None, 1] - x[None, :, 1]) ** 2
    with np.errstate(divide="ignore"):
        if s == 0.5:
            Kt = 1.0 / (d2 * np.sqrt(d2))
        else:
            Kt = d2 ** (-1.0 - s)
    del d2
    r_idx, c_idx = near_lists(rows)
    Kt[c_idx, r_idx] = 0.0
    kw = weights @ Kt
    Kt *= weights[:, None]
    return kw, np.asarray(P.T @ Kt)


def assemble_2d(mesh: TriMesh, geometry: EccentricGeometry, far_degree: int = 4, near_level: int = 1,
                near_degree: int = 6, n_theta: int = 8, n_sub: int = 1, workers: int = 1,
                budget: float = DEFAULT_BUDGET) -> DenseForm2D:
    """Galerkin matrices of the fractional Dirichlet form on the interior vertices."""
    s = geometry.s
    params = FractionalParams(2, s)
    T, V = mesh.n_triangles, mesh.n_vertices
    far_nodes, far_w = triangle_rule(far_degree)
    Q = T * far_w.size
    near_i, near_j = _near_pairs(mesh, near_level)
    cost = float(Q) * Q + near_i.size * triangle_rule(near_degree)[1].size * 2 * n_sub * n_theta * 3
    if cost > budget:
        raise ResourceError(f"assembly needs about {cost:.3g} kernel evaluations (budget {budget:.3g})")
    geo = _triangle_geometry(mesh)
    p, area, g, normals, offsets = geo

    acc = _Scatter(V)

    # identical pairs
    near_rule = triangle_rule(near_degree)
    for start in range(0, T, 256):
        sl = np.arange(start, min(start + 256, T))
        local = _self_pairs((p[sl], area[sl], g[sl], normals[sl], offsets[sl]), s, near_rule, n_sub, n_theta)
        idx = mesh.triangles[sl]
        acc.add(idx, idx, local)

    # nearby distinct pairs
    batch = 1024
    for start in range(0, near_i.size, batch):
        t1 = near_i[start:start + batch]
        t2 = near_j[start:start + batch]
        local, idx = _pair_block(geo, mesh.triangles, s, t1, t2, near_rule, n_sub, n_theta)
        acc.add(idx, idx, local)
    A = acc.dense()
    del acc

    # separated pairs: tensor rule over all quadrature points
    points = np.einsum("qk,tkd->tqd", far_nodes, p).reshape(-1, 2)
    weights = (area[:, None] * far_w[None, :]).ravel()
    nq = far_w.size
    owner = np.repeat(np.arange(T), nq)
    prow = np.arange(Q)
    pvals = np.tile(far_nodes, (T, 1))
    P = sp.csr_matrix((pvals.ravel(), (np.repeat(prow, 3), np.repeat(mesh.triangles, nq, axis=0).ravel())),
                      shape=(Q, V))
    near_csr = sp.csr_matrix((np.ones(near_i.size + T), (np.concatenate([near_i, np.arange(T)]),
                                                         np.concatenate([near_j, np.arange(T)]))),
                             shape=(T, T))
    qoff = np.arange(nq)

    def near_lists(rows):
        # rows is a contiguous block of quadrature points
        tri_rows = owner[rows]
        sub = near_csr[tri_rows]
        sub = sub.tocoo()
        r = np.repeat(sub.row, nq)
        c = (sub.col[:, None] * nq + qoff[None, :]).ravel()
        return r, c

    chunk = max(nq, int(4_000_000 // max(Q, 1)) // nq * nq)
    blocks = [np.arange(i, min(i + chunk, Q)) for i in range(0, Q, chunk)]

    def job(rows):
        return rows, _far_block(points, weights, P, near_lists, s, rows)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(job, blocks))
    else:
        results = [job(b) for b in blocks]
    diag = np.zeros(Q)
    for rows, (kw, PWK) in results:
        diag[rows] = weights[rows] * kw
        A -= 2.0 * np.asarray(P[rows].T @ np.ascontiguousarray((PWK * weights[rows][None, :]).T))
    A += 2.0 * (P.T @ sp.diags(diag) @ P).toarray()

    # killing term and mass
    Kk, M = _killing_and_mass(mesh, geo, s)
    A = 0.5 * params.b * (A + 2.0 * Kk)

    dofs = np.nonzero(mesh.tags == INTERIOR)[0]
    A = A[np.ix_(dofs, dofs)]
    M = M[np.ix_(dofs, dofs)]
    A = 0.5 * (A + A.T)
    M = 0.5 * (M + M.T)
    position = -np.ones(V, dtype=int)
    position[dofs] = np.arange(dofs.size)
    mirror = position[mesh.mirror[dofs]]
    odd, even = _symmetry_bases(mirror)
    resid = float(np.max(np.abs(A[np.ix_(mirror, mirror)] - A)) / np.max(np.abs(A)))
    meta = {"tau": geometry.tau, "a": geometry.a, "s": s, "far_degree": far_degree,
            "near_level": near_level, "near_degree": near_degree, "n_theta": n_theta, "n_sub": n_sub,
            "n_vertices": V, "n_triangles": T, "n_dofs": int(dofs.size)}
    return DenseForm2D(A, M, dofs, mirror, odd, even, resid, meta)


class _Scatter:
    """Collects local element matrices and sums them into a dense matrix once."""

    def __init__(self, n: int):
        self.n = n
        self.index: list[np.ndarray] = []
        self.values: list[np.ndarray] = []

    def add(self, ri, ci, local) -> None:
        self.index.append((ri[:, :, None] * self.n + ci[:, None, :]).ravel())
        self.values.append(np.asarray(local).ravel())

    def dense(self) -> np.ndarray:
        n = self.n
        if not self.index:
            return np.zeros((n, n))
        flat = np.bincount(np.concatenate(self.index), weights=np.concatenate(self.values), minlength=n * n)
        return flat.reshape(n, n)


def _symmetry_bases(mirror: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = mirror.size
    idx = np.arange(n)
    fixed = idx[mirror == idx]
    pairs = idx[mirror > idx]
    r = 1.0 / math.sqrt(2.0)
    odd = np.zeros((n, pairs.size))
    odd[pairs, np.arange(pairs.size)] = r
    odd[mirror[pairs], np.arange(pairs.size)] = -r
    even = np.zeros((n, pairs.size + fixed.size))
    even[pairs, np.arange(pairs.size)] = r
    even[mirror[pairs], np.arange(pairs.size)] = r
    even[fixed, pairs.size + np.arange(fixed.size)] = 1.0
    return odd, even


def _killing_and_mass(mesh: TriMesh, geo, s: float) -> tuple[np.ndarray, np.ndarray]:
    p, area, _, _, _ = geo
    V = mesh.n_vertices
    edges, normals = _boundary_geometry(mesh)
    on_bnd = mesh.tags[mesh.triangles] != INTERIOR  # (T, 3)
    nb = on_bnd.sum(axis=1)
    acc = _Scatter(V)

    # interior triangles: symmetric rule of degree 6
    bary, bw = triangle_rule(6)
    inner = np.nonzero(nb == 0)[0]
    if inner.size:
        x = np.einsum("qk,tkd->tqd", bary, p[inner]).reshape(-1, 2)
        kap = polygon_killing(s, edges, normals, x).reshape(inner.size, -1)
        local = np.einsum("tq,q,qi,qj->tij", kap, bw, bary, bary) * area[inner][:, None, None]
        idx = mesh.triangles[inner]
        acc.add(idx, idx, local)

    n_c = 10
    # one boundary vertex: collapse toward it, weight t^{1-2s}
    vert = np.nonzero(nb == 1)[0]
    if vert.size:
        tj, wj = gauss_jacobi01(n_c, 1.0 - 2.0 * s)
        xg, wg = gauss_legendre01(n_c)
        k0 = np.argmax(on_bnd[vert], axis=1)
        order = np.stack([k0, (k0 + 1) % 3, (k0 + 2) % 3], axis=1)
        tri = np.take_along_axis(mesh.triangles[vert], order, axis=1)
        pv = mesh.vertices[tri]
        tt, xx = np.meshgrid(tj, xg, indexing="ij")
        ww = np.outer(wj, wg).ravel()
        tt, xx = tt.ravel(), xx.ravel()
        # barycentric weights of the collapsed map x = p0 + t((1-xi)(p1-p0) + xi(p2-p0))
        lam = np.stack([1.0 - tt, tt * (1.0 - xx), tt * xx], axis=1)
        x = np.einsum("qk,tkd->tqd", lam, pv).reshape(-1, 2)
        kap = polygon_killing(s, edges, normals, x).reshape(vert.size, -1)
        wt = kap * (tt ** (2.0 * s))[None, :] * ww[None, :] * 2.0 * area[vert][:, None]
        local = np.einsum("tq,qi,qj->tij", wt, lam, lam)
        acc.add(tri, tri, local)

    # boundary edge: collapse toward the edge, only the opposite vertex is a dof
    edge = np.nonzero(nb == 2)[0]
    if edge.size:
        tj, wj = gauss_jacobi01(n_c, 2.0 - 2.0 * s, 1.0)
        xg, wg = gauss_legendre01(n_c)
        kfree = np.argmin(on_bnd[edge], axis=1)
        order = np.stack([kfree, (kfree + 1) % 3, (kfree + 2) % 3], axis=1)
        tri = np.take_along_axis(mesh.triangles[edge], order, axis=1)
        pv = mesh.vertices[tri]
        tt, xx = np.meshgrid(tj, xg, indexing="ij")
        ww = np.outer(wj, wg).ravel()
        tt, xx = tt.ravel(), xx.ravel()
        # x = t p0 + (1-t)((1-xi) p1 + xi p2); t is the hat of the free vertex
        lam = np.stack([tt, (1.0 - tt) * (1.0 - xx), (1.0 - tt) * xx], axis=1)
        x = np.einsum("qk,tkd->tqd", lam, pv).reshape(-1, 2)
        kap = polygon_killing(s, edges, normals, x).reshape(edge.size, -1)
        vals = 2.0 * area[edge] * np.sum(kap * (tt ** (2.0 * s))[None, :] * ww[None, :], axis=1)
        acc.add(tri[:, :1], tri[:, :1], vals[:, None, None])
    K = acc.dense()

    # exact P1 mass
    mass = _Scatter(V)
    loc = (np.ones((3, 3)) + np.eye(3)) / 12.0
    mass.add(mesh.triangles, mesh.triangles, area[:, None, None] * loc[None])
    return K, mass.dense()


# ---------------------------------------------------------------------------
# eigenvalues


@dataclass(frozen=True)
class EccentricSolution:
    """Low spectrum of one eccentric annulus, split by the x2-mirror parity."""

    geometry: EccentricGeometry
    h: float
    mesh: TriMesh
    even_values: np.ndarray  # ascending
    odd_values: np.ndarray  # ascending
    anti_vector: np.ndarray  # (V,) first odd eigenfunction, mass-normalized, zero on the boundary
    upper_positive_fraction: float  # share of upper-half unknowns with the sign of the convention
    commutation_residual: float
    full_check: float | None  # max relative gap to the unsplit eigensolve, if requested
    meta: dict

    @property
    def lambda_anti(self) -> float:
        return float(self.odd_values[0])

    @property
    def cluster(self) -> np.ndarray:
        """All computed eigenvalues, ascending."""
        return np.sort(np.concatenate([self.even_values, self.odd_values]))

    @property
    def lambda2(self) -> float:
        return float(self.cluster[1])

    @property
    def lambda2_parity(self) -> str:
        return "odd" if self.lambda2 in self.odd_values[:1] else "even"


def _restricted_eigh(A, M, Z, k):
    Ar = Z.T @ A @ Z
    Mr = Z.T @ M @ Z
    k = min(k, Ar.shape[0])
    try:
        vals, vecs = scipy.linalg.eigh(0.5 * (Ar + Ar.T), 0.5 * (Mr + Mr.T), subset_by_index=[0, k - 1])
    except np.linalg.LinAlgError as exc:
        raise AssemblyDefectError(f"restricted mass matrix is not positive definite: {exc}") from exc
    return vals, vecs


def _options_key(options: dict) -> tuple:
    allowed = {"far_degree", "near_level", "near_degree", "n_theta", "n_sub", "budget", "min_rings"}
    unknown = set(options) - allowed
    if unknown:
        raise ParameterError(f"unknown solver options: {sorted(unknown)}")
    return tuple(sorted(options.items()))


def solve_2d(geometry: EccentricGeometry, h: float, grading: float = DEFAULT_GRADING, n_eigs: int = 3,
             full_check: bool = False, workers: int = 1, **options) -> EccentricSolution:
    """Mesh, assemble and solve; results are cached per (geometry, h, grading, options)."""
    return _solve_cached(geometry, float(h), float(grading), int(n_eigs), bool(full_check), int(workers),
                         _options_key(options))


@lru_cache(maxsize=32)
def _solve_cached(geometry, h, grading, n_eigs, full_check, workers, options):
    opts = dict(options)
    min_rings = opts.pop("min_rings", DEFAULT_MIN_RINGS)
    mesh = mesh_eccentric(geometry, h, grading, min_rings=min_rings)
    form = assemble_2d(mesh, geometry, workers=workers, **opts)
    A, M = form.stiffness, form.mass
    even_vals, _ = _restricted_eigh(A, M, form.even_basis, n_eigs)
    odd_vals, odd_vecs = _restricted_eigh(A, M, form.odd_basis, max(n_eigs - 1, 1))
    u = form.odd_basis @ odd_vecs[:, 0]
    upper = mesh.vertices[form.dofs, 1] > 0.0
    if np.sum(u[upper]) < 0.0:
        u = -u
    scale = np.max(np.abs(u[upper]))
    positive = float(np.mean(u[upper] >= -1e-10 * scale))
    full = np.zeros(mesh.n_vertices)
    full[form.dofs] = u
    check = None
    if full_check:
        ref = scipy.linalg.eigh(A, M, eigvals_only=True, subset_by_index=[0, n_eigs - 1])
        mine = np.sort(np.concatenate([even_vals, odd_vals]))[:n_eigs]
        check = float(np.max(np.abs(mine - ref) / ref))
    meta = dict(form.meta, h=h, grading=grading, min_rings=min_rings)
    return EccentricSolution(geometry, h, mesh, even_vals, odd_vals, full, positive,
                             form.commutation_residual, check, meta)


def lambda2(geometry: EccentricGeometry, h: float, **kwargs) -> float:
    """Second eigenvalue of the unrestricted problem (union of both parities)."""
    return solve_2d(geometry, h, **kwargs).lambda2


def lambda_anti(geometry: EccentricGeometry, h: float, **kwargs) -> EccentricSolution:
    """Solution record whose lambda_anti / anti_vector give the first odd eigenpair."""
    return solve_2d(geometry, h, **kwargs)


# ---------------------------------------------------------------------------
# shape derivative


@dataclass(frozen=True)
class ShapeDerivative:
    value: float
    angles: np.ndarray  # obstacle-circle angles theta of the rays
    quotients: np.ndarray  # u/d^s at each ray
    residuals: np.ndarray  # fit residual relative to max |u/d^s|
    low_confidence_fraction: float
    low_confidence: bool
    rounding_floor: float  # floating-point floor of the weighted boundary sum


LOW_CONFIDENCE_RESIDUAL = 0.1
LOW_CONFIDENCE_SHARE = 0.25
N_FIT = 4
PROFILE_MESH = 256


def obstacle_quotients(solution: EccentricSolution, n_fit: int = N_FIT):
    """u/d^s on the obstacle circle from profile fits along the mesh spokes.

    A spoke joins the obstacle node at angle theta to the outer node at the
    same angle and meets ring k at parameter w_k. Along it, u is fitted by
    A Phi(w) (1 + c w) on the first n_fit interior rings, with Phi the first
    eigenfunction of the unit interval; then u/d^s = A q_Phi / l^s at w = 0,
    where l = (1 - tau) - a cos(theta) is the rate of growth of d along the
    spoke. Rings with fewer nodes than the obstacle ring are interpolated
    linearly in the angular index.
    """
    mesh, geo = solution.mesh, solution.geometry
    tau, s = geo.tau, geo.s
    u = solution.anti_vector
    sizes = mesh.ring_sizes
    offsets = np.concatenate(([0], np.cumsum(sizes)))
    if sizes.size - 2 < n_fit:
        raise ResolutionError("too few interior rings for the boundary fit")
    m0 = int(sizes[0])
    obstacle = np.arange(m0)
    rel = mesh.vertices[obstacle] - np.array([geo.a, 0.0])
    theta = np.arctan2(rel[:, 1], rel[:, 0])
    w, _ = _ring_layout(tau, solution.h, solution.meta["grading"], solution.meta["min_rings"])
    vals = np.empty((m0, n_fit))
    for k in range(1, n_fit + 1):
        mk = int(sizes[k])
        f = obstacle * (mk / m0)
        lo = np.floor(f).astype(int)
        frac = f - lo
        vals[:, k - 1] = (1.0 - frac) * u[offsets[k] + lo % mk] + frac * u[offsets[k] + (lo + 1) % mk]
    profile, q_profile = _interval_profile(s)
    t = w[1:n_fit + 1]
    basis = np.column_stack([profile(t), profile(t) * t])
    coef, *_ = np.linalg.lstsq(basis, vals.T, rcond=None)  # (2, m0)
    fitted = basis @ coef
    growth = (1.0 - tau) - geo.a * np.cos(theta)
    q = coef[0] * q_profile / growth**s
    scale = np.max(np.abs(coef[0]))
    res = np.max(np.abs(vals.T - fitted) / np.abs(basis[:, :1]), axis=0) / scale
    return theta, q, res


@lru_cache(maxsize=8)
def _interval_profile(s: float):
    pair = interval_pairs(s, 1, PROFILE_MESH)[0]
    nodes = build_mesh(0.0, 1.0, PROFILE_MESH, 2.0).nodes
    coeffs = pair.coeffs.copy()
    return (lambda x: np.interp(x, nodes, coeffs)), float(pair.q_inner)


def shape_derivative(geometry: EccentricGeometry, h: float, **kwargs) -> ShapeDerivative:
    """Gamma(1+s)^2 times the obstacle integral of (u/d^s)^2 e1.nu.

    nu is the unit normal of the obstacle circle pointing into Omega_a and u
    the mass-normalized first odd eigenfunction.
    """
    sol = solve_2d(geometry, h, **kwargs)
    theta, q, res = obstacle_quotients(sol)
    tau, s = geometry.tau, geometry.s
    m0 = theta.size
    # nodes are theta(phi_j) with phi_j uniform: periodic trapezoid in phi
    beta = abs(geometry.a) / (1.0 - tau)
    phi = 2.0 * math.pi * np.arange(m0) / m0
    jac = 1.0 - beta * np.cos(phi)
    terms = q**2 * np.cos(theta) * jac
    scale = gamma_fn(1.0 + s) ** 2 * tau * (2.0 * math.pi / m0)
    value = float(scale * np.sum(terms))
    # eigenvectors carry relative errors far above eps; sqrt(eps) bounds the cancellation noise
    rounding = float(math.sqrt(np.finfo(float).eps) * scale * np.sum(np.abs(terms)))
    low = float(np.mean(res > LOW_CONFIDENCE_RESIDUAL))
    return ShapeDerivative(value, theta, q, res, low, low > LOW_CONFIDENCE_SHARE, rounding)


def finite_difference_anti(geometry: EccentricGeometry, h: float, delta: float = 0.02, **kwargs) -> float:
    """Central difference (lambda_anti(a + delta) - lambda_anti(a - delta)) / (2 delta)."""
    plus = EccentricGeometry(geometry.tau, geometry.a + delta, geometry.s)
    minus = EccentricGeometry(geometry.tau, geometry.a - delta, geometry.s)
    return (solve_2d(plus, h, **kwargs).lambda_anti - solve_2d(minus, h, **kwargs).lambda_anti) / (2.0 * delta)


# ---------------------------------------------------------------------------
# sweep in the obstacle position


SWEEP_A_COLUMNS = (
    "parameter", "value", "lambda2", "lambda_anti", "lambda2_parity", "bound_gap",
    "shape_derivative", "sd_low_confidence", "n_vertices", "status",
)
MESH_CONVERGENCE = 0.01  # largest relative change of lambda_anti under h -> h/sqrt2


def _point_record(geometry: EccentricGeometry, h: float, options: dict) -> dict:
    rec = {"parameter": "a", "value": geometry.a}
    try:
        sol = solve_2d(geometry, h, **options)
        sd = shape_derivative(geometry, h, **options)
    except FracSpecError as exc:
        rec.update(status=f"error: {exc}")
        return rec
    rec.update(lambda2=sol.lambda2, lambda_anti=sol.lambda_anti, lambda2_parity=sol.lambda2_parity,
               bound_gap=sol.lambda_anti - sol.lambda2, shape_derivative=sd.value,
               sd_low_confidence=sd.low_confidence, n_vertices=sol.mesh.n_vertices, status="ok",
               cluster=sol.cluster.tolist(), sd_rounding=sd.rounding_floor,
               upper_positive_fraction=sol.upper_positive_fraction,
               commutation_residual=sol.commutation_residual)
    return rec


def noise_floors(tau: float, s: float, h: float, probe: float, **options) -> dict:
    """Refinement noise at the origin and at a probe position, from h -> h/sqrt2.

    derivative: twice the change of |shape_derivative(0)|, never below the
    floating-point floor of the boundary sum. step: twice the change of
    lambda_anti(probe) - lambda_anti(0). pair: the combined change of lambda2(0)
    and lambda_anti(0). convergence: the largest relative change of
    lambda_anti at 0 and at probe.
    """
    fine = h / math.sqrt(2.0)
    g0 = EccentricGeometry(tau, 0.0, s)
    g1 = EccentricGeometry(tau, probe, s)
    c0, f0 = solve_2d(g0, h, **options), solve_2d(g0, fine, **options)
    c1, f1 = solve_2d(g1, h, **options), solve_2d(g1, fine, **options)
    d_c, d_f = shape_derivative(g0, h, **options), shape_derivative(g0, fine, **options)
    rounding = max(d_c.rounding_floor, d_f.rounding_floor)
    derivative = max(2.0 * abs(abs(d_c.value) - abs(d_f.value)), rounding)
    step = 2.0 * abs((c1.lambda_anti - c0.lambda_anti) - (f1.lambda_anti - f0.lambda_anti))
    pair = abs(c0.lambda2 - f0.lambda2) + abs(c0.lambda_anti - f0.lambda_anti)
    convergence = max(abs(c0.lambda_anti - f0.lambda_anti) / f0.lambda_anti,
                      abs(c1.lambda_anti - f1.lambda_anti) / f1.lambda_anti)
    return {"h_fine": fine, "probe": probe, "derivative": derivative, "step": step, "pair": pair,
            "convergence": convergence, "derivative_origin_fine": d_f.value}


def sweep_a(tau: float, s: float, grid=None, h: float = 0.05, points: int = 5, grading: float = DEFAULT_GRADING,
            workers: int = 1, strict: bool = False, **options) -> SweepReport:
    """lambda2, lambda_anti and the shape derivative along a grid of obstacle positions.

    Verdicts: lambda2 <= lambda_anti everywhere (exact), lambda_anti strictly
    decreasing on a > 0 beyond the refinement noise, lambda2(a) < lambda2(0),
    lambda2(0) = lambda_anti(0) within the combined refinement change (asserted
    only when the annulus is certified nonradial), a vanishing shape derivative
    at 0 and a negative one for a > 0, evenness in a on symmetric grid pairs.
    """
    if grid is None:
        if points < 3:
            raise ParameterError("a sweep needs at least 3 grid points")
        grid = np.linspace(0.0, 0.75 * (1.0 - tau), points)
    grid = sorted(float(a) for a in grid)
    if len(grid) < 3:
        raise ParameterError("a sweep needs at least 3 grid points")
    geometries = [EccentricGeometry(tau, a, s) for a in grid]  # validates every point up front
    options = dict(options, grading=grading)
    for g in geometries:
        mesh_eccentric(g, h, grading, options.get("min_rings", DEFAULT_MIN_RINGS))
    if workers < 1:
        raise ParameterError("workers must be positive")

    def job(g):
        return _point_record(g, h, options)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            records = list(pool.map(job, geometries))
    else:
        records = [job(g) for g in geometries]

    origin = _point_record(EccentricGeometry(tau, 0.0, s), h, options)
    ok = [r for r in records if r["status"] == "ok"]
    positive = sorted((r for r in ok if r["value"] > 0.0), key=lambda r: r["value"])
    violations = [f"lambda2 > lambda_anti at a={r['value']:.6g} ({r['lambda2']:.12g} > {r['lambda_anti']:.12g})"
                  for r in ok if r["lambda2"] > r["lambda_anti"]]
    if strict and violations:
        raise InvariantViolation("; ".join(violations))

    verdicts: dict = {"upper_bound": not violations}
    floors = None
    if origin["status"] == "ok" and positive:
        floors = noise_floors(tau, s, h, positive[0]["value"], **options)
        chain = [origin] + positive
        steps = [p["lambda_anti"] - q["lambda_anti"] for p, q in zip(chain, chain[1:])]
        verdicts["anti_decreasing"] = bool(all(d > floors["step"] for d in steps))
        verdicts["lambda2_below_origin"] = bool(all(r["lambda2"] < origin["lambda2"] for r in positive))
        verdicts["anti_below_origin"] = bool(all(r["lambda_anti"] < origin["lambda_anti"] for r in positive))
        verdicts["derivative_negative"] = bool(all(r["shape_derivative"] < 0.0 for r in positive))
        verdicts["mesh_converged"] = bool(floors["convergence"] < MESH_CONVERGENCE)
    verdicts["derivative_origin_zero"] = (bool(abs(origin["shape_derivative"]) <= floors["derivative"])
                                          if floors else None)

    radial = nonradiality_test(FractionalParams(2, s), RadialGeometry.annulus(2, tau, 1.0))
    verdicts["nonradial"] = radial.state
    if floors:
        gap0 = abs(origin["lambda2"] - origin["lambda_anti"])
        holds = bool(gap0 <= floors["pair"])
        verdicts["origin_gap"] = gap0
        verdicts["equality_at_origin"] = ("verified" if holds else "failed") if radial.nonradial else "reported"

    by_value = {r["value"]: r for r in ok}
    pairs = [(a, -a) for a in by_value if a > 0.0 and -a in by_value]
    if pairs:
        verdicts["even_in_a"] = bool(all(
            abs(by_value[a]["lambda_anti"] - by_value[b]["lambda_anti"]) <= 1e-8 * by_value[a]["lambda_anti"]
            for a, b in pairs))

    if floors is None or not verdicts["mesh_converged"]:
        verdicts["chain"] = "undecided"
    else:
        needed = [verdicts["upper_bound"], verdicts["anti_decreasing"], verdicts["lambda2_below_origin"],
                  verdicts["derivative_negative"], verdicts["derivative_origin_zero"]]
        if radial.nonradial:
            needed.append(verdicts["equality_at_origin"] == "verified")
        verdicts["chain"] = "verified" if all(needed) else "failed"

    provenance = {"tau": tau, "s": s, "h": h, "grading": grading, "options": dict(options),
                  "noise_floors": floors, "origin": origin,
                  "nonradiality": {"state": radial.state, "gap": radial.gap, "tol_gap": radial.tol_gap,
                                   "n": radial.n}}
    return SweepReport("a", grid, records, provenance, SWEEP_A_COLUMNS, {}, violations, verdicts)


# ---------------------------------------------------------------------------
# mesh text format

MESH_HEADER = "# fracspec-trimesh v1"


def write_mesh(mesh: TriMesh, target) -> None:
    """Write a mesh as text: header, geometry line, vertex block, triangle block, ring sizes.

    vertices:  x y tag mirror ring slot   (tag 0 interior, 1 outer circle, 2 obstacle)
    triangles: i j k                      (0-based vertex indices)
    """
    buf = io.StringIO()
    buf.write(f"{MESH_HEADER}\n")
    buf.write(f"tau {mesh.tau!r} a {mesh.a!r}\n")
    buf.write(f"vertices {mesh.n_vertices}\n")
    for (x, y), t, m, r, sl in zip(mesh.vertices, mesh.tags, mesh.mirror, mesh.ring, mesh.slot):
        buf.write(f"{float(x)!r} {float(y)!r} {int(t)} {int(m)} {int(r)} {int(sl)}\n")
    buf.write(f"triangles {mesh.n_triangles}\n")
    for i, j, k in mesh.triangles:
        buf.write(f"{int(i)} {int(j)} {int(k)}\n")
    buf.write("rings " + " ".join(str(int(c)) for c in mesh.ring_sizes) + "\n")
    text = buf.getvalue()
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", encoding="utf-8") as fh:
            fh.write(text)


def read_mesh(source) -> TriMesh:
    """Inverse of write_mesh."""
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        with open(source, encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    try:
        if lines[0].strip() != MESH_HEADER:
            raise ParameterError("not a fracspec mesh file")
        head = lines[1].split()
        tau, a = float(head[1]), float(head[3])
        nv = int(lines[2].split()[1])
        vb = np.array([ln.split() for ln in lines[3:3 + nv]], dtype=float).reshape(nv, 6)
        nt = int(lines[3 + nv].split()[1])
        tb = np.array([ln.split() for ln in lines[4 + nv:4 + nv + nt]], dtype=int).reshape(nt, 3)
        rings = np.array(lines[4 + nv + nt].split()[1:], dtype=int)
    except (IndexError, ValueError) as exc:
        raise ParameterError(f"malformed mesh file: {exc}") from exc
    ints = vb[:, 2:].astype(int)
    return TriMesh(vb[:, :2].copy(), tb, ints[:, 0], ints[:, 1], ints[:, 2], ints[:, 3], rings, tau, a)
