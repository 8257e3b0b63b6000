"""Spectra of radial domains assembled from radial problems in shifted dimensions.

A degree-l spherical harmonic times a radial profile is an eigenfunction on a
radial domain in R^N exactly when the profile is a radial eigenfunction of the
same domain in R^{N+2l}. The full spectrum is therefore the merge of the radial
spectra in dimensions N, N+2, N+4, ... with multiplicities given by the
dimension of the degree-l harmonics.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache

import numpy as np

from .errors import InvariantViolation, ParameterError
from .radial_kernel import RadialGeometry
from .special_fn import FractionalParams
from .spectral_1d import (
    EigenPair,
    assemble_direct,
    assemble_interval,
    assemble_rescaled,
    build_mesh,
    rayleigh_quotient,
    solve_smallest,
)

__all__ = [
    "SWEEP_COLUMNS",
    "FullSpectrum",
    "NonradialityResult",
    "SignResult",
    "SpectrumEntry",
    "SweepReport",
    "alpha_R",
    "default_workers",
    "full_spectrum",
    "harmonic_multiplicity",
    "interval_pairs",
    "nonradiality_test",
    "projection_bound",
    "radial_pairs",
    "radial_spectrum",
    "scaling_check",
    "sign_product",
    "sweep",
    "transplant_bound",
]

WORKERS_ENV = "FRACSPEC_WORKERS"
DEFAULT_MESH = 128
MAX_MESH = 512


def default_workers() -> int:
    """Worker count from the FRACSPEC_WORKERS environment variable (default 1)."""
    raw = os.environ.get(WORKERS_ENV, "").strip()
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError as exc:
        raise ParameterError(f"{WORKERS_ENV} must be a positive integer") from exc
    if value < 1:
        raise ParameterError(f"{WORKERS_ENV} must be a positive integer")
    return value


def harmonic_multiplicity(N: int, l: int) -> int:
    """Dimension of the degree-l spherical harmonics in R^N."""
    if N < 2 or l < 0:
        raise ParameterError("need N >= 2 and l >= 0")
    first = math.comb(N + l - 1, l)
    second = math.comb(N + l - 3, l - 2) if l >= 2 else 0
    return first - second


# ---------------------------------------------------------------------------
# radial families


@lru_cache(maxsize=256)
def _radial_pairs_cached(N: int, s: float, inner: float, outer: float, n: int, gamma: float,
                         k: int) -> tuple[EigenPair, ...]:
    params = FractionalParams(N, s)
    geometry = RadialGeometry.annulus(N, inner, outer)
    op = assemble_direct(geometry, params, build_mesh(inner, outer, n, gamma))
    return tuple(solve_smallest(op, k))


def radial_pairs(N_eff: int, params: FractionalParams, geometry: RadialGeometry, j_max: int,
                 n: int = DEFAULT_MESH, gamma: float = 2.0) -> list[EigenPair]:
    """First j_max radial eigenpairs of the radial section of geometry in dimension N_eff."""
    if N_eff < 2:
        raise ParameterError("radial spectra need N_eff >= 2")
    if geometry.kind != "annulus":
        raise ParameterError("radial spectra are computed on annuli")
    return list(_radial_pairs_cached(int(N_eff), float(params.s), float(geometry.inner),
                                     float(geometry.outer), int(n), float(gamma), int(j_max)))


def radial_spectrum(N_eff: int, params: FractionalParams, geometry: RadialGeometry, j_max: int,
                    n: int = DEFAULT_MESH, gamma: float = 2.0) -> np.ndarray:
    """First j_max radial eigenvalues of the annulus in dimension N_eff."""
    return np.array([p.lam for p in radial_pairs(N_eff, params, geometry, j_max, n, gamma)])


@lru_cache(maxsize=64)
def _interval_pairs_cached(s: float, n: int, gamma: float, k: int) -> tuple[EigenPair, ...]:
    return tuple(solve_smallest(assemble_interval(s, build_mesh(0.0, 1.0, n, gamma)), k))


def interval_pairs(s: float, k: int = 2, n: int = DEFAULT_MESH, gamma: float = 2.0) -> list[EigenPair]:
    """First k eigenpairs of (-Delta)^s on (0, 1)."""
    return list(_interval_pairs_cached(float(s), int(n), float(gamma), int(k)))


@dataclass(frozen=True)
class SpectrumEntry:
    lam: float
    l: int
    j: int
    multiplicity: int


@dataclass(frozen=True)
class FullSpectrum:
    entries: tuple[SpectrumEntry, ...]
    truncated: bool

    def eigenvalues(self, with_multiplicity: bool = True) -> list[float]:
        out = []
        for e in self.entries:
            out.extend([e.lam] * (e.multiplicity if with_multiplicity else 1))
        return out

    @property
    def second(self) -> float:
        """Second eigenvalue counted with multiplicity."""
        return self.eigenvalues()[1]


def full_spectrum(params: FractionalParams, geometry: RadialGeometry, l_max: int = 3, j_max: int = 4,
                  n: int = DEFAULT_MESH, gamma: float = 2.0) -> FullSpectrum:
    """Merged spectrum over families l = 0..l_max, sorted ascending."""
    if l_max < 1:
        raise ParameterError("l_max must be at least 1")
    N = params.N
    entries = []
    for l in range(l_max + 1):
        lam = radial_spectrum(N + 2 * l, params, geometry, j_max, n, gamma)
        mult = harmonic_multiplicity(N, l)
        entries.extend(SpectrumEntry(float(v), l, j + 1, mult) for j, v in enumerate(lam))
    entries.sort(key=lambda e: (e.lam, e.l, e.j))
    next_first = radial_spectrum(N + 2 * (l_max + 1), params, geometry, 1, n, gamma)[0]
    truncated = bool(next_first < entries[-1].lam)
    return FullSpectrum(tuple(entries), truncated)


# ---------------------------------------------------------------------------
# theorem-level predicates


@dataclass(frozen=True)
class NonradialityResult:
    state: str  # "nonradial", "radial" or "undecided"
    gap: float  # lambda_2 radial minus lambda_1 in dimension N+2
    tol_gap: float
    n: int
    lambda2_radial: float
    lambda1_next: float

    @property
    def nonradial(self) -> bool:
        return self.state == "nonradial"


def nonradiality_test(params: FractionalParams, geometry: RadialGeometry, n: int = DEFAULT_MESH,
                      n_max: int = MAX_MESH, gamma: float = 2.0) -> NonradialityResult:
    """Compare lambda_1 in dimension N+2 with the second radial eigenvalue.

    The tolerance is the change of the gap under one mesh doubling; the mesh
    is doubled until the sign of the gap is resolved or n_max is reached.
    """
    N = params.N

    def gap_at(m: int) -> tuple[float, float, float]:
        lam2 = radial_spectrum(N, params, geometry, 2, m, gamma)[1]
        lam1 = radial_spectrum(N + 2, params, geometry, 1, m, gamma)[0]
        return lam2 - lam1, lam2, lam1

    coarse = gap_at(n)
    m = n
    while True:
        fine = gap_at(2 * m)
        tol = abs(fine[0] - coarse[0])
        if abs(fine[0]) > tol or 2 * m >= n_max:
            break
        coarse, m = fine, 2 * m
    gap, lam2, lam1 = fine
    if gap > tol:
        state = "nonradial"
    elif gap < -tol:
        state = "radial"
    else:
        state = "undecided"
    return NonradialityResult(state, float(gap), float(tol), 2 * m, float(lam2), float(lam1))


@dataclass(frozen=True)
class SignResult:
    q_in: float
    q_out: float
    product: float
    passes: bool
    low_confidence: bool


def _sign_from_pair(pair: EigenPair) -> SignResult:
    prod = pair.q_inner * pair.q_outer
    return SignResult(pair.q_inner, pair.q_outer, prod, bool(prod < 0.0), pair.low_confidence)


def sign_product(params: FractionalParams, R: float, n: int = 256, gamma: float = 2.0) -> SignResult:
    """Boundary quotients of the second radial eigenfunction of A_R = {R < |x| < R+1}."""
    if R < 2.0:
        raise ParameterError("sign_product needs R >= 2")
    pair = solve_smallest(assemble_rescaled(R, params, build_mesh(0.0, 1.0, n, gamma)), 2)[1]
    return _sign_from_pair(pair)


def alpha_R(params: FractionalParams, R: float, n: int = 256, gamma: float = 2.0) -> float:
    """|alpha_R|: overlap of the first radial eigenfunction of A_R with phi_2(|x| - R).

    Both functions live on the same relative mesh, so the integral is the
    radial mass form applied to the two coefficient vectors.
    """
    if R < 2.0:
        raise ParameterError("alpha_R needs R >= 2")
    R = float(R)
    geometry = RadialGeometry.shell(params.N, R)
    op = assemble_direct(geometry, params, build_mesh(R, R + 1.0, n, gamma))
    phi1 = solve_smallest(op, 1)[0].coeffs[1:-1]
    phi2 = interval_pairs(params.s, 2, n, gamma)[1].coeffs[1:-1]
    return float(abs(phi1 @ op.mass @ phi2))


def transplant_bound(params: FractionalParams, R: float, n: int = 256,
                     gamma: float = 2.0) -> tuple[float, float]:
    """(Rayleigh quotient of phi_1(|x| - R), computed lambda_1(A_R))."""
    R = float(R)
    geometry = RadialGeometry.shell(params.N, R)
    op = assemble_direct(geometry, params, build_mesh(R, R + 1.0, n, gamma))
    lam1 = solve_smallest(op, 1)[0].lam
    phi1 = interval_pairs(params.s, 1, n, gamma)[0].coeffs
    return rayleigh_quotient(op, phi1), float(lam1)


def projection_bound(params: FractionalParams, R: float, n: int = 256,
                     gamma: float = 2.0) -> tuple[float, float]:
    """(Rayleigh quotient of phi_2(|x|-R) projected off phi_{1,A_R}, computed lambda_2(A_R))."""
    R = float(R)
    geometry = RadialGeometry.shell(params.N, R)
    op = assemble_direct(geometry, params, build_mesh(R, R + 1.0, n, gamma))
    pairs = solve_smallest(op, 2)
    phi2 = interval_pairs(params.s, 2, n, gamma)[1].coeffs[1:-1]
    u1 = pairs[0].coeffs[1:-1]
    test = phi2 - (u1 @ op.mass @ phi2) * u1
    return rayleigh_quotient(op, test), pairs[1].lam


def scaling_check(params: FractionalParams, tau: float, n: int = DEFAULT_MESH,
                  gamma: float = 2.0) -> dict:
    """lambda_j(B_1 minus B_tau) against (R+1)^{2s} lambda_j(A_R) with R = tau/(1-tau)."""
    if not 0.0 < tau < 1.0:
        raise ParameterError("tau must lie in (0, 1)")
    R = tau / (1.0 - tau)
    unit = radial_spectrum(params.N, params, RadialGeometry.annulus(params.N, tau, 1.0), 2, n, gamma)
    shell = radial_spectrum(params.N, params, RadialGeometry.annulus(params.N, R, R + 1.0), 2, n, gamma)
    scaled = (R + 1.0) ** (2.0 * params.s) * shell
    return {
        "R": R,
        "lambda_unit": unit.tolist(),
        "lambda_scaled": scaled.tolist(),
        "relative_difference": (np.abs(unit / scaled - 1.0)).tolist(),
    }


# ---------------------------------------------------------------------------
# sweeps

SWEEP_COLUMNS = (
    "parameter", "value", "lambda1", "lambda2_radial", "lambda1_next_dim", "lambda2_full",
    "q_inner", "q_outer", "sign_product", "sign_passes", "nonradial", "gap", "gap_tol",
    "interval_delta1", "interval_delta2",
)


@dataclass
class SweepReport:
    """Per-point records for a swept parameter, plus provenance and derived verdicts."""

    parameter: str
    grid: list
    records: list
    provenance: dict
    columns: tuple = SWEEP_COLUMNS
    threshold: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)
    verdicts: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for rec in self.records:
            writer.writerow([_csv_cell(rec.get(c)) for c in self.columns])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, default=_json_default)


def _csv_cell(value):
    if isinstance(value, float):
        return repr(value)
    return "" if value is None else value


def _json_default(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"cannot serialize {type(value)!r}")


def _empirical_threshold(grid: list, ok: list, undecided: list) -> dict:
    """First grid value from which ok holds at every larger grid point."""
    i = len(grid)
    while i > 0 and ok[i - 1]:
        i -= 1
    if i == len(grid):
        return {"value": None, "interval": None}
    j = i
    while j > 0 and undecided[j - 1]:
        j -= 1
    interval = [grid[j - 1] if j > 0 else None, grid[i]] if j < i else None
    return {"value": grid[i], "interval": interval}


def _sweep_point(params: FractionalParams, parameter: str, value: float, n: int, gamma: float,
                 n_max: int) -> dict:
    N, s = params.N, params.s
    if parameter == "R":
        geometry = RadialGeometry.annulus(N, value, value + 1.0)
        R = value
        scale = 1.0
    else:
        geometry = RadialGeometry.annulus(N, value, 1.0)
        R = value / (1.0 - value)
        scale = (R + 1.0) ** (2.0 * s)
    pairs = radial_pairs(N, params, geometry, 2, n, gamma)
    lam1_next = radial_spectrum(N + 2, params, geometry, 1, n, gamma)[0]
    test = nonradiality_test(params, geometry, n, n_max, gamma)
    sign = _sign_from_pair(pairs[1])
    interval = interval_pairs(s, 2, n, gamma)
    violation = None
    if lam1_next < pairs[0].lam * (1.0 - 1e-10):
        violation = f"dimension monotonicity failed at {parameter}={value}"
    return {
        "parameter": parameter,
        "value": float(value),
        "lambda1": pairs[0].lam,
        "lambda2_radial": pairs[1].lam,
        "lambda1_next_dim": float(lam1_next),
        "lambda2_full": float(min(lam1_next, pairs[1].lam)),
        "q_inner": sign.q_in,
        "q_outer": sign.q_out,
        "sign_product": sign.product,
        "sign_passes": sign.passes,
        "low_confidence": sign.low_confidence,
        "nonradial": test.state,
        "gap": test.gap,
        "gap_tol": test.tol_gap,
        "gap_mesh": test.n,
        "interval_delta1": abs(pairs[0].lam / scale - interval[0].lam),
        "interval_delta2": abs(pairs[1].lam / scale - interval[1].lam),
        "_violation": violation,
    }


def sweep(params: FractionalParams, parameter: str, grid, n: int = DEFAULT_MESH, gamma: float = 2.0,
          n_max: int = MAX_MESH, workers: int | None = None, strict: bool = False) -> SweepReport:
    """Sweep the shell position R (annulus R < |x| < R+1) or the hole radius tau of B_1.

    Interval deltas compare the shell eigenvalues, rescaled to unit width,
    with the eigenvalues of (0, 1). With strict=True an invariant violation
    raises instead of being recorded.
    """
    if parameter not in ("R", "tau"):
        raise ParameterError("parameter must be 'R' or 'tau'")
    grid = [float(g) for g in grid]
    if len(grid) < 3:
        raise ParameterError("a sweep needs at least 3 grid points")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ParameterError("grid must be strictly ascending")
    if parameter == "R" and grid[0] <= 0.0:
        raise ParameterError("R must be positive")
    if parameter == "tau" and not (0.0 < grid[0] and grid[-1] < 1.0):
        raise ParameterError("tau must lie in (0, 1)")
    workers = default_workers() if workers is None else int(workers)
    if workers < 1:
        raise ParameterError("workers must be positive")

    def job(value):
        return _sweep_point(params, parameter, value, n, gamma, n_max)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            records = list(pool.map(job, grid))
    else:
        records = [job(v) for v in grid]
    violations = [r.pop("_violation") for r in records]
    violations = [v for v in violations if v]
    if strict and violations:
        raise InvariantViolation("; ".join(violations))
    ok = [r["nonradial"] == "nonradial" and r["sign_passes"] for r in records]
    undecided = [r["nonradial"] == "undecided" for r in records]
    threshold = _empirical_threshold(grid, ok, undecided)
    provenance = {"N": params.N, "s": params.s, "n_mesh": n, "grading": gamma, "n_max": n_max,
                  "gap_tolerance": "change of the gap under one mesh doubling"}
    return SweepReport(parameter, grid, records, provenance, SWEEP_COLUMNS,
                       threshold, violations)
