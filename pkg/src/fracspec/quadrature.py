"""Gauss rules mapped to [0, 1] and a graded rule for near-singular weights."""

from __future__ import annotations

from functools import cache

import numpy as np
from scipy.special import roots_jacobi


@cache
def gauss_legendre01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """n-point Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1.0), 0.5 * w
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


@cache
def gauss_jacobi01(n: int, alpha: float, beta: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes/weights on [0, 1] for the weight x**alpha * (1 - x)**beta."""
    # scipy's weight on [-1, 1] is (1 - t)**a (1 + t)**b; x = (1 + t)/2.
    t, w = roots_jacobi(n, beta, alpha)
    x = 0.5 * (t + 1.0)
    w = w * 0.5 ** (alpha + beta + 1.0)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


def near_singular_half(a: float, c: float, eps: np.ndarray, beta: np.ndarray,
                       n_gauss: int = 20, max_panels: int = 1100) -> np.ndarray:
    """Integral over y in [0, 1/2] of y**a (1-y)**a (eps + beta*y)**(-c).

    eps > 0 sets the scale of the near singularity at y = -eps/beta. The
    interval is split into [0, y0] with y0 = min(eps/beta, 1/2),
    integrated with a Jacobi rule for the y**a factor after scaling, and
    dyadic panels [y0 2^k, y0 2^(k+1)] on which the integrand is smooth on
    the panel's own scale. Vectorized over eps/beta.
    """
    eps = np.atleast_1d(np.asarray(eps, dtype=float))
    beta = np.broadcast_to(np.asarray(beta, dtype=float), eps.shape)
    y0 = np.minimum(eps / beta, 0.5)

    xj, wj = gauss_jacobi01(n_gauss, a)
    y = y0[:, None] * xj[None, :]
    # log form keeps tiny eps with large c free of overflow
    logf = (a + 1.0) * np.log(y0)[:, None] + a * np.log1p(-y) - c * np.log(eps[:, None] + beta[:, None] * y)
    total = np.exp(logf) @ wj

    n_panels = int(np.clip(np.ceil(np.log2(0.5 / y0.min())), 0, max_panels))
    if n_panels > 0:
        xg, wg = gauss_legendre01(n_gauss)
        k = np.arange(n_panels)
        lo = np.minimum(y0[:, None] * 2.0 ** k[None, :], 0.5)
        hi = np.minimum(2.0 * lo, 0.5)
        width = np.clip(hi - lo, 0.0, None)
        yy = lo[:, :, None] + width[:, :, None] * xg[None, None, :]
        with np.errstate(divide="ignore"):
            logf = a * np.log(yy) + a * np.log1p(-yy) - c * np.log(eps[:, None, None] + beta[:, None, None] * yy)
        ff = np.where(width[:, :, None] > 0.0, np.exp(logf), 0.0)
        total = total + np.einsum("tkq,q,tk->t", ff, wg, width)
    return total


def uniform_panels(lo: np.ndarray, hi: np.ndarray, max_width: float,
                   n_gauss: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes on [lo_i, hi_i] for each row i.

    Every row is split into equal panels no wider than max_width. Rows
    needing fewer panels than the widest row are padded with zero weights,
    so the result is a rectangular (rows, nodes) pair.
    """
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    span = np.clip(hi - lo, 0.0, None)
    counts = np.maximum(1, np.ceil(span / max_width).astype(int))
    n_max = int(counts.max()) if counts.size else 1
    xg, wg = gauss_legendre01(n_gauss)
    k = np.arange(n_max)
    width = span / counts
    active = k[None, :] < counts[:, None]
    start = lo[:, None] + width[:, None] * np.minimum(k[None, :], counts[:, None] - 1)
    nodes = start[:, :, None] + width[:, None, None] * xg[None, None, :]
    weights = np.where(active[:, :, None], width[:, None, None] * wg[None, None, :], 0.0)
    shape = (lo.size, n_max * n_gauss)
    return nodes.reshape(shape), weights.reshape(shape)
