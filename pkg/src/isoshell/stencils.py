"""
Finite-difference weights on arbitrary nodes.

Two independent routes produce the same numbers:

* ``_fornberg_rows`` -- Fornberg's recursion, a scalar loop compiled with
  numba (the hot path when building schemes on meshes with 1e3-1e4 nodes);
* ``_moment_rows`` -- the local moment (Taylor/Vandermonde) system, solved
  in one batched ``numpy.linalg.solve`` call per stencil width.

``stencil_rows`` picks the numba path unless ``ISOSHELL_DISABLE_NUMBA`` is
set.  The single-stencil helpers always use the moment system so they can
report its conditioning.
"""
from __future__ import annotations

import math

import numpy as np

from ._accel import ENABLE_NUMBA, jit

COND_LIMIT = 1e13


class StencilError(ValueError):
    """Moment system too ill-conditioned (nodes clustered or duplicated)."""

    def __init__(self, message, condition):
        super().__init__(message)
        self.condition = condition


def _moment_matrix(x, x0, scale):
    d = (np.asarray(x, dtype=float) - x0) / scale
    m = d.size
    k = np.arange(m)
    fact = np.array([math.factorial(j) for j in range(m)], dtype=float)
    return d[None, :] ** k[:, None] / fact[:, None]


def fd_weights(x, x0, nu):
    """Weights w with sum_j w_j f(x_j) ~ f^(nu)(x0), exact for degree < len(x).

    Raises
    ------
    StencilError
        If the scaled moment system has condition number above 1e13.
    """
    x = np.asarray(x, dtype=float)
    m = x.size
    if m < nu + 1:
        raise ValueError(f"need at least {nu + 1} points for derivative order {nu}")
    if np.unique(x).size != m:
        raise StencilError("stencil nodes must be distinct", math.inf)
    scale = np.max(np.abs(x - x0))
    if scale == 0.0:
        scale = 1.0
    A = _moment_matrix(x, x0, scale)
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise StencilError(f"moment system ill-conditioned (cond ~ {cond:.3g})", cond)
    rhs = np.zeros(m)
    rhs[nu] = 1.0
    return np.linalg.solve(A, rhs) / scale**nu


def stencil_weights(offsets, nu, h=1.0):
    """Weights for integer ``offsets`` on a uniform grid of spacing ``h``."""
    offsets = np.asarray(offsets, dtype=float)
    if np.unique(offsets).size != offsets.size:
        raise StencilError("offsets must be distinct", math.inf)
    return fd_weights(offsets * h, 0.0, nu)


@jit
def _fornberg_rows(nodes, starts, widths, targets, nu, out):
    """Fill out[i, :widths[i]] with nu-th derivative weights at targets[i]."""
    nrows = starts.shape[0]
    mmax = out.shape[1]
    c = np.zeros((mmax, nu + 1))
    for row in range(nrows):
        m = widths[row]
        z = targets[row]
        x = nodes[starts[row]:starts[row] + m]
        # shift and scale so the recursion works on O(1) numbers
        scale = 0.0
        for j in range(m):
            d = abs(x[j] - z)
            if d > scale:
                scale = d
        for j in range(m):
            for k in range(nu + 1):
                c[j, k] = 0.0
        c1 = 1.0
        c4 = (x[0] - z) / scale
        c[0, 0] = 1.0
        for i in range(1, m):
            mn = min(i, nu)
            c2 = 1.0
            c5 = c4
            c4 = (x[i] - z) / scale
            for j in range(i):
                c3 = (x[i] - x[j]) / scale
                c2 = c2 * c3
                if j == i - 1:
                    for k in range(mn, 0, -1):
                        c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                    c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
                for k in range(mn, 0, -1):
                    c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
                c[j, 0] = c4 * c[j, 0] / c3
            c1 = c2
        inv = scale ** (-nu)
        for j in range(m):
            out[row, j] = c[j, nu] * inv
        for j in range(m, mmax):
            out[row, j] = 0.0
    return out


def _moment_rows(nodes, starts, widths, targets, nu, out):
    """Vectorized twin of ``_fornberg_rows``: batched moment-system solves."""
    out[:] = 0.0
    for m in np.unique(widths):
        rows = np.flatnonzero(widths == m)
        idx = starts[rows, None] + np.arange(m)[None, :]
        d = nodes[idx] - targets[rows][:, None]
        scale = np.max(np.abs(d), axis=1)
        d = d / scale[:, None]
        k = np.arange(m)
        fact = np.array([math.factorial(j) for j in range(m)], dtype=float)
        A = d[:, None, :] ** k[None, :, None] / fact[None, :, None]
        rhs = np.zeros((rows.size, m))
        rhs[:, nu] = 1.0
        w = np.linalg.solve(A, rhs[:, :, None])[:, :, 0]
        out[rows, :m] = w * scale[:, None] ** (-nu)
    return out


def stencil_rows(nodes, starts, widths, targets, nu, use_numba=None):
    """Weights for many stencils at once; returns an array (rows, max width).

    Row i uses nodes[starts[i]:starts[i] + widths[i]] and approximates the
    nu-th derivative (nu = 0 interpolates) at position targets[i].
    """
    nodes = np.ascontiguousarray(nodes, dtype=np.float64)
    starts = np.ascontiguousarray(starts, dtype=np.int64)
    widths = np.ascontiguousarray(widths, dtype=np.int64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    out = np.zeros((starts.size, int(widths.max())))
    if use_numba is None:
        use_numba = ENABLE_NUMBA
    if use_numba:
        return _fornberg_rows(nodes, starts, widths, targets, nu, out)
    return _moment_rows(nodes, starts, widths, targets, nu, out)
