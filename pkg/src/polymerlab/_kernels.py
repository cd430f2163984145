"""numba kernels for log-domain partition-function tables.

Tables are dense (nx, ny) float64 arrays indexed by offsets from the rectangle's
lower-left corner; -inf means "no path".
"""
import math

import numpy as np
from numba import njit

NEG_INF = -np.inf


@njit(cache=True, inline="always")
def logaddexp(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@njit(cache=True)
def forward_dp(logw):
    """out[i, j] = log sum over up-right paths (0,0) -> (i,j) of prod of weights (both ends)."""
    nx, ny = logw.shape
    out = np.empty((nx, ny))
    out[0, 0] = logw[0, 0]
    for j in range(1, ny):
        out[0, j] = out[0, j - 1] + logw[0, j]
    for i in range(1, nx):
        out[i, 0] = out[i - 1, 0] + logw[i, 0]
        for j in range(1, ny):
            out[i, j] = logw[i, j] + logaddexp(out[i - 1, j], out[i, j - 1])
    return out


@njit(cache=True)
def backward_dp(logw):
    """out[i, j] = log sum over up-right paths (i,j) -> (nx-1, ny-1)."""
    nx, ny = logw.shape
    out = np.empty((nx, ny))
    out[nx - 1, ny - 1] = logw[nx - 1, ny - 1]
    for j in range(ny - 2, -1, -1):
        out[nx - 1, j] = out[nx - 1, j + 1] + logw[nx - 1, j]
    for i in range(nx - 2, -1, -1):
        out[i, ny - 1] = out[i + 1, ny - 1] + logw[i, ny - 1]
        for j in range(ny - 2, -1, -1):
            out[i, j] = logw[i, j] + logaddexp(out[i + 1, j], out[i, j + 1])
    return out


@njit(cache=True)
def boundary_dp(logw, fixed):
    """Down-right boundary polymer: cells with finite or -inf ``fixed`` keep that value,
    NaN cells follow Z_w = (Z_{w-e1} + Z_{w-e2}) Y_w.  Outside the rectangle counts as -inf."""
    nx, ny = logw.shape
    out = np.empty((nx, ny))
    for i in range(nx):
        for j in range(ny):
            f = fixed[i, j]
            if not math.isnan(f):
                out[i, j] = f
                continue
            left = out[i - 1, j] if i > 0 else NEG_INF
            down = out[i, j - 1] if j > 0 else NEG_INF
            s = logaddexp(left, down)
            out[i, j] = s + logw[i, j] if s != NEG_INF else NEG_INF
    return out


@njit(cache=True)
def exit_window_dp(logw, k_lo, k_hi):
    """Forward table from (0,0) restricted to paths whose signed exit time lies in [k_lo, k_hi].

    Axis cells carry the prefix product of the weights (the only path reaching them
    has exit time equal to their signed distance) and are dropped outside the window.
    The start cell (exit time 0) is kept only when the window contains 0.
    """
    nx, ny = logw.shape
    out = np.empty((nx, ny))
    acc = logw[0, 0]
    out[0, 0] = acc if (k_lo <= 0 and 0 <= k_hi) else NEG_INF
    for i in range(1, nx):
        acc += logw[i, 0]
        out[i, 0] = acc if (k_lo <= i and i <= k_hi) else NEG_INF
    acc = logw[0, 0]
    for j in range(1, ny):
        acc += logw[0, j]
        out[0, j] = acc if (k_lo <= -j and -j <= k_hi) else NEG_INF
    for i in range(1, nx):
        for j in range(1, ny):
            s = logaddexp(out[i - 1, j], out[i, j - 1])
            out[i, j] = s + logw[i, j] if s != NEG_INF else NEG_INF
    return out


@njit(cache=True)
def logsumexp_1d(v):
    m = NEG_INF
    for x in v:
        if x > m:
            m = x
    if m == NEG_INF:
        return NEG_INF
    s = 0.0
    for x in v:
        s += math.exp(x - m)
    return m + math.log(s)
