"""numba kernels for the random walk in the Busemann environment: transition
tables, shared-uniform path following, exact mass transport and the exact
pair chain of two walks that move independently until they meet.

All arrays cover a box [0, v] in offset coordinates; ``p`` holds the
probability of an e1 step at every site of the box.  A site is on the
north-east boundary when i == v1 or j == v2.
"""
import math

import numpy as np
from numba import njit

from ._rng import theta_at


@njit(cache=True)
def transitions_from_g(g):
    """p[i, j] = Z(x+e1) / (Z(x+e1) + Z(x+e2)) from g = log Z_{., corner} on [0, v + (1,1)]."""
    nx, ny = g.shape
    p = np.empty((nx - 1, ny - 1))
    for i in range(nx - 1):
        for j in range(ny - 1):
            d = g[i, j + 1] - g[i + 1, j]
            if d > 0:
                e = math.exp(-d)
                p[i, j] = e / (1.0 + e)
            else:
                p[i, j] = 1.0 / (1.0 + math.exp(d))
    return p


@njit(cache=True)
def follow(p, theta_k0, theta_k1, ox, oy, si, sj, replica, out):
    """Trace the tree path from (si, sj) until it leaves the box; writes visited
    offsets to ``out`` and returns their number."""
    nx, ny = p.shape
    i, j = si, sj
    n = 0
    while i < nx and j < ny:
        out[n, 0] = i
        out[n, 1] = j
        n += 1
        if theta_at(theta_k0, theta_k1, ox + i, oy + j, replica) <= p[i, j]:
            i += 1
        else:
            j += 1
    return n


@njit(cache=True)
def pair_run(p, k0, k1, ox, oy, ai, aj, bi, bj, replica):
    """Follow two same-level tree paths in one theta replica.

    Returns (met_inside, chi_differ, meet_i, meet_j); meeting on the north-east
    boundary counts as inside.  chi_differ is 1 when the first boundary sites differ.
    """
    nx, ny = p.shape
    vi, vj = nx - 1, ny - 1
    chi_differ = -1
    while True:
        if ai == bi and aj == bj:
            if chi_differ < 0:
                chi_differ = 0
            return 1, chi_differ, ai, aj
        if chi_differ < 0 and (ai == vi or aj == vj or bi == vi or bj == vj):
            chi_differ = 1
        if theta_at(k0, k1, ox + ai, oy + aj, replica) <= p[ai, aj]:
            ai += 1
        else:
            aj += 1
        if theta_at(k0, k1, ox + bi, oy + bj, replica) <= p[bi, bj]:
            bi += 1
        else:
            bj += 1
        if ai > vi or aj > vj or bi > vi or bj > vj:
            if chi_differ < 0:
                chi_differ = 1
            return 0, chi_differ, -1, -1


@njit(cache=True)
def pair_counts(p, k0, k1, ox, oy, ai, aj, bi, bj, rep0, n_rep):
    met = 0
    differ = 0
    for r in range(rep0, rep0 + n_rep):
        m, d, _, _ = pair_run(p, k0, k1, ox, oy, ai, aj, bi, bj, r)
        met += m
        differ += d
    return met, differ


@njit(cache=True)
def hitting_mass(p, si, sj):
    """Exact law of the first north-east boundary site hit from (si, sj).

    Returns (top, right): top[i] is the mass at (i, v2), right[j] the mass at
    (v1, j) for j < v2.
    """
    nx, ny = p.shape
    vi, vj = nx - 1, ny - 1
    top = np.zeros(nx)
    right = np.zeros(ny)
    if si == vi or sj == vj:
        if sj == vj:
            top[si] = 1.0
        else:
            right[sj] = 1.0
        return top, right
    m = np.zeros((nx, ny))
    m[si, sj] = 1.0
    for i in range(si, vi):
        for j in range(sj, vj):
            w = m[i, j]
            if w == 0.0:
                continue
            q = p[i, j]
            m[i + 1, j] += w * q
            m[i, j + 1] += w * (1.0 - q)
    for i in range(si, nx):
        top[i] = m[i, vj]
    for j in range(sj, vj):
        right[j] = m[vi, j]
    return top, right


@njit(cache=True)
def pair_chain(p, ai, aj, bi, bj, cutoff):
    """Exact pair chain for two walks started on the same antidiagonal level that
    move independently until they meet (then together).

    Path a is the upper-left one (ai < bi).  Returns (met_inside, chi_differ,
    dropped) where dropped is the total mass discarded below ``cutoff``.
    """
    nx, ny = p.shape
    vi, vj = nx - 1, ny - 1
    level = ai + aj
    n = nx  # index by x coordinate
    cur = np.zeros((n, n))
    nxt = np.zeros((n, n))
    cur[ai, bi] = 1.0
    ilo, ihi, jlo, jhi = ai, ai, bi, bi
    met = 0.0
    differ = 0.0
    dropped = 0.0
    # starts already on the boundary
    if aj == vj or bi == vi or ai == vi or bj == vj:
        differ = 1.0
    while True:
        nilo, nihi, njlo, njhi = n, -1, n, -1
        any_mass = False
        for i in range(ilo, ihi + 1):
            ya = level - i
            for j in range(max(jlo, i + 1), jhi + 1):
                w = cur[i, j]
                if w == 0.0:
                    continue
                cur[i, j] = 0.0
                if w < cutoff:
                    dropped += w
                    continue
                yb = level - j
                on_a = i == vi or ya == vj
                on_b = j == vi or yb == vj
                pa = p[i, ya]
                pb = p[j, yb]
                for da in range(2):
                    qa = pa if da == 1 else 1.0 - pa
                    ni = i + da
                    nya = ya + 1 - da
                    for db in range(2):
                        qb = pb if db == 1 else 1.0 - pb
                        mass = w * qa * qb
                        if mass == 0.0:
                            continue
                        nj = j + db
                        nyb = yb + 1 - db
                        if ni > vi or nya > vj or nj > vi or nyb > vj:
                            continue  # someone left the box unmerged
                        if ni == nj:
                            met += mass
                            continue
                        if not (on_a or on_b) and (ni == vi or nya == vj or nj == vi or nyb == vj):
                            differ += mass
                        nxt[ni, nj] += mass
                        any_mass = True
                        if ni < nilo:
                            nilo = ni
                        if ni > nihi:
                            nihi = ni
                        if nj < njlo:
                            njlo = nj
                        if nj > njhi:
                            njhi = nj
        if not any_mass:
            break
        cur, nxt = nxt, cur
        ilo, ihi, jlo, jhi = nilo, nihi, njlo, njhi
        level += 1
    return met, differ, dropped
