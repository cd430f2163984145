"""Busemann increments, the induced random walk, coupled trees and hitting laws.

Boxes are [lo, hi] with hi the last site where the walk takes a random step.
In ``ne_stationary`` mode the Busemann function is the log of a northeast
stationary partition function into the corner hi + (1, 1), which has the
exact joint law of the semi-infinite Busemann increments on the box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels, _walks
from .bruteforce import paths as _all_paths
from .environment import (
    E1,
    E2,
    EnvironmentSpec,
    LatticePoint,
    bulk_log_weights,
    pt,
    site_log_weights,
    theta_grid,
)
from .errors import UsageError
from .special_functions import ModelParams, characteristic_endpoint

MODES = ("ne_stationary", "truncated_direction")


@dataclass
class BusemannField:
    """G = log Z_{x, corner} on [lo, corner]; B(x, y) = G(x) - G(y)."""
    lo: LatticePoint
    hi: LatticePoint
    rho: float
    mode: str
    g: np.ndarray
    corner: LatticePoint

    def B(self, x, y) -> float:
        x, y = pt(x), pt(y)
        return float(self.g[x.x - self.lo.x, x.y - self.lo.y] - self.g[y.x - self.lo.x, y.y - self.lo.y])

    def log_I(self, z) -> float:
        """log I_z = B(z - e1, z)."""
        z = pt(z)
        return self.B(z - E1, z)

    def log_J(self, z) -> float:
        z = pt(z)
        return self.B(z - E2, z)

    def increments(self):
        """(log I, log J) arrays on [lo, hi + (1,1)]; NaN where the left/lower neighbour is missing."""
        n = self.hi.x - self.lo.x + 2, self.hi.y - self.lo.y + 2
        g = self.g[: n[0], : n[1]]
        li = np.full(n, np.nan)
        lj = np.full(n, np.nan)
        li[1:, :] = g[:-1, :] - g[1:, :]
        lj[:, 1:] = g[:, :-1] - g[:, 1:]
        return li, lj


@dataclass
class TransitionField:
    lo: LatticePoint
    hi: LatticePoint
    p_e1: np.ndarray

    def p(self, x) -> float:
        x = pt(x)
        return float(self.p_e1[x.x - self.lo.x, x.y - self.lo.y])


@dataclass
class ForwardTree:
    lo: LatticePoint
    hi: LatticePoint
    step_e1: np.ndarray  # True where g(x) = e1

    def step(self, x) -> LatticePoint:
        x = pt(x)
        return E1 if self.step_e1[x.x - self.lo.x, x.y - self.lo.y] else E2

    def path(self, start) -> list:
        x = pt(start)
        out = []
        while x.leq(self.hi) and self.lo.leq(x):
            out.append(x)
            x = x + self.step(x)
        out.append(x)  # first site outside the box
        return out

    def to_csv(self, fname) -> None:
        with open(fname, "w") as fh:
            fh.write("x,y,step\n")
            nx, ny = self.step_e1.shape
            for i in range(nx):
                for j in range(ny):
                    fh.write(f"{self.lo.x + i},{self.lo.y + j},{'e1' if self.step_e1[i, j] else 'e2'}\n")


@dataclass
class DualTree:
    """Dual site x stands for x - (1/2, 1/2); defined for x in [lo + (1,1), hi + (1,1)]."""
    lo: LatticePoint
    hi: LatticePoint
    step_back_e1: np.ndarray  # True where the dual step is -e1

    def step(self, x) -> LatticePoint:
        x = pt(x)
        return LatticePoint(-1, 0) if self.step_back_e1[x.x - self.lo.x, x.y - self.lo.y] else LatticePoint(0, -1)

    def path(self, start) -> list:
        """Dual path until it reaches the frame x1 = lo.x or x2 = lo.y (dual coordinates)."""
        x = pt(start)
        out = [x]
        while x.x >= self.lo.x and x.y >= self.lo.y:
            x = x + self.step(x)
            out.append(x)
        return out


@dataclass
class HittingDistribution:
    boundary: list
    mass: np.ndarray


# ---------------------------------------------------------------- Busemann field

def busemann_field(env: EnvironmentSpec, rho: float, box, mode: str = "ne_stationary",
                   horizon: int | None = None) -> BusemannField:
    lo, hi = pt(box[0]), pt(box[1])
    if mode not in MODES:
        raise UsageError(f"unknown Busemann mode {mode!r}")
    if not lo.leq(hi):
        raise UsageError("empty box")
    corner = hi + (1, 1)
    if mode == "ne_stationary":
        b = env.boundary
        if b.kind != "northeast" or b.anchor != corner or b.rho != rho:
            raise UsageError("ne_stationary mode needs a northeast boundary with this rho at hi + (1, 1)")
        g = _kernels.backward_dp(site_log_weights(env, lo, corner))
        return BusemannField(lo, hi, rho, mode, g, corner)
    if env.boundary.kind != "none":
        raise UsageError("truncated_direction mode needs an environment without boundary")
    M = horizon if horizon is not None else 16 * ((hi.x - lo.x) + (hi.y - lo.y))
    m, n = characteristic_endpoint(ModelParams(env.mu, rho), M)
    target = LatticePoint(lo.x + m, lo.y + n)
    if not corner.leq(target):
        raise UsageError("horizon too short for the box")
    g = _kernels.backward_dp(bulk_log_weights(env, lo, target))
    g = np.ascontiguousarray(g[: corner.x - lo.x + 1, : corner.y - lo.y + 1])
    return BusemannField(lo, hi, rho, mode, g, target)


def transitions(field: BusemannField, env: EnvironmentSpec | None = None) -> TransitionField:
    """p_e1(x) = J_{x+e2} / (I_{x+e1} + J_{x+e2}) on [lo, hi]."""
    return TransitionField(field.lo, field.hi, _walks.transitions_from_g(field.g))


def transitions_via_weights(field: BusemannField, env: EnvironmentSpec) -> np.ndarray:
    """Second route: p_e1(x) = Y_x exp(-B(x, x + e1)), with Y the bulk weight."""
    y = bulk_log_weights(env, field.lo, field.hi)
    n = y.shape
    g = field.g
    return np.exp(y + g[1: n[0] + 1, : n[1]] - g[: n[0], : n[1]])


def backward_transitions(field: BusemannField) -> np.ndarray:
    """Probability of a -e1 step, J_x / (I_x + J_x), on [lo + (1,1), hi + (1,1)] (offsets from lo + (1,1))."""
    li, lj = field.increments()
    li, lj = li[1:, 1:], lj[1:, 1:]
    return 1.0 / (1.0 + np.exp(li - lj))


# ---------------------------------------------------------------- trees

def forward_tree(trans: TransitionField, env: EnvironmentSpec, replica: int = 0) -> ForwardTree:
    theta = theta_grid(env, trans.lo, trans.hi, replica)
    return ForwardTree(trans.lo, trans.hi, theta <= trans.p_e1)


def dual_tree(tree: ForwardTree) -> DualTree:
    return DualTree(tree.lo + (1, 1), tree.hi + (1, 1), tree.step_e1.copy())


def tree_crossings(tree: ForwardTree, dual: DualTree) -> int:
    """Number of forward edges crossed by a dual edge (midpoints on the doubled lattice)."""
    fwd = set()
    nx, ny = tree.step_e1.shape
    for i in range(nx):
        for j in range(ny):
            w = tree.lo + (i, j)
            e = E1 if tree.step_e1[i, j] else E2
            fwd.add((2 * w.x + e.x, 2 * w.y + e.y))
    hits = 0
    for i in range(nx):
        for j in range(ny):
            x = dual.lo + (i, j)
            e = dual.step(x)
            mid = (2 * x.x - 1 + e.x, 2 * x.y - 1 + e.y)
            if mid in fwd:
                hits += 1
    return hits


NONE_WITHIN_BOX = None


def coalescence_point(tree: ForwardTree, a, b, box=None):
    """First common vertex of the tree paths from a and b inside the box, else None."""
    a, b = pt(a), pt(b)
    lo, hi = (tree.lo, tree.hi) if box is None else (pt(box[0]), pt(box[1]))

    def inside(x):
        return lo.leq(x) and x.leq(hi)

    if not (inside(a) and inside(b)):
        raise UsageError("starting points must lie in the box")
    while True:
        if a == b:
            return a
        if a.x + a.y <= b.x + b.y:
            a = a + tree.step(a)
            if not inside(a):
                return NONE_WITHIN_BOX
        else:
            b = b + tree.step(b)
            if not inside(b):
                return NONE_WITHIN_BOX


def dual_separates(tree: ForwardTree, k: int) -> bool:
    """True when a dual path started just outside the north-east side of the box
    ends on the axes strictly between the starts (k, 0) and (0, k) (relative to lo)."""
    dual = dual_tree(tree)
    lo, top = tree.lo, tree.hi + (1, 1)
    starts = [LatticePoint(x, top.y) for x in range(lo.x + 1, top.x + 1)]
    starts += [LatticePoint(top.x, y) for y in range(lo.y + 1, top.y)]
    for s in starts:
        end = dual.path(s)[-1]
        r = end - lo
        if (r.y == 0 and 1 <= r.x <= k) or (r.x == 0 and 1 <= r.y <= k):
            return True
    return False


# ---------------------------------------------------------------- hitting laws

def ne_boundary(lo, hi) -> list:
    """North-east boundary of [lo, hi]: top row left to right, then right column downward."""
    lo, hi = pt(lo), pt(hi)
    out = [LatticePoint(x, hi.y) for x in range(lo.x, hi.x + 1)]
    out += [LatticePoint(hi.x, y) for y in range(hi.y - 1, lo.y - 1, -1)]
    return out


def hitting_distribution(trans: TransitionField, start, N: int | None = None) -> HittingDistribution:
    """Exact law of the first north-east boundary site of the transition box hit from start."""
    s = pt(start)
    lo, hi = trans.lo, trans.hi
    if not (lo.leq(s) and s.leq(hi)):
        raise UsageError("start must lie in the box")
    top, right = _walks.hitting_mass(trans.p_e1, s.x - lo.x, s.y - lo.y)
    mass = np.concatenate([top, right[:-1][::-1]])
    return HittingDistribution(ne_boundary(lo, hi), mass)


def tv_distance(h1: HittingDistribution, h2: HittingDistribution) -> float:
    if h1.boundary != h2.boundary:
        raise UsageError("hitting distributions live on different boundaries")
    return 0.5 * float(np.abs(h1.mass - h2.mass).sum())


def pair_coupling_exact(trans: TransitionField, a, b, cutoff: float = 0.0):
    """Exact (met_inside, chi_differ, dropped_mass) for tree paths from two sites on one
    antidiagonal level; under the shared-uniform tree such paths move independently
    until they meet."""
    a, b = pt(a), pt(b)
    if a.x + a.y != b.x + b.y:
        raise UsageError("exact pair chain needs starts on the same antidiagonal level")
    if a.x > b.x:
        a, b = b, a
    lo = trans.lo
    return _walks.pair_chain(trans.p_e1, a.x - lo.x, a.y - lo.y, b.x - lo.x, b.y - lo.y, cutoff)


# ---------------------------------------------------------------- stationary measure check

def backward_measure_check(env: EnvironmentSpec, rho: float, u, v, margin=(2, 3)) -> float:
    """max over paths u -> v of |Pi(path) - Q^NE(path)|.

    Pi uses the walk from a Busemann field on a larger box (forced moves on the top
    row and right column of [u, v]); Q^NE is the polymer with bulk weights strictly
    inside and Busemann increments as boundary weights on the top row / right column.
    """
    u, v = pt(u), pt(v)
    if not (u.x < v.x and u.y < v.y):
        raise UsageError("need u < v componentwise")
    if (v.x - u.x + 1) * (v.y - u.y + 1) > 64:
        raise UsageError("box too large for path enumeration")
    corner = v + margin
    ne = env.plain().with_boundary("northeast", rho, corner)
    field = busemann_field(ne, rho, (u, corner - (1, 1)))
    p = transitions(field).p_e1
    li, lj = field.increments()
    nx, ny = v.x - u.x + 1, v.y - u.y + 1
    # vertex weights of Q^NE on [u, v]
    w = bulk_log_weights(env, u, v)
    for i in range(nx - 1):
        w[i, ny - 1] = li[i + 1, ny - 1]   # edge (x, x+e1) on the top row carries I_{x+e1}
    for j in range(ny - 1):
        w[nx - 1, j] = lj[nx - 1, j + 1]   # edge (x, x+e2) on the right column carries J_{x+e2}
    w[nx - 1, ny - 1] = 0.0
    logz = _kernels.backward_dp(w)[0, 0]
    worst = 0.0
    for verts in _all_paths(nx, ny):
        q = math.exp(sum(w[c] for c in verts) - logz)
        pi = 1.0
        for (i, j), (i2, j2) in zip(verts, verts[1:]):
            if i == nx - 1 or j == ny - 1:
                continue  # forced
            pi *= p[i, j] if i2 == i + 1 else 1.0 - p[i, j]
        worst = max(worst, abs(pi - q))
    return worst
