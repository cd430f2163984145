"""Exact quenched computations: partition tables, exit times, path sampling,
nested boundaries, the antidiagonal (staircase) model and midpoint crossing.

Conventions
-----------
* ``Z_{u,v}`` sums over up-right paths from u to v the product of the vertex
  weights of every visited site, both endpoints included.  For environments
  with a boundary the vertex form of ``environment.site_log_weights`` applies,
  so a southwest base or a northeast corner contributes weight 1.
* The exit time of a path is the signed length of its first straight run,
  positive along e1.  A path that never turns has exit time equal to its signed
  full length; the single-vertex path u -> u has exit time 0.
* Empty path families are reported as ``EMPTY``, never as a float.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .environment import (
    E1,
    E2,
    EnvironmentSpec,
    LatticePoint,
    WeightField,
    bulk_log_weights,
    pt,
    site_log_weights,
    staircase_log_h,
    staircase_log_j,
)
from .errors import DomainError, UsageError
from .special_functions import ModelParams, characteristic_endpoint

NEG_INF = -math.inf


class _Empty:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self):
        return "EMPTY"

    def __bool__(self):
        return False


EMPTY = _Empty()


def _as_value(x: float):
    return EMPTY if x == NEG_INF else float(x)


@dataclass
class PartitionTable:
    lo: LatticePoint
    hi: LatticePoint
    orientation: str  # "forward" (from lo) or "backward" (to hi)
    values: np.ndarray

    def __getitem__(self, z) -> float:
        z = pt(z)
        if not (self.lo.leq(z) and z.leq(self.hi)):
            raise UsageError(f"{tuple(z)} outside table {tuple(self.lo)}..{tuple(self.hi)}")
        return float(self.values[z.x - self.lo.x, z.y - self.lo.y])

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("x,y,logZ\n")
            nx, ny = self.values.shape
            for i in range(nx):
                for j in range(ny):
                    fh.write(f"{self.lo.x + i},{self.lo.y + j},{self.values[i, j]!r}\n")


@dataclass
class PathSample:
    vertices: list
    tau: int


def weights_on(source, lo, hi) -> np.ndarray:
    """Log vertex weights on [lo, hi] from an EnvironmentSpec or a WeightField."""
    lo, hi = pt(lo), pt(hi)
    if not lo.leq(hi):
        raise DomainError(f"need {tuple(lo)} <= {tuple(hi)} componentwise")
    if isinstance(source, WeightField):
        if not (source.lo.leq(lo) and hi.leq(source.hi)):
            raise UsageError("rectangle outside the explicit weight field")
        i0, j0 = lo.x - source.lo.x, lo.y - source.lo.y
        return np.ascontiguousarray(source.logw[i0:i0 + hi.x - lo.x + 1, j0:j0 + hi.y - lo.y + 1])
    return site_log_weights(source, lo, hi)


def forward_table(source, base, corner) -> PartitionTable:
    base, corner = pt(base), pt(corner)
    w = weights_on(source, base, corner)
    return PartitionTable(base, corner, "forward", _kernels.forward_dp(w))


def backward_table(source, corner, base) -> PartitionTable:
    base, corner = pt(base), pt(corner)
    w = weights_on(source, base, corner)
    return PartitionTable(base, corner, "backward", _kernels.backward_dp(w))


def log_partition(source, u, v) -> float:
    u, v = pt(u), pt(v)
    w = weights_on(source, u, v)
    return float(_kernels.forward_dp(w)[-1, -1])


def exit_time(vertices) -> int:
    vs = [pt(p) for p in vertices]
    if len(vs) < 2:
        return 0
    d = vs[1] - vs[0]
    run = 1
    while run + 1 < len(vs) and vs[run + 1] - vs[run] == d:
        run += 1
    return run if d == E1 else -run


def _exit_terms(w: np.ndarray) -> dict:
    """log Z(tau = k) for every attainable k, from one backward table on the box."""
    nx, ny = w.shape
    back = _kernels.backward_dp(w)
    row = np.cumsum(w[:, 0])
    col = np.cumsum(w[0, :])
    terms = {}
    if nx == 1 and ny == 1:
        terms[0] = float(w[0, 0])
        return terms
    if ny == 1:
        terms[nx - 1] = float(row[-1])
        return terms
    if nx == 1:
        terms[-(ny - 1)] = float(col[-1])
        return terms
    for k in range(1, nx):
        terms[k] = float(row[k] + back[k, 1])
    for k in range(1, ny):
        terms[-k] = float(col[k] + back[1, k])
    return terms


def restricted_log_partition(source, u, v, a: int, b: int):
    """log Z_{u,v}(a <= tau <= b), or EMPTY when no path qualifies."""
    u, v = pt(u), pt(v)
    w = weights_on(source, u, v)
    vals = [t for k, t in _exit_terms(w).items() if a <= k <= b]
    if not vals:
        return EMPTY
    return _as_value(_kernels.logsumexp_1d(np.array(vals)))


def exit_window_table(source, u, corner, a: int, b: int) -> PartitionTable:
    """Forward table of log Z_{u,w}(a <= tau <= b) for every w in [u, corner]."""
    u, corner = pt(u), pt(corner)
    w = weights_on(source, u, corner)
    return PartitionTable(u, corner, "forward", _kernels.exit_window_dp(w, a, b))


def quenched_exit_prob(source, u, v, a: int, b: int) -> float:
    r = restricted_log_partition(source, u, v, a, b)
    if r is EMPTY:
        return 0.0
    full = log_partition(source, u, v)
    return min(1.0, max(0.0, math.exp(r - full)))


def sample_path(source, u, v, stream) -> PathSample:
    """Exact draw from the quenched measure, traced backwards from v.

    ``stream`` is anything with a ``random()`` method returning uniforms in [0, 1).
    """
    u, v = pt(u), pt(v)
    tab = forward_table(source, u, v).values
    i, j = v.x - u.x, v.y - u.y
    rev = [v]
    while i > 0 or j > 0:
        if i == 0:
            j -= 1
        elif j == 0:
            i -= 1
        else:
            a, b = tab[i - 1, j], tab[i, j - 1]
            p_left = 1.0 / (1.0 + math.exp(b - a))
            if stream.random() < p_left:
                i -= 1
            else:
                j -= 1
        rev.append(LatticePoint(u.x + i, u.y + j))
    verts = rev[::-1]
    return PathSample(verts, exit_time(verts))


# ---------------------------------------------------------------- boundary polymers

@dataclass
class BoundaryPolymer:
    """Polymer whose paths start on a down-right boundary inside [lo, hi].

    ``fixed`` holds log Z on boundary cells, -inf on cells south-west of the
    boundary, and NaN on bulk cells (computed by the recursion).  ``labels``
    gives the exit label of each boundary cell (meaningful where ``is_exit``).
    """
    lo: LatticePoint
    hi: LatticePoint
    logw: np.ndarray
    fixed: np.ndarray
    labels: np.ndarray
    is_exit: np.ndarray
    meta: dict = field(default_factory=dict)

    def table(self, a: int | None = None, b: int | None = None) -> PartitionTable:
        fixed = self.fixed
        if a is not None or b is not None:
            lo_k = -np.inf if a is None else a
            hi_k = np.inf if b is None else b
            drop = self.is_exit & ((self.labels < lo_k) | (self.labels > hi_k))
            fixed = fixed.copy()
            fixed[drop] = NEG_INF
        return PartitionTable(self.lo, self.hi, "forward", _kernels.boundary_dp(self.logw, fixed))

    def log_partition(self, w, a: int | None = None, b: int | None = None):
        return _as_value(self.table(a, b)[w])

    def exit_prob(self, w, a: int | None = None, b: int | None = None) -> float:
        r = self.log_partition(w, a, b)
        if r is EMPTY:
            return 0.0
        return min(1.0, max(0.0, math.exp(r - self.table()[w])))


def _rect_weights(source, lo, hi, bulk_only: bool) -> np.ndarray:
    if bulk_only and isinstance(source, EnvironmentSpec):
        return bulk_log_weights(source, lo, hi)
    return weights_on(source, lo, hi)


def staircase_span(anchor, v) -> tuple[int, int]:
    """Range of k with the staircase site anchor + (k, -k) weakly below-left of v."""
    a, v = pt(anchor), pt(v)
    return -(v.y - a.y), v.x - a.x


def staircase_polymer(env: EnvironmentSpec, hi) -> BoundaryPolymer:
    """The antidiagonal stationary polymer of ``env`` on the smallest rectangle whose
    upper-right corner is ``hi`` and which contains every staircase site below-left of hi."""
    if env.boundary.kind != "antidiagonal":
        raise UsageError("staircase_polymer needs an antidiagonal environment")
    a, hi = env.boundary.anchor, pt(hi)
    if (hi.x - a.x) + (hi.y - a.y) < 1:
        raise UsageError(f"{tuple(hi)} is not strictly north-east of the staircase")
    k_lo, k_hi = staircase_span(a, hi)
    lo = LatticePoint(a.x + k_lo, a.y - k_hi - 1)
    nx, ny = hi.x - lo.x + 1, hi.y - lo.y + 1
    logw = bulk_log_weights(env, lo, hi)
    fixed = np.full((nx, ny), np.nan)
    labels = np.zeros((nx, ny), dtype=np.int64)
    is_exit = np.zeros((nx, ny), dtype=bool)
    xs = np.arange(lo.x, hi.x + 1)[:, None] - a.x
    ys = np.arange(lo.y, hi.y + 1)[None, :] - a.y
    rel = xs + ys
    fixed[rel <= -2] = NEG_INF
    log_h = staircase_log_h(env, k_lo - 1, k_hi + 1)
    log_j = staircase_log_j(env, k_lo - 1, k_hi + 1)
    for k in range(k_lo - 1, k_hi + 2):
        hk = log_h[k - (k_lo - 1)]
        s = (a.x + k - lo.x, a.y - k - lo.y)
        t = (a.x + k - lo.x, a.y - k - 1 - lo.y)
        if 0 <= s[0] < nx and 0 <= s[1] < ny:
            fixed[s] = hk
            labels[s] = k
            is_exit[s] = True
        if 0 <= t[0] < nx and 0 <= t[1] < ny:
            fixed[t] = hk - log_j[k - (k_lo - 1)]
    return BoundaryPolymer(lo, hi, logw, fixed, labels, is_exit,
                           {"kind": "antidiagonal", "anchor": a})


def diagonal_log_partition(env: EnvironmentSpec, anchor, v, k_lo: int | None = None,
                           k_hi: int | None = None):
    """log sum_{k_lo <= k <= k_hi} H_k Ztilde_{anchor + (k,-k), v}.

    The default window is the full span of staircase sites below-left of v; sites
    outside that span cannot reach v and contribute nothing.
    """
    anchor = pt(anchor)
    if env.boundary.kind != "antidiagonal" or env.boundary.anchor != anchor:
        raise UsageError("environment must carry an antidiagonal boundary at this anchor")
    if k_lo is not None and k_hi is not None and k_lo > k_hi:
        raise UsageError(f"empty staircase window [{k_lo}, {k_hi}]")
    bp = staircase_polymer(env, v)
    return bp.log_partition(v, k_lo, k_hi)


def _down_right_ok(path) -> bool:
    for p, q in zip(path, path[1:]):
        d = q - p
        if d != E1 and d != LatticePoint(0, -1):
            return False
    return True


@dataclass
class NestedBoundary:
    """Boundary data for a polymer nested inside an outer one.

    ``edge_log_weights`` maps (tail, head) up-right edges of the inner path to
    log S, the outer partition-function ratio across the edge.  ``log_h`` gives
    log Z^outer(z) - log Z^outer(root) at each inner-path vertex.
    """
    path: list
    root: LatticePoint
    edge_log_weights: dict
    log_h: np.ndarray

    def labels(self) -> np.ndarray:
        r = self.root
        out = []
        for z in self.path:
            out.append(z.x - r.x if z.x > r.x else -(z.y - r.y))
        return np.array(out, dtype=np.int64)

    def polymer(self, source, hi, exits=None) -> BoundaryPolymer:
        """Bulk polymer north-east of the inner path, up to ``hi``.

        The path has to reach column hi.x and height hi.y.  ``exits`` marks which
        path vertices count as exit points (default: all).
        """
        hi = pt(hi)
        xs = [z.x for z in self.path]
        ys = [z.y for z in self.path]
        lo = LatticePoint(min(xs), min(ys))
        if max(xs) < hi.x or max(ys) < hi.y:
            raise UsageError("inner path does not span the requested rectangle")
        logw = _rect_weights(source, lo, hi, bulk_only=True)
        nx, ny = hi.x - lo.x + 1, hi.y - lo.y + 1
        fixed = np.full((nx, ny), np.nan)
        labels = np.zeros((nx, ny), dtype=np.int64)
        is_exit = np.zeros((nx, ny), dtype=bool)
        lab = self.labels()
        ex = np.ones(len(self.path), bool) if exits is None else np.asarray(exits, bool)
        ymin = {}
        for z in self.path:
            ymin[z.x] = min(ymin.get(z.x, z.y), z.y)
        for i in range(nx):
            fixed[i, : ymin[lo.x + i] - lo.y] = NEG_INF
        for n, z in enumerate(self.path):
            if z.x <= hi.x and z.y <= hi.y:
                c = (z.x - lo.x, z.y - lo.y)
                fixed[c] = self.log_h[n]
                labels[c] = lab[n]
                is_exit[c] = ex[n]
        return BoundaryPolymer(lo, hi, logw, fixed, labels, is_exit, {"kind": "nested", "root": self.root})


def nested_boundary(outer, outer_base, inner_path, root=None) -> NestedBoundary:
    """Boundary weights on ``inner_path`` induced by an outer polymer.

    ``outer`` is an EnvironmentSpec (southwest/plain polymer based at ``outer_base``,
    or an antidiagonal environment whose anchor is ``outer_base``) or an explicit
    PartitionTable / BoundaryPolymer table of the outer model.
    """
    path = [pt(p) for p in inner_path]
    if len(path) == 0 or not _down_right_ok(path):
        raise UsageError("inner path must be a nonempty down-right vertex list")
    root = path[0] if root is None else pt(root)
    if root not in path:
        raise UsageError("root must lie on the inner path")
    hi = LatticePoint(max(z.x for z in path), max(z.y for z in path))
    if isinstance(outer, PartitionTable):
        tab = outer
    elif isinstance(outer, EnvironmentSpec) and outer.boundary.kind == "antidiagonal":
        if outer.boundary.anchor != pt(outer_base):
            raise UsageError("antidiagonal outer polymer must be based at its anchor")
        tab = staircase_polymer(outer, hi).table()
    else:
        tab = forward_table(outer, outer_base, hi)
    vals = np.array([tab[z] for z in path])
    if not np.all(np.isfinite(vals)):
        raise UsageError("inner path must lie weakly north-east of the outer boundary")
    edges = {}
    for n in range(1, len(path)):
        p, q = path[n - 1], path[n]
        if q - p == E1:
            edges[(p, q)] = vals[n] - vals[n - 1]
        else:
            edges[(q, p)] = vals[n - 1] - vals[n]
    log_h = vals - vals[path.index(root)]
    return NestedBoundary(path, root, edges, log_h)


def axes_path(base, hi) -> list:
    """Down-right path along the two axes through ``base``: up to hi.y, then right to hi.x."""
    base, hi = pt(base), pt(hi)
    up = [LatticePoint(base.x, y) for y in range(hi.y, base.y, -1)]
    right = [LatticePoint(x, base.y) for x in range(base.x, hi.x + 1)]
    return up + right


def staircase_path(anchor, hi) -> list:
    """Staircase sites through ``anchor`` that lie weakly below-left of hi, top-left first."""
    a, hi = pt(anchor), pt(hi)
    k_lo, k_hi = staircase_span(a, hi)
    pts = []
    for k in range(k_lo, k_hi + 1):
        pts.append(LatticePoint(a.x + k, a.y - k))
        if k < k_hi:
            pts.append(LatticePoint(a.x + k, a.y - k - 1))
    return pts


# ---------------------------------------------------------------- midpoint crossing

def ball_probs(source, lo, hi, center, radii) -> list:
    """Q_{lo,hi}{path meets the l-infinity ball of radius k around center} for each k."""
    lo, hi, center = pt(lo), pt(hi), pt(center)
    for k in radii:
        if not (lo.x < center.x - k and center.x + k < hi.x and lo.y < center.y - k and center.y + k < hi.y):
            raise UsageError("ball must lie strictly inside the box")
    w = weights_on(source, lo, hi)
    full = _kernels.forward_dp(w)[-1, -1]
    cx, cy = center.x - lo.x, center.y - lo.y
    out = []
    for k in radii:
        fixed = np.full(w.shape, np.nan)
        fixed[cx - k:cx + k + 1, cy - k:cy + k + 1] = NEG_INF
        fixed[0, 0] = w[0, 0]
        avoid = _kernels.boundary_dp(w, fixed)[-1, -1]
        out.append(1.0 if avoid == NEG_INF else min(1.0, max(0.0, -math.expm1(avoid - full))))
    return out


def avoid_ball_prob(source, lo, hi, center, k: int) -> float:
    """Q_{lo,hi}{path meets the l-infinity ball of radius k around center}."""
    return ball_probs(source, lo, hi, center, [k])[0]


def midpoint_radii_probs(env: EnvironmentSpec, radii, N: int, rho: float | None = None) -> list:
    """Midpoint probabilities on [-v_N, v_N] for several radii.  A ball spanning the
    box in either coordinate meets every path."""
    if any(k < 0 for k in radii):
        raise DomainError("radius must be nonnegative")
    if rho is None:
        rho = env.boundary.rho if env.boundary.rho is not None else env.mu / 2
    m, n = characteristic_endpoint(ModelParams(env.mu, rho), N)
    inner = [k for k in radii if k < min(m, n)]
    vals = dict(zip(inner, ball_probs(env.plain(), (-m, -n), (m, n), (0, 0), inner))) if inner else {}
    return [vals.get(k, 1.0) for k in radii]


def midpoint_crossing_prob(env: EnvironmentSpec, k: int, N: int, rho: float | None = None) -> float:
    """Q_{-v_N, v_N}{path meets the l-infinity ball of radius k around the origin}."""
    return midpoint_radii_probs(env, [k], N, rho)[0]
