"""Reproducible random environments for the inverse-gamma polymer.

Nothing is stored: every weight is recomputed from (seed, site, channel, shape)
by the counter-based generator in ``_rng``.  Bulk weights depend on the seed and
``mu`` only, so environments that differ in their boundary share the bulk.

Boundary conventions (vertex form, used by the DP kernels):

* southwest, anchor v: the base v carries weight 1; a site v + k e1 (k >= 1)
  carries the weight of the horizontal edge entering it, Ga^-1(mu - rho); a site
  v + k e2 carries the vertical edge weight entering it, Ga^-1(rho).
* northeast, anchor c: the corner c carries weight 1; a site c - k e1 carries the
  weight of the horizontal edge leaving it, Ga^-1(mu - rho); c - k e2 the vertical
  edge leaving it, Ga^-1(rho).
* antidiagonal, anchor a: staircase sites s_k = a + (k, -k) and t_k = a + (k, -k-1).
  Edge t_k -> s_{k+1} is horizontal with underlying I_k ~ Ga^-1(mu - rho), edge
  t_k -> s_k vertical with J_k ~ Ga^-1(rho).  H_0 = 1 and H_{k+1} / H_k = I_k / J_k,
  so right of the anchor the factors are Ga^-1(mu - rho) and Ga(rho), left of it
  Ga(mu - rho) and Ga^-1(rho).  Bulk sites are those with (z - a).(1, 1) >= 1.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _rng
from .errors import DomainError, UsageError

KINDS = ("none", "southwest", "northeast", "antidiagonal")


class LatticePoint(NamedTuple):
    x: int
    y: int

    def __add__(self, other):
        return LatticePoint(self.x + other[0], self.y + other[1])

    def __sub__(self, other):
        return LatticePoint(self.x - other[0], self.y - other[1])

    def leq(self, other) -> bool:
        return self.x <= other[0] and self.y <= other[1]

    def l1(self) -> int:
        return abs(self.x) + abs(self.y)


E1 = LatticePoint(1, 0)
E2 = LatticePoint(0, 1)


def pt(p) -> LatticePoint:
    return p if isinstance(p, LatticePoint) else LatticePoint(int(p[0]), int(p[1]))


@dataclass(frozen=True)
class BoundarySpec:
    kind: str = "none"
    rho: float | None = None
    anchor: LatticePoint = LatticePoint(0, 0)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown boundary kind {self.kind!r}")
        if (self.rho is None) != (self.kind == "none"):
            raise UsageError("rho must be given exactly when the boundary kind is not 'none'")
        object.__setattr__(self, "anchor", pt(self.anchor))


@dataclass(frozen=True)
class EnvironmentSpec:
    mu: float
    seed: int
    boundary: BoundarySpec = field(default_factory=BoundarySpec)

    def __post_init__(self):
        if not self.mu > 0:
            raise DomainError(f"mu must be positive, got {self.mu}")
        _rng.split_seed(self.seed)
        rho = self.boundary.rho
        if rho is not None and not 0 < rho < self.mu:
            raise DomainError(f"need 0 < rho < mu, got rho={rho}, mu={self.mu}")

    @property
    def key(self) -> tuple[int, int]:
        return _rng.split_seed(self.seed)

    def with_boundary(self, kind: str, rho: float | None = None, anchor=(0, 0)) -> "EnvironmentSpec":
        return EnvironmentSpec(self.mu, self.seed, BoundarySpec(kind, rho, pt(anchor)))

    def plain(self) -> "EnvironmentSpec":
        return EnvironmentSpec(self.mu, self.seed)

    def to_dict(self) -> dict:
        b = self.boundary
        return {"mu": self.mu, "seed": self.seed,
                "boundary": {"kind": b.kind, "rho": b.rho, "anchor": [b.anchor.x, b.anchor.y]}}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "EnvironmentSpec":
        b = d.get("boundary") or {}
        bs = BoundarySpec(b.get("kind", "none"), b.get("rho"), pt(b.get("anchor", (0, 0))))
        return cls(float(d["mu"]), int(d["seed"]), bs)

    @classmethod
    def from_json(cls, text: str) -> "EnvironmentSpec":
        return cls.from_dict(json.loads(text))


@dataclass
class WeightField:
    """Explicit log vertex weights on the rectangle [lo, lo + shape - 1]."""
    lo: LatticePoint
    logw: np.ndarray

    def __post_init__(self):
        self.lo = pt(self.lo)
        self.logw = np.asarray(self.logw, dtype=np.float64)

    @property
    def hi(self) -> LatticePoint:
        return LatticePoint(self.lo.x + self.logw.shape[0] - 1, self.lo.y + self.logw.shape[1] - 1)


# ---------------------------------------------------------------- raw channels

def _log_gamma_points(env: EnvironmentSpec, channel: int, shape: float, xs, ys) -> np.ndarray:
    xs = np.ascontiguousarray(xs, dtype=np.int64)
    ys = np.ascontiguousarray(ys, dtype=np.int64)
    out = np.empty(xs.shape[0])
    k0, k1 = env.key
    _rng.fill_log_gamma_points(k0, k1, channel, float(shape), _rng.shape_tag(shape), xs, ys, out)
    return out


def bulk_log_weights(env: EnvironmentSpec, lo, hi) -> np.ndarray:
    """log Y_z on the rectangle [lo, hi] from the bulk channel (boundary ignored)."""
    lo, hi = pt(lo), pt(hi)
    if not lo.leq(hi):
        raise DomainError(f"empty rectangle {lo}..{hi}")
    out = np.empty((hi.x - lo.x + 1, hi.y - lo.y + 1))
    k0, k1 = env.key
    _rng.fill_log_gamma_rect(k0, k1, _rng.BULK, float(env.mu), _rng.shape_tag(env.mu), lo.x, lo.y, out)
    np.negative(out, out=out)
    return out


def _on_boundary(env: EnvironmentSpec, z: LatticePoint) -> bool:
    b = env.boundary
    a = b.anchor
    if b.kind == "southwest":
        return a.leq(z) and (z.x == a.x or z.y == a.y)
    if b.kind == "northeast":
        return z.leq(a) and (z.x == a.x or z.y == a.y)
    if b.kind == "antidiagonal":
        return (z.x - a.x) + (z.y - a.y) <= 0
    return False


def bulk_weight(env: EnvironmentSpec, z) -> float:
    z = pt(z)
    if _on_boundary(env, z):
        raise UsageError(f"{tuple(z)} is a boundary site of this environment")
    return float(np.exp(bulk_log_weights(env, z, z)[0, 0]))


def _edge_kind(edge):
    a, b = pt(edge[0]), pt(edge[1])
    d = b - a
    if d == E1:
        return a, b, "h"
    if d == E2:
        return a, b, "v"
    raise UsageError(f"edge {edge} is not an up-right unit edge")


def boundary_log_weight(env: EnvironmentSpec, edge) -> float:
    """log of the boundary weight of an up-right edge (tail, head)."""
    tail, head, d = _edge_kind(edge)
    b = env.boundary
    a, mu, rho = b.anchor, env.mu, b.rho
    if b.kind == "southwest":
        if d == "h" and head.y == a.y and head.x > a.x:
            return -_log_gamma_points(env, _rng.SW_H, mu - rho, [head.x], [head.y])[0]
        if d == "v" and head.x == a.x and head.y > a.y:
            return -_log_gamma_points(env, _rng.SW_V, rho, [head.x], [head.y])[0]
    elif b.kind == "northeast":
        if d == "h" and tail.y == a.y and head.x <= a.x:
            return -_log_gamma_points(env, _rng.NE_H, mu - rho, [tail.x], [tail.y])[0]
        if d == "v" and tail.x == a.x and head.y <= a.y:
            return -_log_gamma_points(env, _rng.NE_V, rho, [tail.x], [tail.y])[0]
    elif b.kind == "antidiagonal":
        r = tail - a
        if r.x + r.y == -1:
            k = r.x
            if d == "h":
                li = -_log_gamma_points(env, _rng.DIA_H, mu - rho, [tail.x], [tail.y])[0]
                return li if k >= 0 else -li
            lj = -_log_gamma_points(env, _rng.DIA_V, rho, [tail.x], [tail.y])[0]
            return -lj if k >= 0 else lj
    raise UsageError(f"edge {tuple(tail)}->{tuple(head)} is not on the {b.kind} boundary")


def boundary_weight(env: EnvironmentSpec, edge) -> float:
    return float(np.exp(boundary_log_weight(env, edge)))


def uniform_theta(env: EnvironmentSpec, z, replica: int = 0) -> float:
    z = pt(z)
    k0, k1 = env.key
    return float(_rng.theta_at(k0, k1, z.x, z.y, replica))


def theta_grid(env: EnvironmentSpec, lo, hi, replica: int = 0) -> np.ndarray:
    lo, hi = pt(lo), pt(hi)
    out = np.empty((hi.x - lo.x + 1, hi.y - lo.y + 1))
    k0, k1 = env.key
    _rng.fill_theta_rect(k0, k1, replica, lo.x, lo.y, out)
    return out


# ---------------------------------------------------------------- streams

class Stream:
    """Sequential view of the counter generator: draw i uses counter position i."""

    _CHANNEL = 0xFE

    def __init__(self, seed: int, position: int = 0):
        self.k0, self.k1 = _rng.split_seed(seed)
        self.position = position

    def _next(self):
        p = self.position
        self.position += 1
        return p & 0xFFFFFFFF, p >> 32

    def random(self) -> float:
        x, y = self._next()
        return float(_rng.theta_at(self.k0, self.k1, x, y, self._CHANNEL))

    def log_gamma(self, shape: float) -> float:
        x, y = self._next()
        return float(_rng.log_gamma_at(self.k0, self.k1, x, y, self._CHANNEL, float(shape),
                                       _rng.shape_tag(shape)))


def sample_gamma(shape: float, stream: Stream, inverse: bool = False) -> float:
    if not shape > 0:
        raise DomainError(f"gamma shape must be positive, got {shape}")
    lg = stream.log_gamma(shape)
    return float(np.exp(-lg if inverse else lg))


# ---------------------------------------------------------------- vertex-form weights

def site_log_weights(env: EnvironmentSpec, lo, hi) -> np.ndarray:
    """Effective log vertex weights on [lo, hi] under the environment's boundary convention."""
    lo, hi = pt(lo), pt(hi)
    w = bulk_log_weights(env, lo, hi)
    b = env.boundary
    a = b.anchor
    if b.kind in ("none", "antidiagonal"):
        if b.kind == "antidiagonal":
            xs = np.arange(lo.x, hi.x + 1)[:, None]
            ys = np.arange(lo.y, hi.y + 1)[None, :]
            if np.any((xs - a.x) + (ys - a.y) <= 0):
                raise UsageError("antidiagonal environments have no vertex form below the staircase")
        return w
    mu, rho = env.mu, b.rho
    if b.kind == "southwest":
        if not a.leq(lo):
            raise UsageError(f"rectangle {tuple(lo)}..{tuple(hi)} extends below/left of the base {tuple(a)}")
        if lo.y == a.y:
            xs = np.arange(max(lo.x, a.x + 1), hi.x + 1)
            if xs.size:
                w[xs - lo.x, 0] = -_log_gamma_points(env, _rng.SW_H, mu - rho, xs, np.full_like(xs, a.y))
        if lo.x == a.x:
            ys = np.arange(max(lo.y, a.y + 1), hi.y + 1)
            if ys.size:
                w[0, ys - lo.y] = -_log_gamma_points(env, _rng.SW_V, rho, np.full_like(ys, a.x), ys)
        if lo == a:
            w[0, 0] = 0.0
        return w
    # northeast
    if not hi.leq(a):
        raise UsageError(f"rectangle {tuple(lo)}..{tuple(hi)} extends above/right of the corner {tuple(a)}")
    if hi.y == a.y:
        xs = np.arange(lo.x, min(hi.x, a.x - 1) + 1)
        if xs.size:
            w[xs - lo.x, -1] = -_log_gamma_points(env, _rng.NE_H, mu - rho, xs, np.full_like(xs, a.y))
    if hi.x == a.x:
        ys = np.arange(lo.y, min(hi.y, a.y - 1) + 1)
        if ys.size:
            w[-1, ys - lo.y] = -_log_gamma_points(env, _rng.NE_V, rho, np.full_like(ys, a.x), ys)
    if hi == a:
        w[-1, -1] = 0.0
    return w


def staircase_log_h(env: EnvironmentSpec, k_lo: int, k_hi: int) -> np.ndarray:
    """log H_k for k = k_lo..k_hi along the staircase of an antidiagonal environment."""
    b = env.boundary
    if b.kind != "antidiagonal":
        raise UsageError("staircase weights need an antidiagonal boundary")
    if k_lo > k_hi:
        raise UsageError("empty staircase window")
    a, mu, rho = b.anchor, env.mu, b.rho
    j0, j1 = min(k_lo, 0), max(k_hi, 0)
    js = np.arange(j0, j1)  # edge indices j: t_j = a + (j, -j-1)
    tx, ty = a.x + js, a.y - js - 1
    log_i = -_log_gamma_points(env, _rng.DIA_H, mu - rho, tx, ty)
    log_j = -_log_gamma_points(env, _rng.DIA_V, rho, tx, ty)
    step = log_i - log_j  # log H_{j+1} - log H_j
    ks = np.arange(j0, j1 + 1)
    cum = np.concatenate([[0.0], np.cumsum(step)])
    cum -= cum[-j0]  # H_0 = 1
    out = cum[(ks >= k_lo) & (ks <= k_hi)]
    return out


def staircase_log_j(env: EnvironmentSpec, k_lo: int, k_hi: int) -> np.ndarray:
    """log J_k (vertical increments s_k over t_k) for k = k_lo..k_hi."""
    a, rho = env.boundary.anchor, env.boundary.rho
    ks = np.arange(k_lo, k_hi + 1)
    return -_log_gamma_points(env, _rng.DIA_V, rho, a.x + ks, a.y - ks - 1)
