"""Exhaustive path enumeration on small boxes, used as an oracle for the DP code."""
from __future__ import annotations

import itertools
import math

import numpy as np


def paths(nx: int, ny: int):
    """All up-right vertex lists from (0,0) to (nx-1, ny-1) as lists of offsets."""
    m, n = nx - 1, ny - 1
    for ups in itertools.combinations(range(m + n), n):
        ups = set(ups)
        x = y = 0
        verts = [(0, 0)]
        for s in range(m + n):
            if s in ups:
                y += 1
            else:
                x += 1
            verts.append((x, y))
        yield verts


def path_exit(verts) -> int:
    if len(verts) < 2:
        return 0
    dx = verts[1][0] - verts[0][0]
    run = 1
    while run + 1 < len(verts) and (verts[run + 1][0] - verts[run][0]) == dx:
        run += 1
    return run if dx == 1 else -run


def _lse(vals):
    if not vals:
        return -math.inf
    m = max(vals)
    return m + math.log(sum(math.exp(v - m) for v in vals))


def path_log_weights(logw: np.ndarray):
    nx, ny = logw.shape
    for verts in paths(nx, ny):
        yield verts, float(sum(logw[p] for p in verts))


def log_partition(logw: np.ndarray) -> float:
    return _lse([lw for _, lw in path_log_weights(logw)])


def restricted_log_partition(logw: np.ndarray, a: int, b: int) -> float:
    return _lse([lw for v, lw in path_log_weights(logw) if a <= path_exit(v) <= b])


def exit_prob(logw: np.ndarray, a: int, b: int) -> float:
    r = restricted_log_partition(logw, a, b)
    return 0.0 if r == -math.inf else math.exp(r - log_partition(logw))


def ball_prob(logw: np.ndarray, center, k: int) -> float:
    cx, cy = center
    hit = []
    for verts, lw in path_log_weights(logw):
        if any(abs(x - cx) <= k and abs(y - cy) <= k for x, y in verts):
            hit.append(lw)
    r = _lse(hit)
    return 0.0 if r == -math.inf else math.exp(r - log_partition(logw))


def path_probabilities(logw: np.ndarray) -> dict:
    items = list(path_log_weights(logw))
    z = _lse([lw for _, lw in items])
    return {tuple(v): math.exp(lw - z) for v, lw in items}
