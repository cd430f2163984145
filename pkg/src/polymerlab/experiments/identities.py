"""Exact identities and sample-wise inequalities checked on small boxes.

Each check returns (worst, failures): ``worst`` is the largest discrepancy (for an
inequality, the largest violation, or 0), ``failures`` lists (location, value)
pairs above the tolerance.
"""
from __future__ import annotations

import itertools
import math
import time

import numpy as np

from .. import _kernels
from ..environment import EnvironmentSpec, LatticePoint, bulk_log_weights, site_log_weights
from ..polymer_core import (
    _exit_terms,
    axes_path,
    nested_boundary,
    staircase_path,
    staircase_polymer,
)
from ..semi_infinite import (
    backward_measure_check,
    busemann_field,
    coalescence_point,
    dual_separates,
    dual_tree,
    forward_tree,
    transitions,
    transitions_via_weights,
    tree_crossings,
)
from .report import ExperimentReport, GridEstimate
from .stats import Estimate

SIDE = 6          # boxes are SIDE x SIDE: offsets 0..SIDE-1
THETA_REPLICAS = 8


def _close(a, b) -> float:
    """Difference scaled for log-domain values of any size."""
    if a == b:
        return 0.0
    return abs(a - b) / max(1.0, abs(a), abs(b))


def _collect(items, tol):
    worst = 0.0
    bad = []
    for loc, d in items:
        worst = max(worst, d)
        if d > tol:
            bad.append((loc, d))
    return worst, bad


def _plain(mu, seed):
    return EnvironmentSpec(mu, seed)


# ---------------------------------------------------------------- checks

def check_recursion(mu, rho, seed, tol):
    items = []
    for env in (_plain(mu, seed), _plain(mu, seed).with_boundary("southwest", rho, (0, 0))):
        w = site_log_weights(env, (0, 0), (SIDE - 1, SIDE - 1))
        lz = _kernels.forward_dp(w)
        for i in range(1, SIDE):
            for j in range(1, SIDE):
                rhs = w[i, j] + _kernels.logaddexp(lz[i - 1, j], lz[i, j - 1])
                items.append(((env.boundary.kind, i, j), _close(lz[i, j], rhs)))
    return _collect(items, tol)


def check_telescoping(mu, rho, seed, tol):
    items = []
    w = bulk_log_weights(_plain(mu, seed), (0, 0), (SIDE - 1, SIDE - 1))
    full = _kernels.forward_dp(w)
    span = 2 * SIDE
    whole = _kernels.exit_window_dp(w, -span, span)
    for i in range(SIDE):
        for j in range(SIDE):
            terms = _exit_terms(np.ascontiguousarray(w[: i + 1, : j + 1]))
            total = _kernels.logsumexp_1d(np.array(list(terms.values())))
            items.append((("terms", i, j), _close(total, full[i, j])))
            items.append((("window", i, j), _close(whole[i, j], full[i, j])))
    return _collect(items, tol)


def check_mono_ratio(mu, rho, seed, tol):
    """Z_{x,z}/Z_{x,z-e1} <= Z_{y,z}/Z_{y,z-e1} and the reverse for e2, x weakly up-left of y."""
    z = (SIDE - 1, SIDE - 1)
    w = bulk_log_weights(_plain(mu, seed), (0, 0), z)
    bz = _kernels.backward_dp(w)
    b1 = _kernels.backward_dp(np.ascontiguousarray(w[:-1, :]))
    b2 = _kernels.backward_dp(np.ascontiguousarray(w[:, :-1]))
    sites = [(i, j) for i in range(SIDE - 1) for j in range(SIDE - 1)]
    items = []
    for x, y in itertools.product(sites, sites):
        if not (x[0] <= y[0] and x[1] >= y[1]):
            continue
        r1x, r1y = bz[x] - b1[x], bz[y] - b1[y]
        r2x, r2y = bz[x] - b2[x], bz[y] - b2[y]
        items.append(((x, y, "e1"), max(0.0, r1x - r1y) / max(1.0, abs(r1y))))
        items.append(((x, y, "e2"), max(0.0, r2y - r2x) / max(1.0, abs(r2y))))
    return _collect(items, tol)


def _tau_at_least(w, k):
    return _kernels.exit_window_dp(w, k, 4 * SIDE)


def check_two_exit(mu, rho, seed, tol):
    """Ratios of Z_{0,.}(tau >= k) across an edge are monotone in k."""
    w = bulk_log_weights(_plain(mu, seed), (0, 0), (SIDE - 1, SIDE - 1))
    tabs = {k: _tau_at_least(w, k) for k in range(1, SIDE)}
    items = []
    for l, k in itertools.combinations(range(1, SIDE), 2):
        A, B = tabs[l], tabs[k]
        for i in range(1, SIDE):
            for j in range(SIDE):
                vals = (A[i, j], A[i - 1, j], B[i, j], B[i - 1, j])
                if all(math.isfinite(v) for v in vals):
                    d = (A[i, j] - A[i - 1, j]) - (B[i, j] - B[i - 1, j])
                    items.append(((l, k, i, j, "e1"), max(0.0, d) / max(1.0, abs(B[i, j] - B[i - 1, j]))))
        for i in range(SIDE):
            for j in range(1, SIDE):
                vals = (A[i, j], A[i, j - 1], B[i, j], B[i, j - 1])
                if all(math.isfinite(v) for v in vals):
                    d = (B[i, j] - B[i, j - 1]) - (A[i, j] - A[i, j - 1])
                    items.append(((l, k, i, j, "e2"), max(0.0, d) / max(1.0, abs(A[i, j] - A[i, j - 1]))))
    return _collect(items, tol)


def check_polymono(mu, rho, seed, tol):
    """Q_{0,x}{tau >= k} <= Q_{0,x'}{tau >= k} for x' = x + l e1 - m e2."""
    w = bulk_log_weights(_plain(mu, seed), (0, 0), (SIDE - 1, SIDE - 1))
    full = _kernels.forward_dp(w)
    items = []
    sites = [(i, j) for i in range(SIDE) for j in range(SIDE)]
    for k in range(1, SIDE):
        q = np.exp(_tau_at_least(w, k) - full)
        for x, y in itertools.product(sites, sites):
            if y[0] >= x[0] and y[1] <= x[1]:
                items.append(((k, x, y), max(0.0, q[x] - q[y])))
    return _collect(items, tol)


def _nested_setup(mu, rho, seed):
    u = LatticePoint(-2, -4)
    v = LatticePoint(4, 3)
    outer = _plain(mu, seed).with_boundary("antidiagonal", rho, u)
    return u, v, outer


def check_ratio_agrees(mu, rho, seed, tol):
    """Nested tables equal outer tables divided by the outer value at the root."""
    u, v, outer = _nested_setup(mu, rho, seed)
    ot = staircase_polymer(outer, v).table()
    items = []
    for root, path in (((0, 0), axes_path((0, 0), v)), ((1, 1), staircase_path((1, 1), v))):
        nb = nested_boundary(outer, u, path, root=root)
        t = nb.polymer(outer, v).table()
        base = ot[root]
        for i in range(t.lo.x, v.x + 1):
            for j in range(t.lo.y, v.y + 1):
                val = t[(i, j)]
                if math.isfinite(val):
                    items.append(((root, i, j), _close(val, ot[(i, j)] - base)))
    return _collect(items, tol)


def check_nestedpoly(mu, rho, seed, tol):
    """Edge-passage probabilities agree between the outer and the nested polymer."""
    u, v, outer = _nested_setup(mu, rho, seed)
    outer_bp = staircase_polymer(outer, v)
    ot = outer_bp.table()
    root = LatticePoint(0, 0)
    path = axes_path(root, v)
    inner = nested_boundary(outer, u, path, root=root).polymer(outer, v)
    it = inner.table()
    items = []
    inside = lambda p: p.x > root.x and p.y > root.y and p.x <= v.x and p.y <= v.y
    for w in [LatticePoint(i, j) for i in range(1, v.x + 1) for j in range(1, v.y + 1)]:
        back = _kernels.backward_dp(bulk_log_weights(outer, (0, 0), w))
        for z in path:
            for e in ((1, 0), (0, 1)):
                h = z + e
                if not inside(h) or not h.leq(w):
                    continue
                tail = back[h.x, h.y]
                po = math.exp(ot[z] + tail - ot[w])
                pi = math.exp(it[z] + tail - it[w])
                items.append(((tuple(w), tuple(z), e), abs(po - pi)))
    return _collect(items, tol)


def check_relatetau(mu, rho, seed, tol):
    u, v, outer = _nested_setup(mu, rho, seed)
    items = []
    for m, n in ((1, 1), (2, 1), (2, 3), (3, 2)):
        bp0 = nested_boundary(outer, u, axes_path((0, 0), v), root=(0, 0)).polymer(outer, v)
        bp1 = nested_boundary(outer, u, axes_path((m, -n), v), root=(m, -n)).polymer(outer, v)
        for w in [(i, j) for i in range(m + 1, v.x + 1) for j in range(1, v.y + 1)]:
            items.append((((m, n), w), abs(bp0.exit_prob(w, None, m) - bp1.exit_prob(w, None, -n - 1))))
    return _collect(items, tol)


def check_dia_vs_sw(mu, rho, seed, tol):
    u = LatticePoint(-2, -3)
    v = LatticePoint(5, 4)
    outer = _plain(mu, seed).with_boundary("antidiagonal", rho, u)
    bp0 = nested_boundary(outer, u, axes_path((0, 0), v), root=(0, 0)).polymer(outer, v)
    items = []
    for r in (1, 2):
        bpd = nested_boundary(outer, u, staircase_path((r, r), v), root=(r, r)).polymer(outer, v)
        for w in [(i, j) for i in range(r + 1, v.x + 1) for j in range(r + 1, v.y + 1)]:
            items.append(((r, w), abs(bp0.exit_prob(w, 2 * r, None) - bpd.exit_prob(w, r, None))))
    return _collect(items, tol)


def check_stat_iid(mu, rho, seed, tol):
    items = []
    for v in ((1, 1), (2, 2), (2, 3)):
        items.append((v, backward_measure_check(_plain(mu, seed), rho, (0, 0), v)))
    return _collect(items, tol)


def _field(mu, rho, seed):
    hi = LatticePoint(SIDE - 1, SIDE - 1)
    env = _plain(mu, seed).with_boundary("northeast", rho, hi + (1, 1))
    return env, busemann_field(env, rho, ((0, 0), hi))


def check_busemann(mu, rho, seed, tol):
    """Recovery 1/Y = e^{-B(z,z+e1)} + e^{-B(z,z+e2)}, the cocycle along paths, and the two
    transition formulas."""
    env, f = _field(mu, rho, seed)
    y = bulk_log_weights(env, (0, 0), (SIDE - 1, SIDE - 1))
    items = []
    for i in range(SIDE):
        for j in range(SIDE):
            rec = _kernels.logaddexp(-f.B((i, j), (i + 1, j)), -f.B((i, j), (i, j + 1)))
            items.append((("recovery", i, j), _close(rec, -y[i, j])))
    li, lj = f.increments()
    for ups in itertools.combinations(range(2 * SIDE - 2), SIDE - 1):
        x = LatticePoint(0, 0)
        acc = 0.0
        for s in range(2 * SIDE - 2):
            if s in ups:
                x = x + (0, 1)
                acc += lj[x]
            else:
                x = x + (1, 0)
                acc += li[x]
        items.append((("cocycle", ups), _close(acc, f.B((0, 0), x))))
    p = transitions(f, env).p_e1
    q = transitions_via_weights(f, env)
    items.append((("routes",), float(np.abs(p - q).max())))
    return _collect(items, tol)


def check_dual(mu, rho, seed, tol):
    """No dual edge crosses a forward edge, and non-coalescence inside the box is
    equivalent to a dual path separating the starts."""
    env, f = _field(mu, rho, seed)
    trans = transitions(f, env)
    items = []
    for rep in range(THETA_REPLICAS):
        tree = forward_tree(trans, env, rep)
        items.append((("crossing", rep), float(tree_crossings(tree, dual_tree(tree)))))
        for k in range(1, SIDE):
            outside = coalescence_point(tree, (k, 0), (0, k)) is None
            items.append((("coalescence", rep, k), float(outside != dual_separates(tree, k))))
    return _collect(items, tol)


CHECKS = {
    "recursion": check_recursion,
    "telescoping": check_telescoping,
    "mono_ratio": check_mono_ratio,
    "two_exit_inequality": check_two_exit,
    "polymono": check_polymono,
    "ratio_agrees": check_ratio_agrees,
    "nestedpoly": check_nestedpoly,
    "relatetau": check_relatetau,
    "dia_vs_sw": check_dia_vs_sw,
    "stat_iid": check_stat_iid,
    "busemann": check_busemann,
    "dual": check_dual,
}


def identity_suite(seed_count: int = 50, mu: float = 2.0, rho: float | None = None, tol: float = 1e-9,
                   seed: int = 0, checks=None, timed: bool = False) -> ExperimentReport:
    """Every identity for seeds seed .. seed + seed_count - 1; failures list seed and location."""
    t0 = time.perf_counter()
    rho = mu / 2 if rho is None else rho
    names = list(CHECKS) if checks is None else list(checks)
    rep = ExperimentReport("verify", {"mu": mu, "rho": rho, "seed_count": seed_count, "tolerance": tol,
                                      "box": [SIDE, SIDE]}, {"identity": names}, seed)
    results = {}
    failures = []
    for idx, name in enumerate(names):
        fn = CHECKS[name]
        worst = 0.0
        failed_seeds = 0
        for s in range(seed, seed + seed_count):
            w, bad = fn(mu, rho, s, tol)
            worst = max(worst, w)
            if bad:
                failed_seeds += 1
                for loc, d in bad[:5]:
                    failures.append({"identity": name, "seed": s, "location": repr(loc), "value": d})
        results[name] = {"failed_seeds": failed_seeds, "worst": worst}
        rep.estimates.append(GridEstimate(name, float(idx), Estimate(failed_seeds / seed_count, 0.0, seed_count),
                                          (seed, seed + seed_count - 1)))
    rep.series["results"] = results
    rep.series["failures"] = failures
    rep.series["total_failures"] = sum(r["failed_seeds"] for r in results.values())
    if timed:
        rep.elapsed_s = round(time.perf_counter() - t0, 3)
    return rep
