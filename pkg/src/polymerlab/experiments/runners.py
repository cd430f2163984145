"""Named Monte Carlo experiments.

Every environment replica is keyed by (seed, replica index) only, so results do
not depend on scheduling.  Per-environment quantities are exact (dynamic
programming or exact mass transport) except the coalescence probabilities, which
are averaged over theta replicas of the shared-uniform tree.
"""
from __future__ import annotations

import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np
from scipy import stats as _sps

from .. import _kernels, _walks
from ..environment import EnvironmentSpec, LatticePoint, site_log_weights
from ..errors import DomainError
from ..polymer_core import midpoint_radii_probs
from ..special_functions import (
    ModelParams,
    characteristic_endpoint,
    digamma,
    floor_scaled,
    trigamma,
)
from ..semi_infinite import busemann_field
from .report import ExperimentReport, GridEstimate, NamedFit
from .stats import estimate, fit_power_law, fit_stretched_exponent

DEFAULTS = {
    "mu": 2.0,
    "rho": 1.0,
    "N": 2000,
    "env_replicas": 1000,
    "theta_replicas": 100,
    "seed": 0,
    "delta": [0.05, 0.1, 0.2, 0.4],
    "r": [0.8, 1.2, 1.8, 2.6],
}
SCALE = 2.0 / 3.0
TAIL_THRESHOLDS = (0.5, 0.1, 0.01)


def replica_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1, np.uint64)[0])


def worker_count() -> int:
    cap = os.environ.get("GPL_THREADS")
    n = os.cpu_count() or 1
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            pass
    return n


def _progress(label: str, done: int, total: int, quiet: bool) -> None:
    if quiet:
        return
    step = max(1, total // 20)
    if done == total or done % step == 0:
        print(f"[{label}] {done}/{total}", file=sys.stderr, flush=True)


def map_replicas(fn, seed: int, count: int, label: str = "", quiet: bool = True) -> list:
    """fn(env_seed) for each replica index, in index order."""
    seeds = [replica_seed(seed, i) for i in range(count)]
    workers = worker_count()
    out = []
    if workers <= 1 or count < 2:
        for i, s in enumerate(seeds):
            out.append(fn(s))
            _progress(label, i + 1, count, quiet)
        return out
    with ProcessPoolExecutor(max_workers=workers) as pool:
        for i, res in enumerate(pool.map(fn, seeds, chunksize=max(1, count // (8 * workers)))):
            out.append(res)
            _progress(label, i + 1, count, quiet)
    return out


def _scaled(values, N: int) -> list:
    return [floor_scaled(v, N, SCALE) for v in values]


def _grid_warnings(name: str, values, N: int, v_min: int) -> list:
    msgs = []
    for x in values:
        k = floor_scaled(x, N, SCALE)
        if x < N ** -SCALE:
            msgs.append(f"{name}={x}: below N^(-2/3), starts coincide")
    return msgs


def _inside_grid(name: str, values, N: int, v_min: int, report) -> list:
    """Drop grid values whose starting separation leaves the box."""
    keep = [x for x in values if floor_scaled(x, N, SCALE) <= v_min]
    for x in values:
        if x not in keep:
            report.warnings.append(f"{name}={x}: dropped, starts outside the box")
    return keep


def _params(mu, rho, N, **extra) -> dict:
    ModelParams(mu, rho)
    if N < 1:
        raise DomainError("N must be a positive integer")
    return {"mu": mu, "rho": rho, "N": N, **extra}


def _grid_rows(report, branch, xs, columns, n) -> None:
    for x, col in zip(xs, columns):
        report.estimates.append(GridEstimate(branch, float(x), estimate(col), (0, n - 1)))


def _try_fit(report, name, fitter, pts, note="") -> None:
    try:
        report.fits.append(NamedFit(name, fitter(pts), note))
    except DomainError as exc:
        report.fits.append(NamedFit(name, None, f"not fitted: {exc}"))


def _finish(report, t0, timed) -> ExperimentReport:
    if timed:
        report.elapsed_s = round(time.perf_counter() - t0, 3)
    return report


# ---------------------------------------------------------------- per-environment work

def ne_walk(mu: float, rho: float, N: int, env_seed: int):
    """Transition table on [0, v_N] from a northeast stationary field at v_N + (1, 1)."""
    m, n = characteristic_endpoint(ModelParams(mu, rho), N)
    env = EnvironmentSpec(mu, env_seed).with_boundary("northeast", rho, (m + 1, n + 1))
    field = busemann_field(env, rho, ((0, 0), (m, n)))
    return env, _walks.transitions_from_g(field.g)


def coalescence_env(mu, rho, N, ks, theta_replicas, env_seed) -> np.ndarray:
    """Fraction of theta replicas in which the paths from (k, 0) and (0, k) meet in [0, v_N]."""
    env, p = ne_walk(mu, rho, N, env_seed)
    k0, k1 = env.key
    out = np.empty(len(ks))
    for idx, k in enumerate(ks):
        met, _ = _walks.pair_counts(p, k0, k1, 0, 0, 0, k, k, 0, 0, theta_replicas)
        out[idx] = met / theta_replicas
    return out


def exit_tail_env(mu, rho, N, r_ks, d_ks, env_seed):
    """(Q_{0,c}{|tau| > K} for K in r_ks, max over the outer ring of Q_{0,x}{|tau| <= K} for K in d_ks)
    with c = v_N + (1, 1) in the southwest stationary polymer based at the origin."""
    m, n = characteristic_endpoint(ModelParams(mu, rho), N)
    c = LatticePoint(m + 1, n + 1)
    env = EnvironmentSpec(mu, env_seed).with_boundary("southwest", rho, (0, 0))
    w = site_log_weights(env, (0, 0), c)
    full = _kernels.forward_dp(w)
    span = c.x + c.y
    tails = np.empty(len(r_ks))
    for idx, K in enumerate(r_ks):
        pos = _kernels.exit_window_dp(w, K + 1, span)[-1, -1] if K + 1 <= span else -math.inf
        neg = _kernels.exit_window_dp(w, -span, -K - 1)[-1, -1] if K + 1 <= span else -math.inf
        both = _kernels.logaddexp(pos, neg)
        tails[idx] = 0.0 if both == -math.inf else min(1.0, math.exp(both - full[-1, -1]))
    small = np.empty(len(d_ks))
    for idx, K in enumerate(d_ks):
        win = _kernels.exit_window_dp(w, -K, K)
        ring = np.concatenate([win[:, -1] - full[:, -1], win[-1, :-1] - full[-1, :-1]])
        small[idx] = min(1.0, math.exp(float(ring.max())))
    return tails, small


def tv_env(mu, rho, N, ks, exact_cutoff, env_seed):
    """Per start separation: (d_TV of the two hitting laws, exact P(chi_a != chi_b) + dropped mass)."""
    _, p = ne_walk(mu, rho, N, env_seed)
    tv = np.empty(len(ks))
    bound = np.full(len(ks), np.nan)
    for idx, k in enumerate(ks):
        if k == 0:
            tv[idx] = 0.0
            bound[idx] = 0.0
            continue
        ta, ra = _walks.hitting_mass(p, k, 0)
        tb, rb = _walks.hitting_mass(p, 0, k)
        tv[idx] = 0.5 * (np.abs(ta - tb).sum() + np.abs(ra - rb).sum())
        if exact_cutoff is not None:
            _, differ, dropped = _walks.pair_chain(p, 0, k, k, 0, exact_cutoff)
            bound[idx] = differ + dropped
    return tv, bound


def transversal_env(mu, rho, N, ks, env_seed) -> list:
    env = EnvironmentSpec(mu, env_seed)
    return midpoint_radii_probs(env, ks, N, rho)


# ---------------------------------------------------------------- experiments

def run_coalescence_slow(mu=2.0, rho=1.0, N=2000, delta_grid=DEFAULTS["delta"], env_replicas=1000,
                         theta_replicas=100, seed=0, quiet=True, timed=False) -> ExperimentReport:
    t0 = time.perf_counter()
    params = _params(mu, rho, N, env_replicas=env_replicas, theta_replicas=theta_replicas,
                     coupling="shared-uniform tree")
    m, n = characteristic_endpoint(ModelParams(mu, rho), N)
    rep = ExperimentReport("coalesce-slow", params, {}, seed)
    rep.warnings += _grid_warnings("delta", delta_grid, N, min(m, n))
    delta_grid = _inside_grid("delta", delta_grid, N, min(m, n), rep)
    ks = _scaled(delta_grid, N)
    rep.grid = {"delta": list(delta_grid), "k": ks}
    fn = partial(coalescence_env, mu, rho, N, ks, theta_replicas)
    met = np.array(map_replicas(fn, seed, env_replicas, "coalesce-slow", quiet))
    outside = 1.0 - met
    _grid_rows(rep, "delta", delta_grid, outside.T, env_replicas)
    pts = [(d, e.estimate.mean) for d, e in zip(delta_grid, rep.estimates)]
    _try_fit(rep, "log E[H(outside)] vs log delta", fit_power_law, pts)
    return _finish(rep, t0, timed)


def run_coalescence_fast(mu=2.0, rho=1.0, N=2000, r_grid=DEFAULTS["r"], env_replicas=1000,
                         theta_replicas=100, seed=0, thresholds=TAIL_THRESHOLDS, quiet=True,
                         timed=False) -> ExperimentReport:
    t0 = time.perf_counter()
    params = _params(mu, rho, N, env_replicas=env_replicas, theta_replicas=theta_replicas,
                     coupling="shared-uniform tree", thresholds=list(thresholds))
    m, n = characteristic_endpoint(ModelParams(mu, rho), N)
    rep = ExperimentReport("coalesce-fast", params, {}, seed)
    rep.warnings += _grid_warnings("r", r_grid, N, min(m, n))
    r_grid = _inside_grid("r", r_grid, N, min(m, n), rep)
    ks = _scaled(r_grid, N)
    rep.grid = {"r": list(r_grid), "k": ks}
    fn = partial(coalescence_env, mu, rho, N, ks, theta_replicas)
    met = np.array(map_replicas(fn, seed, env_replicas, "coalesce-fast", quiet))
    _grid_rows(rep, "r", r_grid, met.T, env_replicas)
    pts = [(r, e.estimate.mean) for r, e in zip(r_grid, rep.estimates)]
    _try_fit(rep, "log(-log E[H(inside)]) vs log r", fit_stretched_exponent, pts)
    rep.series["quenched_tail"] = {
        str(t): [float(np.mean(met[:, i] >= t)) for i in range(len(ks))] for t in thresholds
    }
    return _finish(rep, t0, timed)


def run_exit_tail(mu=2.0, rho=1.0, N=2000, r_grid=DEFAULTS["r"], delta_grid=DEFAULTS["delta"],
                  env_replicas=1000, seed=0, quiet=True, timed=False) -> ExperimentReport:
    t0 = time.perf_counter()
    params = _params(mu, rho, N, env_replicas=env_replicas)
    r_ks, d_ks = _scaled(r_grid, N), _scaled(delta_grid, N)
    rep = ExperimentReport("exit-tail", params,
                           {"r": list(r_grid), "r_k": r_ks, "delta": list(delta_grid), "delta_k": d_ks}, seed)
    fn = partial(exit_tail_env, mu, rho, N, r_ks, d_ks)
    res = map_replicas(fn, seed, env_replicas, "exit-tail", quiet)
    tails = np.array([t for t, _ in res])
    small = np.array([s for _, s in res])
    _grid_rows(rep, "r", r_grid, tails.T, env_replicas)
    _grid_rows(rep, "delta", delta_grid, small.T, env_replicas)
    _try_fit(rep, "log(-log E[Q(|tau| > rN^2/3)]) vs log r", fit_stretched_exponent,
             [(g.x, g.estimate.mean) for g in rep.branch("r")])
    _try_fit(rep, "log E[max Q(|tau| <= deltaN^2/3)] vs log delta", fit_power_law,
             [(g.x, g.estimate.mean) for g in rep.branch("delta")])
    return _finish(rep, t0, timed)


def run_tv(mu=2.0, rho=1.0, N=2000, delta_grid=DEFAULTS["delta"], r_grid=(1.0, 2.0), env_replicas=1000,
           seed=0, exact_cutoff=1e-14, quiet=True, timed=False) -> ExperimentReport:
    """exact_cutoff=None skips the exact pair-chain coupling bound."""
    t0 = time.perf_counter()
    params = _params(mu, rho, N, env_replicas=env_replicas, coupling="independent until meeting",
                     exact_cutoff=exact_cutoff)
    m, n = characteristic_endpoint(ModelParams(mu, rho), N)
    rep = ExperimentReport("tv", params, {}, seed)
    rep.warnings += _grid_warnings("delta", delta_grid, N, min(m, n))
    rep.warnings += _grid_warnings("r", r_grid, N, min(m, n))
    delta_grid = _inside_grid("delta", delta_grid, N, min(m, n), rep)
    r_grid = _inside_grid("r", r_grid, N, min(m, n), rep)
    d_ks, r_ks = _scaled(delta_grid, N), _scaled(r_grid, N)
    rep.grid = {"delta": list(delta_grid), "delta_k": d_ks, "r": list(r_grid), "r_k": r_ks}
    fn = partial(tv_env, mu, rho, N, d_ks + r_ks, exact_cutoff)
    res = map_replicas(fn, seed, env_replicas, "tv", quiet)
    tv = np.array([t for t, _ in res])
    bound = np.array([b for _, b in res])
    nd = len(d_ks)
    _grid_rows(rep, "delta", delta_grid, tv[:, :nd].T, env_replicas)
    _grid_rows(rep, "r", r_grid, tv[:, nd:].T, env_replicas)
    _try_fit(rep, "log E[d_TV] vs log delta", fit_power_law,
             [(g.x, g.estimate.mean) for g in rep.branch("delta")])
    if exact_cutoff is not None:
        viol = tv > bound + 1e-12
        rep.series["coupling_bound_mean"] = [float(v) for v in bound.mean(axis=0)]
        rep.series["coupling_violations"] = int(viol.sum())
        rep.series["coupling_checks"] = int(viol.size)
    return _finish(rep, t0, timed)


def run_transversal(mu=2.0, rho=1.0, N=2000, delta_grid=DEFAULTS["delta"], env_replicas=1000, seed=0,
                    quiet=True, timed=False) -> ExperimentReport:
    t0 = time.perf_counter()
    params = _params(mu, rho, N, env_replicas=env_replicas)
    ks = _scaled(delta_grid, N)
    rep = ExperimentReport("transversal", params, {"delta": list(delta_grid), "k": ks}, seed)
    fn = partial(transversal_env, mu, rho, N, ks)
    vals = np.array(map_replicas(fn, seed, env_replicas, "transversal", quiet))
    _grid_rows(rep, "delta", delta_grid, vals.T, env_replicas)
    _try_fit(rep, "log E[Q(mid <= deltaN^2/3)] vs log delta", fit_power_law,
             [(g.x, g.estimate.mean) for g in rep.branch("delta")])
    return _finish(rep, t0, timed)


# ---------------------------------------------------------------- stationarity

def _staircase(m: int, n: int) -> list:
    """Down-right staircase from (1, n-1) to (m-1, 1) inside an m x n box."""
    x, y = 1, n - 1
    out = [(x, y)]
    while x < m - 1 or y > 1:
        if x < m - 1 and (len(out) % 2 == 1 or y == 1):
            x += 1
        else:
            y -= 1
        out.append((x, y))
    return out


def stationarity_env(mu, rho, box, mean_point, depths, env_seed) -> dict:
    m, n = box
    hi = (max(m - 1, mean_point[0]), max(n - 1, mean_point[1]))
    env = EnvironmentSpec(mu, env_seed).with_boundary("southwest", rho, (0, 0))
    lz = _kernels.forward_dp(site_log_weights(env, (0, 0), hi))
    out = {"mean_logZ": float(lz[mean_point])}
    for d in depths:
        i, j = d
        log_i = lz[i, j] - lz[i - 1, j]
        log_j = lz[i, j] - lz[i, j - 1]
        out[f"I{d}"] = log_i
        out[f"J{d}"] = log_j
        # interior weight recovered from the two ratios: Y = (1/I + 1/J)^-1
        out[f"W{d}"] = -_kernels.logaddexp(-log_i, -log_j)
    path = _staircase(m, n)
    steps = []
    for (x0, y0), (x1, y1) in zip(path, path[1:]):
        if x1 == x0 + 1:
            steps.append(("I", lz[x1, y1] - lz[x0, y0]))
        else:
            steps.append(("J", lz[x0, y0] - lz[x1, y1]))
    out["staircase"] = steps
    return out


def _log_inv_gamma_moments(shape: float) -> tuple[float, float]:
    return -digamma(shape), math.sqrt(trigamma(shape))


def run_stationarity(mu=2.0, rho=1.0, box=(30, 30), env_replicas=2000, seed=0, mean_point=(40, 60),
                     depths=((5, 5), (10, 10), (15, 15)), max_lag=4, quiet=True,
                     timed=False) -> ExperimentReport:
    t0 = time.perf_counter()
    m, n = box
    if m < 20 or n < 20:
        raise DomainError("stationarity suite needs a box at least 20 x 20")
    depths = [tuple(d) for d in depths]
    if any(not (1 <= i < m and 1 <= j < n) for i, j in depths):
        raise DomainError("depth sites must be interior points of the box")
    params = _params(mu, rho, 1, env_replicas=env_replicas, box=list(box), mean_point=list(mean_point),
                     depths=[list(d) for d in depths], max_lag=max_lag)
    params.pop("N")
    rep = ExperimentReport("stationarity", params, {"depth": [list(d) for d in depths]}, seed)
    fn = partial(stationarity_env, mu, rho, box, tuple(mean_point), depths)
    res = map_replicas(fn, seed, env_replicas, "stationarity", quiet)

    a, b = mean_point
    exact = -a * digamma(mu - rho) - b * digamma(rho)
    est = estimate([r["mean_logZ"] for r in res])
    rep.estimates.append(GridEstimate("mean_logZ", float(a + b), est, (0, env_replicas - 1)))
    rep.series["mean_logZ"] = {"point": [a, b], "exact": exact,
                               "z_score": (est.mean - exact) / est.stderr if est.stderr > 0 else 0.0}

    ks = {}
    laws = {"I": mu - rho, "J": rho, "W": mu}
    for d in depths:
        for tag, shape in laws.items():
            vals = np.exp(np.array([r[f"{tag}{d}"] for r in res]))
            ks[f"{tag}{list(d)}"] = float(_sps.kstest(vals, _sps.invgamma(shape).cdf).pvalue)
    lo, hi = depths[0], depths[-1]
    for tag in ("I", "J"):
        x = np.array([r[f"{tag}{lo}"] for r in res])
        y = np.array([r[f"{tag}{hi}"] for r in res])
        ks[f"{tag} two-sample {list(lo)} vs {list(hi)}"] = float(_sps.ks_2samp(x, y).pvalue)
    rep.series["ks_pvalues"] = ks

    # standardized log-ratios along the staircase, pooled over pairs at each lag
    kinds = [k for k, _ in res[0]["staircase"]]
    mom = {"I": _log_inv_gamma_moments(mu - rho), "J": _log_inv_gamma_moments(rho)}
    z = np.array([[(v - mom[k][0]) / mom[k][1] for k, v in r["staircase"]] for r in res])
    pooled = {}
    for lag in range(1, max_lag + 1):
        prods = (z[:, :-lag] * z[:, lag:]).ravel()
        pooled[str(lag)] = float(prods.mean())
    cm = np.corrcoef(z, rowvar=False)
    off = cm[np.triu_indices(len(kinds), 1)]
    rep.series["staircase"] = {
        "length": len(kinds),
        "pooled_lag_correlation": pooled,
        "max_abs_pooled": max(abs(v) for v in pooled.values()),
        "max_abs_pairwise": float(np.abs(off).max()),
        "pairwise_noise_scale": 1.0 / math.sqrt(env_replicas),
    }
    return _finish(rep, t0, timed)


stationarity_suite = run_stationarity
