import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from polymerlab import _walks
from polymerlab.environment import EnvironmentSpec, LatticePoint, site_log_weights
from polymerlab.errors import UsageError
from polymerlab.semi_infinite import (
    backward_measure_check,
    backward_transitions,
    busemann_field,
    coalescence_point,
    dual_separates,
    dual_tree,
    forward_tree,
    hitting_distribution,
    HittingDistribution,
    ne_boundary,
    pair_coupling_exact,
    transitions,
    transitions_via_weights,
    tree_crossings,
    tv_distance,
)
from polymerlab.special_functions import ModelParams, characteristic_direction


def _field(seed, hi=(9, 9), rho=1.0, mu=2.0):
    corner = (hi[0] + 1, hi[1] + 1)
    env = EnvironmentSpec(mu, seed).with_boundary("northeast", rho, corner)
    return env, busemann_field(env, rho, ((0, 0), hi))


def test_recovery_of_weights():
    env, f = _field(1)
    li, lj = f.increments()
    y = site_log_weights(env, (0, 0), (9, 9))
    # Y_x = (I_{x+e1}^{-1} + J_{x+e2}^{-1})^{-1}
    for i in range(9):
        for j in range(9):
            recon = -np.logaddexp(-li[i + 1, j], -lj[i, j + 1])
            assert recon == pytest.approx(y[i, j], abs=1e-10)


def test_busemann_mode_errors():
    env = EnvironmentSpec(2.0, 1)
    with pytest.raises(UsageError):
        busemann_field(env, 1.0, ((0, 0), (3, 3)))
    with pytest.raises(UsageError):
        busemann_field(env, 1.0, ((0, 0), (3, 3)), mode="sideways")
    ne = env.with_boundary("northeast", 1.0, (4, 4))
    with pytest.raises(UsageError):
        busemann_field(ne, 1.0, ((0, 0), (3, 3)), mode="truncated_direction")


def test_row_increments_are_inverse_gamma():
    vals = []
    for s in range(1500):
        _, f = _field(100 + s, hi=(4, 4), rho=0.8)
        vals.append(f.log_I((3, 2)))
    p = stats.kstest(np.exp(vals), stats.invgamma(2.0 - 0.8).cdf).pvalue
    assert p > 0.01
    # independent along a row inside one large field
    _, f = _field(7, hi=(3000, 2), rho=0.8)
    row = np.exp([f.log_I((x, 3)) for x in range(1, 3002)])
    assert stats.kstest(row, stats.invgamma(1.2).cdf).pvalue > 0.01


def test_truncated_matches_stationary_law():
    a, b = [], []
    for s in range(400):
        env = EnvironmentSpec(2.0, 5000 + s)
        f = busemann_field(env, 1.0, ((0, 0), (3, 3)), mode="truncated_direction")
        a.append(f.log_I((2, 2)))
        _, g = _field(9000 + s, hi=(3, 3))
        b.append(g.log_I((2, 2)))
    assert stats.ks_2samp(a, b).pvalue > 0.01


def test_two_transition_routes_agree():
    env, f = _field(3, hi=(12, 7), rho=0.6)
    p = transitions(f).p_e1
    assert np.allclose(p, transitions_via_weights(f, env), atol=1e-12)
    assert ((p > 0) & (p < 1)).all()
    q = backward_transitions(f)
    assert ((q > 0) & (q < 1)).all()


def test_annealed_drift_follows_direction():
    rho = 0.7
    xi = characteristic_direction(ModelParams(2.0, rho))
    env, f = _field(4, hi=(399, 399), rho=rho)
    t = transitions(f)
    shares = []
    for rep in range(20):
        path = forward_tree(t, env, replica=rep).path((0, 0))
        shares.append(sum(b.x == a.x + 1 for a, b in zip(path, path[1:])) / (len(path) - 1))
    mean_steps_e1 = float(np.mean(shares))
    assert abs(mean_steps_e1 - xi.e1) < 0.08


def test_forward_tree_prefix_frequencies():
    env, f = _field(5, hi=(5, 5))
    t = transitions(f)
    n = 4000
    counts = Counter()
    for rep in range(n):
        tree = forward_tree(t, env, replica=rep)
        counts[tuple(tuple(v) for v in tree.path((0, 0))[:4])] += 1
    for prefix, c in counts.items():
        prob = 1.0
        for a, b in zip(prefix, prefix[1:]):
            pa = t.p(a)
            prob *= pa if b[0] == a[0] + 1 else 1 - pa
        assert abs(c / n - prob) < 4 * math.sqrt(prob * (1 - prob) / n) + 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_tree_and_dual_do_not_cross(seed):
    env, f = _field(seed, hi=(14, 11))
    tree = forward_tree(transitions(f), env)
    dual = dual_tree(tree)
    assert tree_crossings(tree, dual) == 0
    # dual step rule: the dual edge leaving x runs opposite to the primal edge from x - (1,1)
    for i in range(1, 14):
        for j in range(1, 11):
            x = LatticePoint(i, j)
            assert (dual.step(x) == (-1, 0)) == (tree.step(x - (1, 1)) == (1, 0))


def test_coalescence_examples():
    env, f = _field(6)
    tree = forward_tree(transitions(f), env)
    assert coalescence_point(tree, (2, 3), (2, 3)) == (2, 3)
    a = (0, 3)
    nxt = LatticePoint(0, 3) + tree.step((0, 3))
    assert coalescence_point(tree, a, nxt) == nxt
    with pytest.raises(UsageError):
        coalescence_point(tree, (0, 0), (20, 0))


@pytest.mark.parametrize("seed", range(8))
def test_coalescence_equivalent_to_dual_separation(seed):
    env, f = _field(seed, hi=(11, 11))
    tree = forward_tree(transitions(f), env, replica=seed)
    for k in range(1, 6):
        met = coalescence_point(tree, (k, 0), (0, k)) is not None
        assert met == (not dual_separates(tree, k))


def test_hitting_distribution_basics():
    env, f = _field(8, hi=(6, 4))
    t = transitions(f)
    corner = hitting_distribution(t, (6, 4))
    assert corner.boundary == ne_boundary((0, 0), (6, 4))
    assert corner.mass.max() == 1.0 and corner.mass.sum() == 1.0
    top = hitting_distribution(t, (2, 4))
    assert top.mass[2] == 1.0
    for start in [(0, 0), (3, 1), (5, 3)]:
        h = hitting_distribution(t, start)
        assert h.mass.sum() == pytest.approx(1.0, abs=1e-12)
        assert (h.mass >= 0).all()
    with pytest.raises(UsageError):
        hitting_distribution(t, (7, 0))


def test_hitting_distribution_monte_carlo():
    env, f = _field(9, hi=(5, 5))
    t = transitions(f)
    h = hitting_distribution(t, (0, 0))
    n = 5000
    on_ne = set(h.boundary)
    counts = Counter(next(x for x in forward_tree(t, env, replica=r).path((0, 0)) if x in on_ne)
                     for r in range(n))
    for site, m in zip(h.boundary, h.mass):
        assert abs(counts[site] / n - m) < 4 * math.sqrt(m * (1 - m) / n) + 1e-9


def test_tv_distance_examples():
    b = ne_boundary((0, 0), (1, 1))
    h1 = HittingDistribution(b, np.array([1.0, 0.0, 0.0]))
    h2 = HittingDistribution(b, np.array([0.0, 0.5, 0.5]))
    assert tv_distance(h1, h1) == 0.0
    assert tv_distance(h1, h2) == 1.0
    with pytest.raises(UsageError):
        tv_distance(h1, HittingDistribution(ne_boundary((0, 0), (2, 1)), np.zeros(4)))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10 ** 9), st.integers(1, 6))
def test_tv_below_coupling_bound(seed, k):
    env, f = _field(seed, hi=(9, 9))
    t = transitions(f)
    tv = tv_distance(hitting_distribution(t, (k, 0)), hitting_distribution(t, (0, k)))
    met, differ, dropped = pair_coupling_exact(t, (0, k), (k, 0))
    assert dropped == 0.0
    assert tv <= differ + 1e-12
    # meeting can happen on the boundary after different first hits, so met and differ overlap
    assert 0 <= met <= 1 and 0 <= differ <= 1


def test_pair_chain_against_tree_monte_carlo():
    env, f = _field(10, hi=(15, 15))
    t = transitions(f)
    met, _, _ = pair_coupling_exact(t, (3, 0), (0, 3))
    n = 4000
    k0, k1 = env.key
    mc, _ = _walks.pair_counts(t.p_e1, k0, k1, 0, 0, 0, 3, 3, 0, 0, n)
    assert abs(mc / n - met) < 4 * math.sqrt(met * (1 - met) / n) + 1e-9
    with pytest.raises(UsageError):
        pair_coupling_exact(t, (0, 0), (0, 3))


def test_backward_measure_check_small_boxes():
    worst = 0.0
    for seed in range(50):
        env = EnvironmentSpec(2.0, seed)
        worst = max(worst, backward_measure_check(env, 1.0, (0, 0), (1, 1)))
        worst = max(worst, backward_measure_check(env, 0.6, (0, 0), (2, 2)))
    assert worst < 1e-12
    with pytest.raises(UsageError):
        backward_measure_check(EnvironmentSpec(2.0, 0), 1.0, (0, 0), (0, 4))
    with pytest.raises(UsageError):
        backward_measure_check(EnvironmentSpec(2.0, 0), 1.0, (0, 0), (9, 9))
