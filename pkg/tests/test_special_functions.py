import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy import special

from polymerlab.environment import Stream
from polymerlab.errors import DomainError
from polymerlab.special_functions import (
    ModelParams,
    characteristic_direction,
    characteristic_endpoint,
    digamma,
    floor_scaled,
    lattice_shape,
    log_gamma,
    log_gamma_mgf,
    polygamma,
    rho_for_direction,
    rn_second_moment,
    shape_function,
    shape_loss,
    shape_loss_quadratic_coefficient,
    trigamma,
    variance_helper_L,
)

EULER = 0.5772156649015329


def test_log_gamma_values():
    assert log_gamma(1.0) == 0.0
    assert log_gamma(5.0) == pytest.approx(math.log(24.0), rel=1e-12)
    assert log_gamma(0.5) == pytest.approx(0.5 * math.log(math.pi), rel=1e-12)
    with pytest.raises(DomainError):
        log_gamma(0.0)


def test_polygamma_closed_forms():
    assert polygamma(1, 1.0) == pytest.approx(math.pi ** 2 / 6, rel=1e-12)
    assert polygamma(1, 0.5) == pytest.approx(math.pi ** 2 / 2, rel=1e-12)
    assert polygamma(0, 4.0) - polygamma(0, 3.0) == pytest.approx(1 / 3, abs=1e-12)
    assert polygamma(0, 1.0) == pytest.approx(-EULER, rel=1e-13)


@pytest.mark.parametrize("k", [0, 1, 2, 3])
@pytest.mark.parametrize("x", [1e-3, 0.1, 0.5, 1.0, 2.7, 10.0, 55.5, 1e4])
def test_polygamma_against_scipy(k, x):
    assert polygamma(k, x) == pytest.approx(float(special.polygamma(k, x)), rel=1e-12)


def test_polygamma_domain():
    for bad in [(0, 0.0), (1, -1.0), (4, 1.0), (-1, 1.0)]:
        with pytest.raises(DomainError):
            polygamma(*bad)


@given(st.floats(0.1, 20.0))
def test_digamma_recurrence(x):
    assert abs(polygamma(0, x + 1) - polygamma(0, x) - 1 / x) <= 1e-10


@given(st.floats(1e-3, 50.0))
def test_trigamma_positive(x):
    assert trigamma(x) > 0


def test_params_validation():
    with pytest.raises(DomainError, match="0 < rho < mu"):
        ModelParams(2.0, 3.0)
    with pytest.raises(DomainError):
        ModelParams(2.0, 0.0)


def test_characteristic_direction_examples():
    d = characteristic_direction(ModelParams(3.0, 1.5))
    assert d.e1 == pytest.approx(0.5) and d.e2 == pytest.approx(0.5)
    d = characteristic_direction(ModelParams(2.0, 0.5))
    a, b = special.polygamma(1, 0.5), special.polygamma(1, 1.5)
    assert d.e1 == pytest.approx(a / (a + b), rel=1e-12)
    assert characteristic_direction(ModelParams(2.0, 1e-6)).e1 > 0.999999


@pytest.mark.parametrize("mu", [0.3, 1.0, 2.0, 7.5])
def test_characteristic_direction_decreasing(mu):
    eps = mu * 1e-3
    rhos = np.linspace(eps, mu - eps, 100)
    e1 = [characteristic_direction(ModelParams(mu, r)).e1 for r in rhos]
    assert all(b < a for a, b in zip(e1, e1[1:]))
    assert all(abs(d.e1 + d.e2 - 1) < 1e-15 for d in
               (characteristic_direction(ModelParams(mu, r)) for r in rhos))


def test_rho_for_direction_inverts():
    for rho in (0.2, 1.0, 1.7):
        e1 = characteristic_direction(ModelParams(2.0, rho)).e1
        assert rho_for_direction(2.0, e1) == pytest.approx(rho, abs=1e-10)


def test_shape_function():
    assert shape_function(ModelParams(2.0, 1.0)) == pytest.approx(EULER, rel=1e-12)
    p = ModelParams(2.0, 0.7)
    xi = characteristic_direction(p)
    assert lattice_shape(2.0, 1000 * xi.e1, 1000 * xi.e2) == pytest.approx(1000 * shape_function(p), rel=1e-9)


def test_floor_scaled_is_robust():
    assert floor_scaled(1.0, 1000, 2 / 3) == 100
    assert floor_scaled(0.05, 2000, 2 / 3) == 7
    assert floor_scaled(0.999, 1000, 2 / 3) == 99


def test_shape_loss_examples():
    p = ModelParams(2.0, 1.0)
    assert shape_loss(p, 10 ** 6, 0.0) == 0.0
    s1, s2 = shape_loss(p, 10 ** 6, 1.0), shape_loss(p, 10 ** 6, 2.0)
    assert s2 < 0 and s1 < 0
    assert 0.75 * 4 <= s2 / s1 <= 1.25 * 4
    c = shape_loss_quadratic_coefficient(p)
    assert c > 0
    assert s2 == pytest.approx(-c * 4 * 100, rel=0.01)
    with pytest.raises(DomainError):
        shape_loss(p, 1000, 10.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 1.8), st.floats(0.0, 3.0))
def test_shape_loss_nonpositive(rho, s):
    p = ModelParams(2.0, rho)
    m, _ = characteristic_endpoint(p, 10 ** 5)
    assume(floor_scaled(s, 10 ** 5, 2 / 3) <= m)
    assert shape_loss(p, 10 ** 5, s) <= 1e-9


def test_log_gamma_mgf_examples():
    assert log_gamma_mgf(3.0, 0.0) == 1.0
    assert log_gamma_mgf(1.0, 1.0) == pytest.approx(math.exp(EULER), rel=1e-12)
    with pytest.raises(DomainError):
        log_gamma_mgf(1.0, -1.0)


def test_log_gamma_mgf_monte_carlo():
    s = Stream(11)
    x = np.array([s.log_gamma(2.0) for _ in range(200_000)])
    vals = np.exp(0.1 * (x - digamma(2.0)))
    err = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - log_gamma_mgf(2.0, 0.1)) < 3 * err


@given(st.floats(0.1, 10.0), st.floats(-0.5, 0.5))
def test_log_gamma_mgf_jensen(alpha, frac):
    lam = frac * alpha
    v = log_gamma_mgf(alpha, lam)
    # the lgamma difference carries ~1e-15 absolute rounding
    assert v >= 1.0 - 1e-12
    if abs(lam) > 1e-3:
        assert v > 1.0


def test_rn_second_moment_examples():
    assert rn_second_moment(1.0, 0.0, 1000, 1.0) == 1.0
    target = (math.gamma(1.0) * math.gamma(1.2) / math.gamma(1.1) ** 2) ** 100
    assert rn_second_moment(1.0, 1.0, 1000, 1.0) == pytest.approx(target, rel=1e-10)
    with pytest.raises(DomainError):
        rn_second_moment(1.0, -20.0, 1000, 1.0)


def test_rn_second_moment_tiny_shift():
    # lam - rho ~ 2e-9 over 1083 coordinates; high-precision value 1.0000000000000933
    assert rn_second_moment(0.2, -5.960464477539063e-08, 35647, 1.0) == pytest.approx(1.0000000000000933, abs=1e-15)
    assert rn_second_moment(1.0, 1e-4, 1000, 1.0) == pytest.approx(1.0000000164491003, abs=1e-15)


@given(st.floats(0.2, 5.0), st.floats(-1.0, 3.0), st.integers(10, 10 ** 6), st.floats(0.1, 2.0))
def test_rn_second_moment_at_least_one(rho, b, N, a):
    lam = rho + b * N ** (-1 / 3)
    if lam <= 0 or 2 * lam - rho <= 0:
        return
    assert rn_second_moment(rho, b, N, a) >= 1.0 - 1e-12


def test_variance_helper_small_x_series():
    # exact expansion: (psi0(theta) - log x)/theta + 1/theta^2 + O(x log x)
    theta, x = 1.0, 1e-6
    series = (digamma(theta) - math.log(x)) / theta + 1 / theta ** 2
    assert variance_helper_L(theta, x) == pytest.approx(series, abs=1e-4)


def test_variance_helper_riemann_oracle():
    theta, x = 1.0, 1.0
    n = 10 ** 7
    y = (np.arange(n) + 0.5) * (x / n)
    f = (digamma(theta) - np.log(y)) * x ** -theta * y ** (theta - 1) * np.exp(x - y)
    assert variance_helper_L(theta, x) == pytest.approx(f.sum() * x / n, abs=1e-6)


def _direct_L(theta, x):
    from scipy.integrate import quad
    f = lambda y: (digamma(theta) - math.log(y)) * x ** -theta * y ** (theta - 1) * math.exp(x - y)
    return quad(f, 0, x, limit=500, epsabs=1e-13)[0]


@pytest.mark.parametrize("theta", [0.5, 1.0, 2.0])
@pytest.mark.parametrize("x", [0.1, 1.0, 10.0])
def test_variance_helper_grid(theta, x):
    v = variance_helper_L(theta, x)
    assert math.isfinite(v)
    assert v == pytest.approx(_direct_L(theta, x), abs=1e-7)
    # continuity in x
    assert abs(variance_helper_L(theta, x * (1 + 1e-6)) - v) < 1e-4


def test_variance_helper_domain():
    with pytest.raises(DomainError):
        variance_helper_L(0.0, 1.0)
    with pytest.raises(DomainError):
        variance_helper_L(1.0, -1.0)
