"""Scalar special functions and closed-form quantities of the inverse-gamma polymer.

Conventions: ``mu`` is the bulk shape, ``rho`` the boundary (direction) parameter
with 0 < rho < mu.  Weights are inverse-gamma, log-weights are minus log-gamma.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError

# B_2, B_4, ..., B_22
_BERNOULLI = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
)
_SHIFT = 16.0


@dataclass(frozen=True)
class ModelParams:
    mu: float
    rho: float

    def __post_init__(self):
        if not (self.mu > 0 and 0 < self.rho < self.mu):
            raise DomainError(f"need 0 < rho < mu, got mu={self.mu}, rho={self.rho}")


@dataclass(frozen=True)
class Direction:
    e1: float
    e2: float


def floor_scaled(c: float, N: float, power: float) -> int:
    """floor(c * N**power), robust to the last-ulp error of the power.

    1000**(2/3) evaluates to 99.99999999999997; we want 100.
    """
    t = c * N ** power
    r = round(t)
    if abs(t - r) <= 1e-9 * max(1.0, abs(t)):
        return int(r)
    return math.floor(t)


def log_gamma(x: float) -> float:
    if not x > 0:
        raise DomainError(f"log_gamma needs x > 0, got {x}")
    return math.lgamma(x)


def _psi_asymptotic(k: int, x: float) -> float:
    if k == 0:
        s = math.log(x) - 0.5 / x
        x2 = x * x
        p = x2
        for n, b in enumerate(_BERNOULLI, start=1):
            s -= b / (2 * n * p)
            p *= x2
        return s
    s = math.factorial(k - 1) / x ** k + math.factorial(k) / (2.0 * x ** (k + 1))
    for n, b in enumerate(_BERNOULLI, start=1):
        s += b * math.factorial(2 * n + k - 1) / (math.factorial(2 * n) * x ** (2 * n + k))
    return s if k % 2 == 1 else -s


def polygamma(k: int, x: float) -> float:
    """Psi_k(x), the (k+1)-th derivative of log Gamma, for k = 0..3 and x > 0."""
    if k not in (0, 1, 2, 3):
        raise DomainError(f"polygamma order must be 0..3, got {k}")
    if not x > 0 or math.isinf(x):
        raise DomainError(f"polygamma needs finite x > 0, got {x}")
    # psi_k(x) = psi_k(x + 1) - (-1)^k k! / x^(k+1)
    acc = 0.0
    fk = math.factorial(k)
    while x < _SHIFT:
        acc += fk / x ** (k + 1)
        x += 1.0
    sign = -1.0 if k % 2 == 0 else 1.0
    return _psi_asymptotic(k, x) + sign * acc


def digamma(x: float) -> float:
    return polygamma(0, x)


def trigamma(x: float) -> float:
    return polygamma(1, x)


def _xi1(mu: float, rho: float) -> float:
    a, b = trigamma(rho), trigamma(mu - rho)
    return a / (a + b)


def characteristic_direction(params: ModelParams) -> Direction:
    a, b = trigamma(params.rho), trigamma(params.mu - params.rho)
    return Direction(a / (a + b), b / (a + b))


def shape_function(params: ModelParams) -> float:
    xi = characteristic_direction(params)
    mu, rho = params.mu, params.rho
    return -xi.e1 * digamma(mu - rho) - xi.e2 * digamma(rho)


def characteristic_endpoint(params: ModelParams, N: int) -> tuple[int, int]:
    """v_N = (floor(N xi_1), floor(N xi_2))."""
    xi = characteristic_direction(params)
    return floor_scaled(xi.e1, N, 1.0), floor_scaled(xi.e2, N, 1.0)


def rho_for_direction(mu: float, e1: float, tol: float = 1e-12) -> float:
    """Invert rho -> xi_1[rho] (decreasing) by bisection."""
    if not 0 < e1 < 1:
        raise DomainError(f"direction coordinate must lie in (0,1), got {e1}")
    lo, hi = 0.0, mu
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid <= 0 or mid >= mu:
            break
        if _xi1(mu, mid) > e1:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def lattice_shape(mu: float, m: float, n: float) -> float:
    """Homogeneous shape function at a point (m, n) of the closed quadrant."""
    if m < 0 or n < 0:
        raise DomainError(f"point ({m}, {n}) outside the quadrant")
    if m == 0 and n == 0:
        return 0.0
    if m == 0:
        return -n * digamma(mu)
    if n == 0:
        return -m * digamma(mu)
    r = rho_for_direction(mu, m / (m + n))
    return -m * digamma(mu - r) - n * digamma(r)


def shape_loss(params: ModelParams, N: int, s: float) -> float:
    if s < 0:
        raise DomainError(f"s must be nonnegative, got {s}")
    m, n = characteristic_endpoint(params, N)
    k = floor_scaled(s, N, 2.0 / 3.0)
    if k > m:
        raise DomainError(f"shifted endpoint ({m - k}, {n + k}) leaves the quadrant")
    if k == 0:
        return 0.0
    mu, rho = params.mu, params.rho
    return (lattice_shape(mu, m - k, n + k) - k * digamma(mu - rho) + k * digamma(rho)
            - lattice_shape(mu, m, n))


def shape_loss_quadratic_coefficient(params: ModelParams) -> float:
    """C > 0 with shape_loss ~ -C * s**2 * N**(1/3) as N grows (second-order Taylor term)."""
    mu, rho = params.mu, params.rho
    p1, q1 = trigamma(rho), trigamma(mu - rho)
    p2, q2 = polygamma(2, rho), polygamma(2, mu - rho)
    return -0.5 * (p1 + q1) ** 3 / (p1 * q2 + q1 * p2)


def log_gamma_mgf(alpha: float, lam: float) -> float:
    """E exp(lam * (log X - psi0(alpha))) for X ~ Gamma(alpha)."""
    if not alpha > 0:
        raise DomainError(f"alpha must be positive, got {alpha}")
    if not alpha + lam > 0:
        raise DomainError(f"need alpha + lambda > 0, got {alpha + lam}")
    return math.exp(math.lgamma(alpha + lam) - math.lgamma(alpha) - lam * digamma(alpha))


def rn_exponent(N: int, a: float) -> int:
    return floor_scaled(a, N, 2.0 / 3.0)


def rn_second_moment(rho: float, b: float, N: int, a: float) -> float:
    """Second moment of the density ratio Ga^-1(lam) vs Ga^-1(rho), lam = rho + b N^(-1/3),
    over floor(a N^(2/3)) independent coordinates."""
    if not rho > 0 or N < 1 or not a > 0:
        raise DomainError("need rho > 0, N >= 1, a > 0")
    lam = rho + b * N ** (-1.0 / 3.0)
    if not (lam > 0 and 2 * lam - rho > 0):
        raise DomainError(f"gamma arguments non-positive (lambda={lam})")
    d = lam - rho
    if abs(d) < 1e-3 * min(1.0, lam):
        # symmetric second difference of log Gamma around lam; the direct form cancels
        per = d * d * trigamma(lam) + d ** 4 * polygamma(3, lam) / 12.0
    else:
        per = math.lgamma(rho) + math.lgamma(2 * lam - rho) - 2 * math.lgamma(lam)
    return math.exp(rn_exponent(N, a) * per)


def variance_helper_L(theta: float, x: float) -> float:
    """L(theta, x) = int_0^x (psi0(theta) - log y) x^-theta y^(theta-1) e^(x-y) dy.

    The same integrand over (0, inf) integrates to zero, so for large x we use the
    tail form x^-theta int_x^inf (log y - psi0(theta)) y^(theta-1) e^(x-y) dy, which
    avoids cancelling two terms of size e^x.  For small x, y = u^(1/theta) removes
    the y^(theta-1) singularity and leaves a log endpoint singularity for QUADPACK.
    """
    if not (theta > 0 and x > 0):
        raise DomainError("theta and x must be positive")
    from scipy.integrate import quad

    p0 = digamma(theta)
    if x > max(1.0, theta):
        def tail(t):
            y = x + t
            return (math.log(y) - p0) * (y / x) ** (theta - 1.0) * math.exp(-t)

        val, _ = quad(tail, 0.0, math.inf, epsabs=0.0, epsrel=1e-12, limit=400)
        return val / x

    top = x ** theta
    inv = 1.0 / theta

    def g(u):
        return math.exp(x - u ** inv)

    plain, _ = quad(g, 0.0, top, epsabs=0.0, epsrel=1e-12, limit=400)
    logged, _ = quad(g, 0.0, top, weight="alg-loga", wvar=(0.0, 0.0),
                     epsabs=0.0, epsrel=1e-12, limit=400)
    return (p0 * plain - inv * logged) / (top * theta)
