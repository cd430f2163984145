"""Replica averages and log-log fits."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats as _sps

from ..errors import DomainError


@dataclass(frozen=True)
class Estimate:
    mean: float
    stderr: float
    n: int

    def __post_init__(self):
        if self.n < 1 or not self.stderr >= 0:
            raise DomainError("estimate needs n >= 1 and stderr >= 0")


def estimate(values) -> Estimate:
    """Sample mean with standard error sd / sqrt(n) (ddof=1; zero for a single value)."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise DomainError("no replicas")
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return Estimate(float(v.mean()), sd / math.sqrt(v.size), int(v.size))


@dataclass(frozen=True)
class ScalingFit:
    slope: float
    slope_stderr: float
    intercept: float
    r_squared: float

    def to_dict(self) -> dict:
        return {"slope": self.slope, "stderr": self.slope_stderr,
                "intercept": self.intercept, "r2": self.r_squared}


def fit_line(xs, ys) -> ScalingFit:
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.size < 3:
        raise DomainError("a fit needs at least 3 points")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise DomainError("non-finite fit coordinates")
    if np.ptp(x) <= 1e-12 * max(1.0, float(np.abs(x).max())):
        raise DomainError("degenerate x range")
    res = _sps.linregress(x, y)
    r2 = float(res.rvalue) ** 2 if np.ptp(y) > 0 else 1.0
    return ScalingFit(float(res.slope), float(res.stderr), float(res.intercept), min(max(r2, 0.0), 1.0))


def fit_power_law(points) -> ScalingFit:
    """Least squares on (log x, log y)."""
    pts = list(points)
    if len(pts) < 3:
        raise DomainError("a power-law fit needs at least 3 points")
    if any(not (x > 0 and y > 0) for x, y in pts):
        raise DomainError("power-law fit needs positive coordinates")
    return fit_line([math.log(x) for x, _ in pts], [math.log(y) for _, y in pts])


def fit_stretched_exponent(points) -> ScalingFit:
    """Slope of log(-log p) against log r, for probabilities p in (0, 1)."""
    pts = list(points)
    if any(not (0 < p < 1) for _, p in pts):
        raise DomainError("stretched-exponent fit needs probabilities strictly between 0 and 1")
    return fit_power_law([(r, -math.log(p)) for r, p in pts])
