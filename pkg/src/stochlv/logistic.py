"""Scalar stochastic logistic equation dg = g(r - r g) dt + sigma g dB.

Pathwise closed form on a sampled Brownian path, the random equilibrium
u(omega), its Gamma stationary law and Cesaro time averages.

For the Stratonovich equation the closed form is

    g(t) = x exp(rho t + sigma W(t)) / (1 + r x I(t)),
    I(t) = int_0^t exp(rho s + sigma W(s)) ds,

with rho = r.  The Ito equation has the same form with rho = r - sigma^2/2.
I(t) is computed by the trapezoid rule on the path grid, in log space so that
long horizons do not overflow.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import special
from .errors import DegenerateError, GridError, WindowError
from .paths import BrownianPath, shift


class Calculus(str, enum.Enum):
    ITO = "ito"
    STRATONOVICH = "stratonovich"


@dataclass(frozen=True)
class LogisticParams:
    r: float
    sigma: float
    calculus: Calculus = Calculus.STRATONOVICH

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r}")
        object.__setattr__(self, "calculus", Calculus(self.calculus))

    @property
    def rho(self) -> float:
        """Exponential rate in the closed-form solution."""
        if self.calculus is Calculus.ITO:
            return self.r - 0.5 * self.sigma**2
        return self.r


class PointMass(NamedTuple):
    """Degenerate stationary law concentrated at ``at`` (sigma = 0)."""

    at: float


class URandomEquilibrium(NamedTuple):
    value: float
    tail: float  # relative size estimate of the truncated integral

    @property
    def sufficient(self) -> bool:
        return self.tail < 1e-8


def _log_cum_integral(rho: float, sigma: float, times: np.ndarray, w: np.ndarray) -> np.ndarray:
    """log of the cumulative integral of exp(rho s + sigma W(s)) over the grid.

    W is taken piecewise linear, so each interval integrates an exponential
    of a linear function exactly: h (e^b - e^a) / (b - a).  This agrees with
    the trapezoid rule to O(h^2) and is exact when sigma = 0.  Entry 0 is
    -inf (empty integral).
    """
    e = rho * times + sigma * w
    out = np.full(e.shape, -np.inf)
    if e.size > 1:
        dt = np.diff(times)
        a, b = e[:-1], e[1:]
        d = np.abs(b - a)
        safe = np.where(d > 1e-8, d, 1.0)
        # log((1 - e^-d) / d), with the series -d/2 near d = 0
        shape = np.where(d > 1e-8, np.log(-np.expm1(-safe) / safe), -0.5 * d)
        terms = np.log(dt) + np.maximum(a, b) + shape
        out[1:] = np.logaddexp.accumulate(terms)
    return out, e


def g_series(params: LogisticParams, path: BrownianPath, g0: float, t: float):
    """Times, g and the exact clock tau(t) = int_0^t g on the grid [0, t].

    The clock uses d/dt log(1 + r x I(t)) = r g(t), so tau is the exact
    integral of the closed form for the grid value of I.
    """
    if not g0 > 0:
        raise ValueError(f"g0 must be positive, got {g0}")
    if t < 0:
        raise GridError("t must be nonnegative")
    times, w = path.window(0.0, t)
    log_i, e = _log_cum_integral(params.rho, params.sigma, times, w)
    log_denom = np.logaddexp(0.0, math.log(params.r * g0) + log_i)
    g = np.exp(math.log(g0) + e - log_denom)
    tau = log_denom / params.r
    return times, g, tau


def g_exact(params: LogisticParams, path: BrownianPath, g0: float, t: float) -> float:
    """Pathwise solution g(t, omega, g0) of the logistic SDE."""
    path.index_of(t)
    _, g, _ = g_series(params, path, g0, t)
    return float(g[-1])


def default_truncation(params: LogisticParams) -> float:
    rho = params.rho
    return max(40.0 / rho, 40.0 * params.sigma**2 / rho**2)


def u_random_equilibrium(params: LogisticParams, path: BrownianPath,
                         truncation: float | None = None) -> URandomEquilibrium:
    """Random equilibrium u(omega) = (r int_{-T}^0 exp(rho s + sigma W(s)) ds)^-1."""
    rho = params.rho
    if rho <= 0:
        raise DegenerateError("random equilibrium needs rho = r - sigma^2/2 > 0 (Ito)")
    T = default_truncation(params) if truncation is None else truncation
    if not T > 0:
        raise ValueError("truncation must be positive")
    if not path.covers(-T, 0.0):
        raise WindowError(f"path window [{path.t_min}, {path.t_max}] does not cover [-{T}, 0]")
    times, w = path.window(-T, 0.0)
    log_i, _ = _log_cum_integral(rho, params.sigma, times, w)
    log_total = log_i[-1]
    value = math.exp(-math.log(params.r) - log_total)
    # neglected mass beyond -T, relative to the kept integral
    decay = max(rho - 0.5 * params.sigma**2, 0.5 * rho)
    log_tail = -rho * T + params.sigma * w[0] - math.log(decay)
    return URandomEquilibrium(value, math.exp(log_tail - log_total))


def gamma_parameters(params: LogisticParams) -> tuple[float, float]:
    """(shape, rate) of the stationary Gamma law of the logistic SDE."""
    s2 = params.sigma**2
    if s2 == 0:
        raise DegenerateError("sigma = 0 has a point-mass stationary law")
    rate = 2.0 * params.r / s2
    if params.calculus is Calculus.ITO:
        shape = rate - 1.0
        if shape <= 0:
            raise DegenerateError("Ito stationary law needs sigma^2 < 2r")
        return shape, rate
    return rate, rate


def stationary_density(params: LogisticParams, x):
    """Stationary density p(x); a PointMass when sigma = 0."""
    if params.sigma == 0:
        return PointMass(params.rho / params.r)
    if np.any(np.asarray(x) < 0):
        raise ValueError("x must be nonnegative")
    shape, rate = gamma_parameters(params)
    return special.gamma_pdf(x, shape, rate)


def stationary_cdf(params: LogisticParams, x):
    if params.sigma == 0:
        at = params.rho / params.r
        out = (np.asarray(x, dtype=float) >= at).astype(float)
        return out if out.ndim else float(out)
    shape, rate = gamma_parameters(params)
    return special.gamma_cdf(x, shape, rate)


def stationary_moments(params: LogisticParams) -> tuple[float, float]:
    """Mean and variance of the stationary law."""
    if params.sigma == 0:
        return params.rho / params.r, 0.0
    shape, rate = gamma_parameters(params)
    return shape / rate, shape / rate**2


def time_average_g(params: LogisticParams, path: BrownianPath, g0: float, T: float) -> float:
    """(1/T) int_0^T g(s) ds by the trapezoid rule."""
    if not T > 0:
        raise ValueError("T must be positive")
    times, g, _ = g_series(params, path, g0, T)
    return float(np.trapezoid(g, times) / T)


def time_average_g_pullback(params: LogisticParams, path: BrownianPath, g0: float,
                            T: float) -> float:
    """(1/T) int_0^T g(s, theta_{-T} omega, g0) ds."""
    return time_average_g(params, shift(path, -T), g0, T)
