import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, stats

from stochlv.convergence import logistic_study, rms_study, seeded_paths
from stochlv.errors import DegenerateError, GridError, WindowError
from stochlv.logistic import (Calculus, LogisticParams, PointMass, g_exact, g_series,
                              gamma_parameters, stationary_cdf, stationary_density,
                              stationary_moments, time_average_g, time_average_g_pullback,
                              u_random_equilibrium)
from stochlv.measures import path_seed
from stochlv.paths import sample_path, shift

STRAT = Calculus.STRATONOVICH
ITO = Calculus.ITO


def test_params_validation():
    with pytest.raises(ValueError):
        LogisticParams(0.0, 1.0)
    assert LogisticParams(1.0, 0.6, ITO).rho == pytest.approx(1.0 - 0.18)
    assert LogisticParams(1.0, 0.6, STRAT).rho == 1.0


def test_noiseless_equilibrium_stays_at_one():
    p = sample_path(1, 0.0, 10.0, 0.01)
    assert g_exact(LogisticParams(1.0, 0.0), p, 1.0, 10.0) == pytest.approx(1.0, abs=1e-12)


def test_noiseless_closed_form_at_log_two():
    t = math.log(2.0)
    p = sample_path(1, 0.0, t, t / 1000)
    # x e^t / (1 + x (e^t - 1)) with x = 1/2
    assert g_exact(LogisticParams(1.0, 0.0), p, 0.5, t) == pytest.approx(2 / 3, abs=1e-6)


def test_errors():
    p = sample_path(1, 0.0, 1.0, 0.1)
    params = LogisticParams(1.0, 0.5)
    with pytest.raises(ValueError):
        g_exact(params, p, 0.0, 1.0)
    with pytest.raises(GridError):
        g_exact(params, p, 1.0, 0.55)
    with pytest.raises(WindowError):
        u_random_equilibrium(params, p, truncation=5.0)
    with pytest.raises(DegenerateError):
        u_random_equilibrium(LogisticParams(1.0, 2.0, ITO), sample_path(1, -50.0, 0.0, 0.1))


def test_euler_on_converted_equation_converges_at_half_order():
    # step -> step / 4 halves the strong error of Euler-Maruyama
    params = LogisticParams(1.0, 0.5, STRAT)
    studies = [logistic_study(params, p, 0.5, 1.0, levels=3, scheme="euler")
               for p in seeded_paths(range(20), 1.0, 1e-3)]
    rms = rms_study(studies)
    assert rms.errors[0] / rms.errors[2] == pytest.approx(2.0, rel=0.3)


@pytest.mark.parametrize("calculus", [STRAT, ITO])
def test_milstein_matches_exact_solution_pathwise(calculus):
    params = LogisticParams(1.0, 0.5, calculus)
    study = logistic_study(params, sample_path(4, 0.0, 1.0, 1e-3), 0.5, 1.0, levels=2)
    assert study.errors[-1] < 1e-3


def test_u_without_noise_is_elementary_integral():
    T = 10.0
    u = u_random_equilibrium(LogisticParams(1.0, 0.0), sample_path(1, -T, 0.0, 0.01), T)
    assert u.value == pytest.approx(1.0 / (1.0 - math.exp(-T)), rel=1e-4)


def test_u_mean_is_one():
    params = LogisticParams(1.0, 1.0, STRAT)
    us = np.array([u_random_equilibrium(params, sample_path(path_seed(99, i), -40.0, 0.0, 0.02)).value
                   for i in range(10_000)])
    se = us.std(ddof=1) / math.sqrt(us.size)
    assert abs(us.mean() - 1.0) < 2 * se


def test_u_is_stationary_along_the_shift():
    params = LogisticParams(1.0, 0.7, STRAT)
    p = sample_path(21, -60.0, 5.0, 0.01)
    u0 = u_random_equilibrium(params, p, 40.0)
    for t in (0.5, 2.0, 5.0):
        ut = u_random_equilibrium(params, shift(p, t), 40.0)
        assert g_exact(params, p, u0.value, t) == pytest.approx(ut.value, rel=1e-8)


def test_tail_flag():
    params = LogisticParams(1.0, 0.5, STRAT)
    p = sample_path(3, -60.0, 0.0, 0.01)
    assert u_random_equilibrium(params, p).sufficient
    assert not u_random_equilibrium(params, p, truncation=2.0).sufficient


def test_density_parameters_and_moments():
    params = LogisticParams(1.0, 1.0, STRAT)
    assert gamma_parameters(params) == (2.0, 2.0)
    assert stationary_moments(params) == (1.0, 0.5)
    for r, s in [(1.0, 0.3), (2.0, 1.5), (0.5, 0.2)]:
        mean, _ = stationary_moments(LogisticParams(r, s, STRAT))
        assert mean == pytest.approx(1.0)


@pytest.mark.parametrize("r,sigma,calculus", [(1.0, 1.0, STRAT), (2.0, 0.5, STRAT),
                                               (1.0, 0.8, ITO)])
def test_density_normalized_and_matches_scipy(r, sigma, calculus):
    params = LogisticParams(r, sigma, calculus)
    total, _ = integrate.quad(lambda x: stationary_density(params, x), 0, np.inf, limit=200)
    assert total == pytest.approx(1.0, abs=1e-10)
    k, lam = gamma_parameters(params)
    xs = np.linspace(0.01, 4.0, 30)
    np.testing.assert_allclose(stationary_cdf(params, xs), stats.gamma.cdf(xs, k, scale=1 / lam),
                               atol=1e-12)


def test_noiseless_law_is_point_mass():
    params = LogisticParams(1.0, 0.0)
    assert stationary_density(params, 1.0) == PointMass(1.0)
    assert stationary_cdf(params, 0.99) == 0.0
    assert stationary_cdf(params, 1.0) == 1.0


def test_ito_stationary_mean_by_time_average():
    # ergodic mean of the Ito logistic equation is rho / r = 1 - sigma^2 / (2 r)
    params = LogisticParams(1.0, 1.0, ITO)
    p = sample_path(17, 0.0, 4000.0, 0.01)
    mean, _ = stationary_moments(params)
    assert mean == 0.5
    assert time_average_g(params, p, 1.0, 4000.0) == pytest.approx(0.5, abs=0.03)


def test_time_averages_tend_to_one():
    assert time_average_g(LogisticParams(1.0, 0.0), sample_path(1, 0.0, 50.0, 0.1), 1.0,
                          50.0) == pytest.approx(1.0, abs=1e-12)
    params = LogisticParams(1.0, 1.0, STRAT)
    p = sample_path(5, -200.0, 200.0, 0.01)
    assert time_average_g(params, p, 0.3, 200.0) == pytest.approx(1.0, abs=0.05)
    assert time_average_g_pullback(params, p, 0.3, 200.0) == pytest.approx(1.0, abs=0.05)


@given(seed=st.integers(0, 2**32), g0=st.floats(0.01, 10.0), factor=st.floats(1.01, 5.0),
       sigma=st.floats(0.0, 2.0))
def test_positive_and_increasing_in_initial_value(seed, g0, factor, sigma):
    params = LogisticParams(1.0, sigma, STRAT)
    p = sample_path(seed, 0.0, 3.0, 0.05)
    _, g1, tau = g_series(params, p, g0, 3.0)
    _, g2, _ = g_series(params, p, g0 * factor, 3.0)
    assert np.all(g1 > 0)
    assert np.all(g2 > g1)
    assert tau[0] == 0.0 and np.all(np.diff(tau) > 0)


def test_clock_is_integral_of_g():
    params = LogisticParams(1.0, 0.8, STRAT)
    p = sample_path(6, 0.0, 5.0, 1e-4)
    t, g, tau = g_series(params, p, 0.4, 5.0)
    assert tau[-1] == pytest.approx(np.trapezoid(g, t), rel=1e-4)
