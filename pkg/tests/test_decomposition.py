import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochlv.convergence import decomposition_study
from stochlv.decomposition import (TimeChangedClock, cone_distance, cone_membership,
                                   phi_decomposed, phi_decomposed_trajectory, phi_pullback,
                                   stopping_time)
from stochlv.errors import WindowError
from stochlv.logistic import LogisticParams, g_series, u_random_equilibrium
from stochlv.lv import LVSystem, integrate_ode
from stochlv.measures import PeriodicOrbit
from stochlv.paths import sample_path
from stochlv.presets import example_4_3_invariant, preset


def test_noiseless_reduction_to_deterministic_flow():
    s = preset("example-4.3")
    p = sample_path(1, 0.0, 10.0, 0.01)
    clock = TimeChangedClock.build(s.logistic, p, 10.0)
    np.testing.assert_allclose(clock.tau, clock.times, atol=1e-12)
    tr = phi_decomposed_trajectory(s, p, [0.3, 0.3, 0.3], 10.0)
    ref = integrate_ode(s, [0.3, 0.3, 0.3], 10.0, 0.01)
    np.testing.assert_allclose(tr.states, ref.states, atol=1e-10)


def test_equilibrium_factorizes():
    s = preset("example-4.1", sigma=0.6)
    P = np.array([0.2, 0.5, 0.3])
    p = sample_path(3, 0.0, 8.0, 0.01)
    _, g, _ = g_series(s.logistic, p, 1.0, 8.0)
    tr = phi_decomposed_trajectory(s, p, P, 8.0)
    np.testing.assert_allclose(tr.states, g[:, None] * P, rtol=1e-12)


def test_decomposition_matches_milstein_and_converges():
    s = preset("may-leonard-0.8-1.3", sigma=0.3)
    study = decomposition_study(s, sample_path(1, 0.0, 5.0, 1e-3), [0.5, 0.3, 0.2], 5.0)
    assert study.errors[0] < 1e-2
    assert np.all(np.diff(study.errors) < 0)


def test_milstein_closer_than_euler():
    s = preset("may-leonard-0.8-1.3", sigma=0.3)
    p = sample_path(2, 0.0, 5.0, 1e-3)
    mil = decomposition_study(s, p, [0.5, 0.3, 0.2], 5.0, levels=1)
    em = decomposition_study(s, p, [0.5, 0.3, 0.2], 5.0, levels=1, scheme="euler")
    assert mil.errors[0] < em.errors[0]


def test_independent_of_initial_logistic_value():
    s = preset("example-4.3", sigma=0.3)
    p = sample_path(4, 0.0, 5.0, 1e-3)
    a = phi_decomposed(s, p, [0.3, 0.2, 0.4], 5.0, g0=1.0)
    b = phi_decomposed(s, p, [0.3, 0.2, 0.4], 5.0, g0=0.4)
    np.testing.assert_allclose(a, b, rtol=1e-6)


def test_noiseless_pullback_is_forward_flow():
    s = preset("example-4.3")
    p = sample_path(1, -20.0, 0.0, 0.01)
    ref = integrate_ode(s, [0.3, 0.3, 0.3], 20.0, 0.01).states[-1]
    np.testing.assert_allclose(phi_pullback(s, p, [0.3, 0.3, 0.3], 20.0), ref, atol=1e-10)


def test_pullback_converges_to_random_ray_point():
    s = preset("example-4.1", sigma=0.5)
    y0 = np.array([0.5, 0.3, 0.4])
    P = y0 / y0.sum()
    for seed in range(5):
        p = sample_path(seed, -200.0, 0.0, 0.01)
        u = u_random_equilibrium(s.logistic, p, 200.0).value
        d = [np.linalg.norm(phi_pullback(s, p, y0, t) - u * P) for t in (5.0, 10.0, 20.0)]
        assert d[0] > d[1] > d[2]
        # beyond t = 50 the distance sits at rounding level
        for t in (50.0, 100.0, 200.0):
            assert np.linalg.norm(phi_pullback(s, p, y0, t) - u * P) < 1e-12


def test_scalar_pullback_reaches_random_equilibrium():
    params = LogisticParams(1.0, 0.5)
    s = LVSystem(1.0, [[-1.0]], sigma=0.5)
    p = sample_path(7, -200.0, 0.0, 0.01)
    u = u_random_equilibrium(params, p, 200.0).value
    assert abs(phi_pullback(s, p, [0.3], 200.0)[0] - u) < 1e-3


def test_pullback_needs_window():
    s = preset("example-4.1", sigma=0.5)
    with pytest.raises(WindowError):
        phi_pullback(s, sample_path(1, -10.0, 0.0, 0.01), [0.3, 0.3, 0.3], 20.0)


def test_stopping_time_contract(rng):
    params = LogisticParams(1.0, 0.8)
    clock = TimeChangedClock.build(params, sample_path(5, 0.0, 30.0, 0.01), 30.0, 0.5)
    assert stopping_time(clock, 0.0) == 0.0
    a = rng.uniform(0, clock.tau[-1], 100)
    np.testing.assert_allclose(clock(stopping_time(clock, a)), a, atol=1e-9)
    with pytest.raises(WindowError):
        stopping_time(clock, clock.tau[-1] + 1.0)
    flat = TimeChangedClock.build(LogisticParams(1.0, 0.0), sample_path(5, 0.0, 30.0, 0.01), 30.0)
    b = rng.uniform(0, flat.tau[-1], 100)
    np.testing.assert_allclose(stopping_time(flat, b), b, atol=1e-9)


@given(scale=st.floats(1e-3, 1e3), k=st.integers(0, 4))
def test_cone_membership_is_scale_closed(scale, k):
    S = np.array([[1.0, 2.0, 3.0], [0.5, 0.5, 0.1], [2.0, 0.1, 0.1], [1, 1, 1], [0, 1, 2]])
    assert cone_membership(S, S[k])
    assert cone_membership(S, scale * S[k])
    assert cone_membership(S, np.zeros(3))
    assert not cone_membership(S, [1.0, 0.0, 0.0])


def test_stochastic_cone_invariance_on_closed_orbit_cone():
    s = preset("example-4.3", sigma=0.3)
    y0 = np.array([0.3, 0.3, 0.3])
    orbit = PeriodicOrbit.from_system(s.with_sigma(0.0), y0)
    tr = phi_decomposed_trajectory(s, sample_path(8, 0.0, 10.0, 0.01), 2.0 * y0, 10.0)
    assert len(tr) == 1001
    assert np.all(cone_distance(orbit.states, tr.states) < 1e-3)
    h = example_4_3_invariant(tr.states)
    assert np.max(np.abs(h / h[0] - 1)) < 1e-6
