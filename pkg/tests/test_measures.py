import json

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate, special, stats

from stochlv.errors import InsufficientDataError
from stochlv.logistic import LogisticParams, stationary_cdf
from stochlv.measures import (EmpiricalMeasure, PeriodicOrbit, RayLaw, empirical_time_average,
                              gamma_radial_std, ks_distance, mass_outside_ball, path_seed,
                              radial_coordinate, ray_cdf, sigma_sweep, support_diagnostics)
from stochlv.presets import preset


# -- KS distance -------------------------------------------------------------

@pytest.mark.parametrize("c", [0.2, 1.0, 3.0])
def test_ks_of_constant_sample(c):
    F = stats.expon.cdf
    assert ks_distance(np.full(50, c), F) == pytest.approx(max(F(c), 1 - F(c)), abs=1e-15)


def test_ks_two_sample_identical_is_zero(rng):
    x = rng.normal(size=200)
    assert ks_distance(x, x.copy()) == 0.0


def test_ks_matches_scipy(rng):
    x = rng.gamma(2.0, size=300)
    assert ks_distance(x, stats.gamma(2.0).cdf) == pytest.approx(
        stats.kstest(x, stats.gamma(2.0).cdf).statistic, abs=1e-14)
    y = rng.gamma(2.5, size=170)
    assert ks_distance(x, y) == pytest.approx(stats.ks_2samp(x, y).statistic, abs=1e-14)


def test_ks_typical_size_under_null(rng):
    N = 400
    d = [ks_distance(rng.uniform(size=N), lambda x: x) for _ in range(20)]
    assert np.median(d) < 1.63 / np.sqrt(N)


def test_ks_rejects_empty():
    with pytest.raises(InsufficientDataError):
        ks_distance([], lambda x: x)


# -- ray law -----------------------------------------------------------------

def test_ray_cdf_limits_and_gamma_oracle():
    params = LogisticParams(1.0, 0.5)
    P = np.array([1.0, 1.0, 1.0]) / 3.1
    law = RayLaw(P, params)
    assert ray_cdf(law, np.zeros(3)) == 0.0
    assert ray_cdf(law, np.full(3, 1e3)) == pytest.approx(1.0, abs=1e-12)
    k = 2 * params.r / params.sigma**2
    y = np.array([0.4, 0.3, 0.5])
    m = np.min(y / P)
    dens = lambda x: k**k * x ** (k - 1) * np.exp(-k * x) / special.gamma(k)
    assert ray_cdf(law, y) == pytest.approx(integrate.quad(dens, 0, m)[0], rel=1e-8)
    assert ray_cdf(law, y) == pytest.approx(special.gammainc(k, k * m), rel=1e-12)


@given(scale=st.floats(0.05, 20.0))
def test_ray_cdf_scales_with_anchor(scale):
    params = LogisticParams(1.0, 0.7)
    P = np.array([0.2, 0.5, 0.0])
    y = np.array([0.3, 0.4, 0.1])
    assert ray_cdf(RayLaw(scale * P, params), scale * y) == pytest.approx(
        ray_cdf(RayLaw(P, params), y), rel=1e-12)


# -- measure container -------------------------------------------------------

def test_measure_normalization_and_mixture():
    a = EmpiricalMeasure(np.array([[1.0, 0.0], [0.0, 1.0]]), np.array([1.0, 3.0]))
    b = EmpiricalMeasure.uniform([[2.0, 2.0]])
    assert a.weights.sum() == pytest.approx(1.0)
    m = a.mix(b, 0.25)
    assert m.weights.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(m.mean(), 0.25 * a.mean() + 0.75 * b.mean())
    with pytest.raises(ValueError):
        EmpiricalMeasure(np.ones((2, 2)), np.zeros(2))


def test_measure_exports(tmp_path):
    m = EmpiricalMeasure.uniform([[0.1, 0.2, 0.3], [0.3, 0.2, 0.1]], {"T": 5.0})
    m.to_csv(tmp_path / "m.csv")
    m.to_json(tmp_path / "m.json")
    lines = (tmp_path / "m.csv").read_text().splitlines()
    assert lines[0] == "y1,y2,y3,weight" and len(lines) == 3
    back = np.loadtxt(tmp_path / "m.csv", delimiter=",", skiprows=1)
    np.testing.assert_array_equal(back[:, :3], m.samples)
    assert json.loads((tmp_path / "m.json").read_text())["meta"] == {"T": 5.0}


def test_path_seeds_are_distinct_and_stable():
    seeds = [path_seed(3, i) for i in range(1000)]
    assert len(set(seeds)) == 1000
    assert path_seed(3, 17) == seeds[17]


# -- time averages -----------------------------------------------------------

def test_noiseless_measure_at_equilibrium_is_a_point_mass():
    s = preset("example-4.1")
    P = np.array([0.2, 0.5, 0.3])
    m = empirical_time_average(s, P, 20.0, path_count=2, samples_per_path=20)
    np.testing.assert_allclose(m.samples, np.broadcast_to(P, m.samples.shape), atol=1e-12)


def test_measure_is_deterministic_in_seed():
    s = preset("example-4.1", sigma=0.5)
    a = empirical_time_average(s, [0.5, 0.3, 0.4], 20.0, 3, samples_per_path=10, seed_base=9)
    b = empirical_time_average(s, [0.5, 0.3, 0.4], 20.0, 3, samples_per_path=10, seed_base=9)
    np.testing.assert_array_equal(a.samples, b.samples)


def test_ray_support_and_gamma_radial_law():
    s = preset("example-4.1", sigma=0.5)
    y0 = np.array([0.5, 0.3, 0.4])
    P = y0 / y0.sum()
    m = empirical_time_average(s, y0, 200.0, 30, samples_per_path=100, seed_base=1)
    assert support_diagnostics(m, {"ray": P}, 1e-3)["ray"] > 0.99
    lam = radial_coordinate(P, m.samples)
    assert ks_distance(lam, lambda x: stationary_cdf(s.logistic, x)) < 0.03


def test_same_ray_starts_give_same_law():
    s = preset("example-4.1", sigma=0.5)
    y0 = np.array([0.5, 0.3, 0.4])
    P = y0 / y0.sum()
    a = empirical_time_average(s, y0, 200.0, 30, seed_base=2)
    b = empirical_time_average(s, 3.0 * y0, 200.0, 30, seed_base=3)
    assert ks_distance(radial_coordinate(P, a.samples), radial_coordinate(P, b.samples)) < 0.03


def test_cone_support_for_closed_orbit():
    s = preset("example-4.3", sigma=0.3)
    y0 = np.array([0.3, 0.3, 0.3])
    orbit = PeriodicOrbit.from_system(s.with_sigma(0.0), y0)
    m = empirical_time_average(s, y0, 60.0, 5, samples_per_path=100, seed_base=4)
    assert support_diagnostics(m, {"cone": orbit.states}, 1e-2)["cone"] > 0.99


def test_tightness_proxy():
    s = preset("may-leonard-0.8-1.3", sigma=0.3)
    m = empirical_time_average(s, [0.5, 0.3, 0.2], 200.0, 10, seed_base=5, log_coords=True)
    masses = [mass_outside_ball(m, R) for R in (1.0, 2.0, 4.0, 8.0)]
    assert all(a >= b for a, b in zip(masses, masses[1:]))
    assert masses[-1] < 1e-3


def test_radial_spread_scales_with_noise():
    s = preset("example-4.1")
    y0 = np.array([0.5, 0.3, 0.4])
    P = y0 / y0.sum()
    rows = sigma_sweep(s, y0, [0.4, 0.2, 0.1], 200.0, 20, seed_base=6, anchor=P)
    stds = [r.radial_std for r in rows]
    assert stds[0] / stds[1] == pytest.approx(2.0, rel=0.15)
    assert stds[1] / stds[2] == pytest.approx(2.0, rel=0.15)
    for r in rows:
        assert r.radial_std == pytest.approx(gamma_radial_std(s.with_sigma(r.sigma).logistic, P),
                                             rel=0.15)
    balls = [r.ball_mass for r in rows]
    assert balls[0] < balls[1] < balls[2]


def test_sweep_rejects_increasing_sigmas():
    with pytest.raises(ValueError):
        sigma_sweep(preset("example-4.1"), [0.3, 0.3, 0.3], [0.1, 0.2], 10.0, 2)
