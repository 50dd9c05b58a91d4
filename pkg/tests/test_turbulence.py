import csv

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochlv.errors import InsufficientDataError
from stochlv.lv import LVSystem, Trajectory, integrate_ode, simplex_project
from stochlv.measures import PeriodicOrbit
from stochlv.presets import may_leonard
from stochlv.turbulence import (DwellRecord, dwell_fraction, dwell_times,
                                nonunique_time_averages, vertex_records)

R1 = np.array([1.0, 0.0, 0.0])
# saddle ratio of May-Leonard(0.8, 1.3): contraction beta / expansion alpha
NU = 0.3 / 0.2


@pytest.fixture(scope="module")
def ml_long():
    s = may_leonard(0.8, 1.3)
    tr = integrate_ode(s, [0.5, 0.3, 0.2], 40000.0, 2e-2, log_coords=True)
    return s, tr, vertex_records(tr, 0.5, s)


@pytest.fixture(scope="module")
def ml_3000():
    s = may_leonard(0.8, 1.3)
    tr = integrate_ode(s, [0.5, 0.3, 0.2], 3000.0, 1e-2, log_coords=True)
    return s, tr


def _constant(y, n=50):
    return Trajectory(np.linspace(0, 10, n), np.tile(y, (n, 1)))


def test_constant_inside_gives_single_open_entry():
    rec = dwell_times(_constant([0.9, 0.05, 0.05]), R1)
    assert rec.cycle_count == 0 and rec.open_entry == 0.0 and rec.center_index == 1


def test_constant_outside_gives_empty_record():
    rec = dwell_times(_constant([0.1, 0.45, 0.45]), R1)
    assert rec.cycle_count == 0 and rec.open_entry is None


def test_radius_must_be_in_unit_interval():
    with pytest.raises(ValueError):
        dwell_times(_constant([0.9, 0.05, 0.05]), R1, radius=1.5)


def test_record_rejects_unordered_times():
    with pytest.raises(ValueError):
        DwellRecord(1, 0.5, ((1.0, 2.0), (1.5, 3.0)))


@given(st.lists(st.floats(0.0, 1.0), min_size=5, max_size=60))
def test_crossings_are_ordered_and_occupancy_is_a_fraction(xs):
    x = np.array(xs)
    states = np.column_stack([x, (1 - x) / 2, (1 - x) / 2]) + 1e-9
    tr = Trajectory(np.arange(len(x), dtype=float), states)
    rec = dwell_times(tr, R1)
    flat = [t for p in rec.entries for t in p]
    assert all(b > a for a, b in zip(flat, flat[1:]))
    assert 0.0 <= rec.occupancy(float(len(x))) <= 1.0


def test_refined_crossings_agree_with_interpolated(ml_3000):
    s, tr = ml_3000
    fine = dwell_times(tr, R1, 0.5, s)
    rough = dwell_times(tr, R1, 0.5)
    np.testing.assert_allclose(fine.t_out, rough.t_out, rtol=1e-5)


def test_six_complete_visits_by_3000(ml_3000):
    # May-Leonard(0.8, 1.3) from (0.5, 0.3, 0.2): visit durations grow by about
    # nu^3 per cycle, so fewer than six fit into [0, 3000]
    s, tr = ml_3000
    rec = dwell_times(tr, R1, 0.5, s)
    d = rec.t_out - rec.t_in
    assert np.all(d[2:] / d[1:-1] > 1.5)
    assert rec.cycle_count >= 6


def test_late_fractions_match_reported_value(ml_long):
    _, _, recs = ml_long
    for rec in recs:
        assert 0.39 <= dwell_fraction(rec)[-1] <= 0.45


def test_fractions_approach_saddle_ratio_limit(ml_long):
    _, _, recs = ml_long
    for rec in recs:
        f = dwell_fraction(rec)
        assert rec.cycle_count >= 6
        assert np.all(np.diff(f[1:]) > 0)
        assert f[-1] == pytest.approx(1 - 1 / NU, abs=0.01)


def test_cycle_time_growth(ml_long):
    _, _, recs = ml_long
    for rec in recs:
        ratio = rec.t_out[1:] / rec.t_out[:-1]
        assert np.all(ratio > 1)
        # the first cycle is a transient from y0; growth increases afterwards
        assert np.all(np.diff(ratio[1:]) > 0)
        assert ratio[-1] == pytest.approx(NU**3, rel=0.05)


def test_boundary_concentration(ml_3000):
    s, tr = ml_3000
    rec = dwell_times(tr, R1, 0.5, s)
    p = simplex_project(tr.states)
    dist = np.linalg.norm(p[:, None, :] - np.eye(3)[None], axis=2).min(axis=1)
    near = np.cumsum(dist < 0.55) * 1e-2
    frac = [near[int(t / 1e-2)] / t for t in rec.t_out]
    assert np.all(np.diff(frac) > 0)
    assert frac[-1] > 0.9


def test_too_few_cycles():
    rec = DwellRecord(1, 0.5, ((1.0, 2.0), (3.0, 4.0)))
    with pytest.raises(InsufficientDataError):
        dwell_fraction(rec)


def test_periodic_negative_control():
    s = may_leonard(0.9, 1.1)
    y0 = [0.9, 0.05, 0.05]
    orbit = PeriodicOrbit.from_system(s, y0)
    inside = np.linalg.norm(simplex_project(orbit.states) - R1, axis=1) < 0.5
    share = inside.mean()  # dwell time per period over the period
    assert 0 < share < 1
    rec = dwell_times(integrate_ode(s, y0, 3000.0, 1e-2), R1, 0.5, s)
    d = rec.t_out - rec.t_in
    # visit durations stay fixed, so the per-visit fraction cannot settle at a
    # positive value; the running occupancy settles at the orbit's share
    np.testing.assert_allclose(d[1:], d[1], rtol=1e-3)
    assert np.all(np.diff(dwell_fraction(rec)) < 0)
    occ = np.array([rec.occupancy(t) for t in rec.t_out])
    err = np.abs(occ - share)
    assert np.all(np.diff(err[1:]) < 0) and err[-1] < 0.01


def test_equilibrium_negative_control():
    # species 1 outcompetes the others; every orbit settles at R1
    s = LVSystem.competitive(1.0, [[1.0, 0.5, 0.5], [2.0, 1.0, 2.0], [2.0, 2.0, 1.0]])
    rec = dwell_times(integrate_ode(s, [0.1, 0.45, 0.45], 5000.0, 1e-2), R1, 0.5, s)
    assert rec.open_entry is not None
    a = np.array([rec.occupancy(100.0 * 2**k) for k in range(6)])
    b = np.array([rec.occupancy(100.0 * 3**k) for k in range(1, 4)])
    assert abs(a[-1] - b[-1]) < 0.01 and abs(a[-1] - 1) < 0.01


@pytest.fixture(scope="module")
def nonunique_det():
    return nonunique_time_averages(may_leonard(0.8, 1.3), [0.5, 0.3, 0.2], 0, 9000.0)


def test_deterministic_subsequence_bounds(nonunique_det):
    r = nonunique_det
    late = (r.n >= 4) & r.resolvable()
    assert late.any()
    assert np.all(r.det_avg_T[late] >= 0.40)
    assert np.all(r.det_avg_S[late] <= 0.36)
    assert np.all(r.gap()[late] >= 0.04)


def test_gap_persists_with_horizon(nonunique_det):
    g = nonunique_det.gap()
    ok = nonunique_det.resolvable()
    assert np.all(np.diff(g[ok][2:]) >= -1e-3)


def test_stochastic_averages_track_deterministic():
    r = nonunique_time_averages(may_leonard(0.8, 1.3, sigma=0.05), [0.5, 0.3, 0.2], 30, 3000.0,
                                seed_base=1)
    ok = r.resolvable(True)
    assert ok.sum() >= 3
    np.testing.assert_allclose(r.sto_avg_T[ok], r.det_avg_T[ok], atol=0.02)
    np.testing.assert_allclose(r.sto_stop_T[ok], r.det_avg_T[ok], atol=0.02)
    assert np.all(r.gap(True)[ok][2:] >= 0.04)


def test_nonunique_exports(tmp_path):
    r = nonunique_time_averages(may_leonard(0.8, 1.3, sigma=0.05), [0.5, 0.3, 0.2], 3, 1000.0)
    r.to_csv(tmp_path / "t.csv")
    r.to_json(tmp_path / "t.json")
    with open(tmp_path / "t.csv") as fh:
        header = next(csv.reader(fh))
    assert header[:6] == ["n", "T_in", "T_out", "fraction", "avg_at_Tout", "avg_at_Sout"]
    assert "gap" in (tmp_path / "t.json").read_text()


def test_nonunique_needs_a_complete_visit():
    with pytest.raises(InsufficientDataError):
        nonunique_time_averages(may_leonard(0.8, 1.3), [0.5, 0.3, 0.2], 0, 20.0)
