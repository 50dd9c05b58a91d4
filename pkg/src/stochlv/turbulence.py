"""Dwell times near the saddles of a heteroclinic cycle and the resulting
nonuniqueness of time averages.

Dwell sets are balls A_i = {y in simplex: |y - R_i| < radius} around the
vertices; cone membership of a state is decided on its simplex projection.
Because Phi(t) = g(t) Psi(tau(t), y), a stochastic state lies in the cone
over A_i exactly when tau(t) falls in one of the deterministic dwell
intervals, so stochastic occupation times follow from stopping times alone.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .decomposition import TimeChangedClock, stopping_time
from .errors import InsufficientDataError
from .lv import LVSystem, Trajectory, integrate_ode, simplex_project
from .measures import path_seed
from .paths import sample_path

DEFAULT_RADIUS = 0.5
REFINE_RTOL = 1e-6


@dataclass(frozen=True)
class DwellRecord:
    center_index: int  # 1-based
    radius: float
    entries: tuple  # complete (T_in, T_out) pairs
    open_entry: float | None = None  # entered, not left by the end of the record

    def __post_init__(self):
        flat = [t for pair in self.entries for t in pair]
        if any(b <= a for a, b in zip(flat, flat[1:])):
            raise ValueError("entry/exit times must be strictly increasing")

    @property
    def cycle_count(self) -> int:
        return len(self.entries)

    @property
    def t_in(self) -> np.ndarray:
        return np.array([a for a, _ in self.entries])

    @property
    def t_out(self) -> np.ndarray:
        return np.array([b for _, b in self.entries])

    def occupancy(self, T: float) -> float:
        """(1/T) * time spent in the dwell set during [0, T]."""
        if not T > 0:
            raise ValueError("T must be positive")
        total = sum(min(b, T) - min(a, T) for a, b in self.entries)
        if self.open_entry is not None:
            total += max(T - self.open_entry, 0.0)
        return total / T


def _log_projection(z: np.ndarray) -> np.ndarray:
    m = z.max(axis=-1, keepdims=True)
    e = np.exp(z - m)
    return e / e.sum(axis=-1, keepdims=True)


def _projections(trajectory: Trajectory) -> np.ndarray:
    logs = trajectory.meta.get("log_states")
    if logs is not None:
        return _log_projection(logs)
    return simplex_project(trajectory.states)


def _refine(system, trajectory, k, center, radius, lo_inside):
    """Bisect the crossing in (t_k, t_{k+1}) with RK4 sub-steps from sample k."""
    t0, t1 = trajectory.times[k], trajectory.times[k + 1]
    logs = trajectory.meta.get("log_states")
    n = system.n
    out = np.empty((2, n))
    if logs is not None:
        z0 = logs[k]
        mask = np.isfinite(z0)
        z0 = np.where(mask, z0, 0.0)

        def proj(s):
            _kernels.rk4_log_steps(system.A, system.r, z0, mask, np.array([s]), out)
            return _log_projection(np.where(mask, out[1], -np.inf))
    else:
        y0 = trajectory.states[k]

        def proj(s):
            _kernels.rk4_steps(system.A, system.r, y0, np.array([s]), out)
            return simplex_project(np.maximum(out[1], 0.0))

    a, b = 0.0, t1 - t0
    tol = REFINE_RTOL * max(t0, 1.0)
    while b - a > tol:
        mid = 0.5 * (a + b)
        inside = np.linalg.norm(proj(mid) - center) < radius
        if inside == lo_inside:
            a = mid
        else:
            b = mid
    return t0 + 0.5 * (a + b)


def dwell_times(trajectory: Trajectory, center, radius: float = DEFAULT_RADIUS,
                system: LVSystem | None = None) -> DwellRecord:
    """Entry/exit times of the simplex-projected trajectory for the ball B(center, radius).

    Crossings are located by sign changes between samples.  With ``system``
    they are refined by bisection on RK4 sub-steps to 1e-6 relative;
    otherwise linearly interpolated.  No crossing at all gives an empty
    record (or a single open entry when the trajectory starts inside).
    """
    if not 0 < radius < 1:
        raise ValueError("radius must lie in (0, 1)")
    center = np.asarray(center, dtype=float)
    hits = np.flatnonzero(np.isclose(center, 1.0))
    index = int(hits[0]) + 1 if hits.size == 1 and np.isclose(center.sum(), 1.0) else 0
    times = trajectory.times
    d = np.linalg.norm(_projections(trajectory) - center, axis=1) - radius
    inside = d < 0
    change = np.flatnonzero(inside[1:] != inside[:-1])
    crossings = []
    for k in change:
        if system is not None:
            t = _refine(system, trajectory, k, center, radius, bool(inside[k]))
        else:
            w = d[k] / (d[k] - d[k + 1])
            t = times[k] + w * (times[k + 1] - times[k])
        crossings.append(t)
    events = ([times[0]] if inside[0] else []) + crossings
    entries = tuple((events[i], events[i + 1]) for i in range(0, len(events) - 1, 2))
    open_entry = events[-1] if len(events) % 2 else None
    return DwellRecord(index, float(radius), entries, open_entry)


def dwell_fraction(record: DwellRecord) -> np.ndarray:
    """(T_out^n - T_in^n) / T_out^n for each complete visit."""
    if record.cycle_count < 3:
        raise InsufficientDataError(f"{record.cycle_count} complete visits; need >= 3")
    t_in, t_out = record.t_in, record.t_out
    return (t_out - t_in) / t_out


def vertex_records(trajectory: Trajectory, radius: float = DEFAULT_RADIUS,
                   system: LVSystem | None = None) -> list[DwellRecord]:
    n = trajectory.states.shape[1]
    return [dwell_times(trajectory, np.eye(n)[i], radius, system) for i in range(n)]


def _following_visits(records: list[DwellRecord], index: int):
    """S^n: the last visit to another ball before the (n+1)-th entry into A_index."""
    own = records[index - 1]
    others = sorted(p for r in records if r.center_index != index for p in r.entries)
    t_in_next = list(own.t_in[1:]) + [math.inf]
    out = []
    for (_, t_out), nxt in zip(own.entries, t_in_next):
        between = [p for p in others if p[0] > t_out and p[1] < nxt]
        out.append(between[-1] if between and nxt < math.inf else None)
    return out


def _clock_occupancy(bounds_t: np.ndarray, T: np.ndarray) -> np.ndarray:
    """(1/T) sum_i (t2^i ^ T - t1^i ^ T) for a (visits, 2) array of clock times."""
    T = np.asarray(T, dtype=float)
    t1 = bounds_t[:, 0][None, :]
    t2 = bounds_t[:, 1][None, :]
    Tc = T[:, None]
    return (np.minimum(t2, Tc) - np.minimum(t1, Tc)).sum(axis=1) / T


@dataclass
class NonuniqueResult:
    center_index: int
    radius: float
    n: np.ndarray
    t_in: np.ndarray
    t_out: np.ndarray
    s_in: np.ndarray
    s_out: np.ndarray
    fraction: np.ndarray
    det_avg_T: np.ndarray
    det_avg_S: np.ndarray
    sto_avg_T: np.ndarray | None = None  # deterministic-time variant
    sto_avg_S: np.ndarray | None = None
    sto_stop_T: np.ndarray | None = None  # stopping-time variant
    sto_stop_S: np.ndarray | None = None
    sto_se_T: np.ndarray | None = None
    sto_se_S: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def gap(self, stochastic: bool = False) -> np.ndarray:
        if stochastic:
            return self.sto_avg_T - self.sto_avg_S
        return self.det_avg_T - self.det_avg_S

    def resolvable(self, stochastic: bool = False) -> np.ndarray:
        """Mask of the n with both subsequence averages available."""
        g = self.gap(stochastic)
        return np.isfinite(g)

    def to_csv(self, dest) -> None:
        with open(dest, "w", newline="") as fh:
            w = csv.writer(fh)
            cols = ["n", "T_in", "T_out", "fraction", "avg_at_Tout", "avg_at_Sout"]
            stochastic = self.sto_avg_T is not None
            if stochastic:
                cols += ["sto_avg_at_Tout", "sto_avg_at_Sout", "stop_avg_at_Tout",
                         "stop_avg_at_Sout"]
            w.writerow(cols)
            for k in range(len(self.n)):
                row = [int(self.n[k]), self.t_in[k], self.t_out[k], self.fraction[k],
                       self.det_avg_T[k], self.det_avg_S[k]]
                if stochastic:
                    row += [self.sto_avg_T[k], self.sto_avg_S[k], self.sto_stop_T[k],
                            self.sto_stop_S[k]]
                w.writerow([v if isinstance(v, int) else repr(float(v)) for v in row])

    def summary(self) -> dict:
        out = {"center": self.center_index, "radius": self.radius, "meta": self.meta}
        for label, stochastic in (("deterministic", False), ("stochastic", True)):
            if stochastic and self.sto_avg_T is None:
                continue
            ok = self.resolvable(stochastic)
            if not ok.any():
                continue
            k = int(np.flatnonzero(ok)[-1])
            T = self.sto_avg_T if stochastic else self.det_avg_T
            S = self.sto_avg_S if stochastic else self.det_avg_S
            out[label] = {"n": int(self.n[k]), "avg_at_Tout": float(T[k]),
                          "avg_at_Sout": float(S[k]), "gap": float(T[k] - S[k])}
        return out

    def to_json(self, dest) -> None:
        with open(dest, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)


def nonunique_time_averages(system: LVSystem, y0, path_count: int, horizon: float,
                            center_index: int = 1, radius: float = DEFAULT_RADIUS,
                            ode_step: float = 1e-2, path_step: float = 2e-2,
                            seed_base: int = 0, g0: float = 1.0) -> NonuniqueResult:
    """Averages of the indicator of the cone over A_i at T_out^n and at S_out^n.

    The subsequence times come from the deterministic trajectory through y0
    on [0, horizon].  With sigma > 0 and ``path_count`` > 0 the expectation
    over noise paths is estimated as well, both at the deterministic times
    (deterministic-time variant) and at the random times
    t^n = stopping_time(T_out^n) resp. stopping_time(S_out^n) (stopping-time
    variant).  Entries not covered by a path's clock are NaN.
    """
    y0 = np.asarray(y0, dtype=float)
    if np.any(y0 <= 0):
        raise ValueError("y0 must be interior")
    traj = integrate_ode(system, y0, horizon, ode_step, log_coords=True)
    records = vertex_records(traj, radius, system)
    own = records[center_index - 1]
    if own.cycle_count < 1:
        raise InsufficientDataError(f"no complete visit to A_{center_index} by t = {horizon}")
    follow = _following_visits(records, center_index)
    t_in, t_out = own.t_in, own.t_out
    s_in = np.array([p[0] if p else np.nan for p in follow])
    s_out = np.array([p[1] if p else np.nan for p in follow])
    nvis = own.cycle_count
    det_T = np.array([own.occupancy(t) for t in t_out])
    det_S = np.array([own.occupancy(t) if np.isfinite(t) else np.nan for t in s_out])
    result = NonuniqueResult(center_index, radius, np.arange(1, nvis + 1), t_in, t_out,
                             s_in, s_out, (t_out - t_in) / t_out, det_T, det_S,
                             meta={"system": system.name, "y0": y0.tolist(),
                                   "horizon": horizon, "sigma": system.sigma,
                                   "path_count": path_count, "seed_base": seed_base})
    if system.sigma == 0 or path_count == 0:
        return result

    bounds = np.array(own.entries)  # in deterministic (clock) time
    targets_T, targets_S = t_out, s_out
    finite_S = np.where(np.isfinite(targets_S), targets_S, np.inf)
    need = float(np.nanmax(np.concatenate([targets_T, s_out])))
    path_T = math.ceil(1.2 * need / path_step) * path_step
    avgT = np.zeros((path_count, nvis))
    avgS = np.zeros((path_count, nvis))
    stopT = np.zeros((path_count, nvis))
    stopS = np.zeros((path_count, nvis))
    params = system.logistic
    for p in range(path_count):
        path = sample_path(path_seed(seed_base, p), 0.0, path_T, path_step)
        clock = TimeChangedClock.build(params, path, path_T, g0)
        top = clock.tau[-1]
        bt = np.where(bounds <= top, stopping_time(clock, np.minimum(bounds, top)), np.inf)
        # deterministic-time variant: windows [0, T_out^n] and [0, S_out^n] in real time
        okT = targets_T <= path_T
        okS = finite_S <= path_T
        avgT[p] = np.where(okT, _clock_occupancy(bt, np.minimum(targets_T, path_T)), np.nan)
        avgS[p] = np.where(okS, _clock_occupancy(bt, np.minimum(finite_S, path_T)), np.nan)
        # stopping-time variant: windows end when the clock reads T_out^n / S_out^n
        sT = np.where(targets_T <= top, stopping_time(clock, np.minimum(targets_T, top)), np.nan)
        sS = np.where(finite_S <= top, stopping_time(clock, np.minimum(finite_S, top)), np.nan)
        stopT[p] = np.where(np.isfinite(sT), _clock_occupancy(bt, np.nan_to_num(sT, nan=1.0)),
                            np.nan)
        stopS[p] = np.where(np.isfinite(sS), _clock_occupancy(bt, np.nan_to_num(sS, nan=1.0)),
                            np.nan)

    def mean(a):
        # a column is resolvable only if every path covers it
        bad = np.isnan(a).any(axis=0)
        m = np.where(bad, np.nan, np.nanmean(np.where(np.isnan(a), 0.0, a), axis=0))
        return m

    result.sto_avg_T, result.sto_avg_S = mean(avgT), mean(avgS)
    result.sto_stop_T, result.sto_stop_S = mean(stopT), mean(stopS)
    result.sto_se_T = avgT.std(axis=0, ddof=1) / math.sqrt(path_count) if path_count > 1 else None
    result.sto_se_S = avgS.std(axis=0, ddof=1) / math.sqrt(path_count) if path_count > 1 else None
    result.meta["path_step"] = path_step
    return result
