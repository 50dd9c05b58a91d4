"""Empirical stationary measures of stochastic LV systems.

Time-average measures are sampled through the decomposition formula: every
path shares the deterministic trajectory through y0 and only its clock and
logistic factor differ, so one dense deterministic run serves the whole
ensemble.
"""

from __future__ import annotations

import csv
import math
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .decomposition import TimeChangedClock, cone_distance, ensemble_on_flow
from .errors import InsufficientDataError
from .logistic import LogisticParams, stationary_cdf, stationary_moments
from .lv import DenseFlow, LVSystem, integrate_ode, omega_limit_classify, simplex_project
from .paths import sample_path


def path_seed(seed_base: int, index: int) -> int:
    """Counter-based per-path seed, independent of scheduling."""
    return int(np.random.SeedSequence([seed_base, index]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True, eq=False)
class EmpiricalMeasure:
    samples: np.ndarray
    weights: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        s = np.atleast_2d(np.asarray(self.samples, dtype=float))
        w = np.asarray(self.weights, dtype=float)
        if w.shape != (s.shape[0],):
            raise ValueError("one weight per sample required")
        if np.any(w < 0) or np.any(s < 0):
            raise ValueError("samples and weights must be nonnegative")
        total = w.sum()
        if not total > 0:
            raise ValueError("total weight must be positive")
        object.__setattr__(self, "samples", s)
        object.__setattr__(self, "weights", w / total)

    @classmethod
    def uniform(cls, samples, meta=None):
        samples = np.atleast_2d(np.asarray(samples, dtype=float))
        return cls(samples, np.ones(samples.shape[0]), meta or {})

    def __len__(self):
        return self.samples.shape[0]

    def mass(self, mask) -> float:
        return float(self.weights[np.asarray(mask, dtype=bool)].sum())

    def mean(self) -> np.ndarray:
        return self.weights @ self.samples

    def mix(self, other: "EmpiricalMeasure", p: float) -> "EmpiricalMeasure":
        """p * self + (1 - p) * other."""
        return EmpiricalMeasure(np.vstack([self.samples, other.samples]),
                                np.concatenate([p * self.weights, (1 - p) * other.weights]),
                                {"mixture": p})

    def to_csv(self, dest) -> None:
        with open(dest, "w", newline="") as fh:
            w = csv.writer(fh)
            n = self.samples.shape[1]
            w.writerow([f"y{i + 1}" for i in range(n)] + ["weight"])
            for row, wt in zip(self.samples, self.weights):
                w.writerow([repr(float(v)) for v in row] + [repr(float(wt))])

    def summary(self) -> dict:
        return {"size": len(self), "mean": self.mean().tolist(),
                "meta": {k: v for k, v in self.meta.items() if _jsonable(v)}}

    def to_json(self, dest) -> None:
        with open(dest, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)


def _jsonable(v) -> bool:
    try:
        json.dumps(v)
    except TypeError:
        return False
    return True


@dataclass(frozen=True)
class RayLaw:
    """Law of u(omega) * anchor; its distribution function is ray_cdf."""

    anchor: np.ndarray
    params: LogisticParams

    def __post_init__(self):
        a = np.asarray(self.anchor, dtype=float)
        if np.any(a < 0) or not np.any(a > 0):
            raise ValueError("anchor must be nonnegative and nonzero")
        object.__setattr__(self, "anchor", a)


def ray_cdf(law: RayLaw, y) -> float:
    """P(u anchor <= y componentwise) = F(min over supported i of y_i / p_i)."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("y must be nonnegative")
    supported = law.anchor > 0
    m = float(np.min(y[supported] / law.anchor[supported]))
    return float(stationary_cdf(law.params, m))


def ks_distance(sample, reference) -> float:
    """Kolmogorov-Smirnov sup distance.

    ``reference`` is either a CDF callable (one-sample statistic) or a second
    sample (two-sample statistic).
    """
    x = np.sort(np.asarray(sample, dtype=float).ravel())
    n = x.size
    if n == 0:
        raise InsufficientDataError("empty sample")
    if callable(reference):
        F = np.asarray(reference(x), dtype=float)
        i = np.arange(1, n + 1)
        return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    y = np.sort(np.asarray(reference, dtype=float).ravel())
    if y.size == 0:
        raise InsufficientDataError("empty reference sample")
    grid = np.concatenate([x, y])
    fx = np.searchsorted(x, grid, side="right") / n
    fy = np.searchsorted(y, grid, side="right") / y.size
    return float(np.max(np.abs(fx - fy)))


def _clocks(system: LVSystem, T: float, step: float, path_count: int, seed_base: int,
            threads: int = 1):
    params = system.logistic
    horizon = math.ceil(T / step - 1e-9) * step  # first grid time at or beyond T

    def one(i):
        p = sample_path(path_seed(seed_base, i), 0.0, horizon, step)
        return TimeChangedClock.build(params, p, horizon)

    if threads > 1:
        with ThreadPoolExecutor(threads) as ex:
            return list(ex.map(one, range(path_count)))
    return [one(i) for i in range(path_count)]


def empirical_time_average(system: LVSystem, y0, T: float, path_count: int,
                           burn_in: float | None = None, samples_per_path: int = 100,
                           step: float = 1e-2, seed_base: int = 0, flow_step: float = 1e-2,
                           log_coords: bool = False, threads: int = 1) -> EmpiricalMeasure:
    """Pooled time-average measure of Phi(t, omega, y0) over (burn_in, T].

    Each of ``path_count`` independent paths contributes ``samples_per_path``
    equally spaced samples in (burn_in, T], all with equal weight.
    """
    y0 = np.asarray(y0, dtype=float)
    burn = T / 5.0 if burn_in is None else burn_in
    if not 0 <= burn < T:
        raise ValueError("need 0 <= burn_in < T")
    sample_times = burn + (T - burn) * np.arange(1, samples_per_path + 1) / samples_per_path
    clocks = _clocks(system, T, step, path_count, seed_base, threads)
    horizon = max(c.tau[-1] for c in clocks)
    flow = DenseFlow(system, y0, horizon, flow_step, log_coords)
    states = ensemble_on_flow(flow, clocks, sample_times)
    samples = states.reshape(-1, system.n)
    meta = {"system": system.name, "y0": y0.tolist(), "T": T, "burn_in": burn,
            "path_count": path_count, "samples_per_path": samples_per_path,
            "seed_base": seed_base, "sigma": system.sigma}
    return EmpiricalMeasure.uniform(samples, meta)


def ray_distance(anchor, samples) -> np.ndarray:
    """Simplex-metric distance of each sample to the ray through ``anchor``."""
    return np.linalg.norm(simplex_project(samples) - simplex_project(anchor), axis=-1)


def radial_coordinate(anchor, samples) -> np.ndarray:
    """Scalar lambda with sample ~ lambda * anchor (sum ratio)."""
    anchor = np.asarray(anchor, dtype=float)
    return np.asarray(samples).sum(axis=-1) / anchor.sum()


def axes_distance(samples) -> np.ndarray:
    p = simplex_project(samples)
    n = p.shape[-1]
    return np.linalg.norm(p[:, None, :] - np.eye(n)[None], axis=2).min(axis=1)


def support_diagnostics(measure: EmpiricalMeasure, geometry: dict,
                        tolerance: float = 1e-3) -> dict:
    """Mass of ``measure`` within ``tolerance`` (simplex metric) of named sets.

    ``geometry`` keys: ``ray`` (anchor point), ``cone`` (reference states),
    ``axes`` (any value), ``boundary-planes`` (any value).  The planes entry
    counts mass near a coordinate plane but away from the axes.
    """
    s = measure.samples
    nonzero = s.sum(axis=1) > 0
    report = {}
    if "ray" in geometry:
        d = np.full(len(s), 0.0)
        d[nonzero] = ray_distance(geometry["ray"], s[nonzero])
        report["ray"] = measure.mass(d <= tolerance)
    if "cone" in geometry:
        d = np.full(len(s), 0.0)
        d[nonzero] = cone_distance(geometry["cone"], s[nonzero])
        report["cone"] = measure.mass(d <= tolerance)
    if "axes" in geometry or "boundary-planes" in geometry:
        d_ax = np.full(len(s), 0.0)
        d_ax[nonzero] = axes_distance(s[nonzero])
        near_axis = d_ax <= tolerance
        if "axes" in geometry:
            report["axes"] = measure.mass(near_axis)
        if "boundary-planes" in geometry:
            p = np.zeros_like(s)
            p[nonzero] = simplex_project(s[nonzero])
            near_plane = p.min(axis=1) <= tolerance
            report["boundary-planes"] = measure.mass(near_plane & ~near_axis)
            report["interior"] = measure.mass(~near_plane)
    return report


def mass_outside_ball(measure: EmpiricalMeasure, R: float) -> float:
    return measure.mass(np.linalg.norm(measure.samples, axis=1) > R)


@dataclass(frozen=True, eq=False)
class PeriodicOrbit:
    """One period of a deterministic closed orbit, finely sampled."""

    times: np.ndarray
    states: np.ndarray
    period: float

    @classmethod
    def from_system(cls, system: LVSystem, y0, settle: float = 200.0, step: float = 1e-3,
                    max_period: float = 1000.0) -> "PeriodicOrbit":
        tr = integrate_ode(system, y0, settle + max_period, step)
        om = omega_limit_classify(tr, tail_fraction=max_period / (settle + max_period))
        if om.kind != "periodic":
            raise InsufficientDataError(f"trajectory from {y0} is not periodic ({om.kind})")
        k0 = int(round(settle / step))
        k1 = k0 + int(round(om.period / step))
        period = om.period
        return cls(tr.times[k0:k1 + 1] - tr.times[k0], tr.states[k0:k1 + 1].copy(), period)

    def phase(self, states) -> np.ndarray:
        """Orbit time parameter / period of the nearest orbit point (simplex metric)."""
        ref = simplex_project(self.states)
        p = simplex_project(np.atleast_2d(states))
        out = np.empty(p.shape[0])
        for k in range(0, p.shape[0], 2048):
            blk = p[k:k + 2048]
            idx = np.linalg.norm(blk[:, None, :] - ref[None], axis=2).argmin(axis=1)
            out[k:k + 2048] = self.times[idx] / self.period
        return np.mod(out, 1.0)

    def distance(self, states) -> np.ndarray:
        return cone_distance(self.states, states)


def phase_ks(orbit: PeriodicOrbit, measure: EmpiricalMeasure) -> float:
    """KS distance of the phase marginal to the uniform (Haar) law on the orbit."""
    return ks_distance(orbit.phase(measure.samples), lambda x: np.clip(x, 0.0, 1.0))


@dataclass(frozen=True)
class SweepRow:
    sigma: float
    mean: list
    mean_distance: float
    radial_std: float
    ball_mass: float
    phase_ks: float | None = None
    orbit_distance: float | None = None

    def as_dict(self) -> dict:
        return dict(self.__dict__)


def sigma_sweep(system: LVSystem, y0, sigmas, T: float, path_count: int,
                samples_per_path: int = 100, ball_radius: float = 0.1, seed_base: int = 0,
                step: float = 1e-2, anchor=None, orbit: PeriodicOrbit | None = None,
                threads: int = 1) -> list[SweepRow]:
    """Summaries of the time-average measure across decreasing noise levels.

    The deterministic omega-limit of y0 decides the reference: an equilibrium
    anchor P (mean distance, radial spread, mass of B(P, ball_radius)) or a
    closed orbit (phase-marginal KS against the Haar law, distance of the
    samples' projections to the orbit).
    """
    sigmas = [float(s) for s in sigmas]
    if any(s <= 0 for s in sigmas) or sigmas != sorted(sigmas, reverse=True):
        raise ValueError("sigmas must be positive and decreasing")
    y0 = np.asarray(y0, dtype=float)
    if anchor is None and orbit is None:
        om = omega_limit_classify(integrate_ode(system, y0, max(T, 200.0), 1e-2))
        if om.kind == "converges_to_equilibrium":
            anchor = om.point
        elif om.kind == "periodic":
            orbit = PeriodicOrbit.from_system(system, y0)
        else:
            raise InsufficientDataError(f"omega-limit of y0 is {om.kind}")
    rows = []
    for s in sigmas:
        m = empirical_time_average(system.with_sigma(s), y0, T, path_count,
                                   samples_per_path=samples_per_path, step=step,
                                   seed_base=seed_base, threads=threads)
        mean = m.mean()
        if anchor is not None:
            a = np.asarray(anchor, dtype=float)
            lam = radial_coordinate(a, m.samples)
            rows.append(SweepRow(s, mean.tolist(), float(np.linalg.norm(mean - a)),
                                 float(np.sqrt(m.weights @ (lam - m.weights @ lam) ** 2)),
                                 m.mass(np.linalg.norm(m.samples - a, axis=1) < ball_radius)))
        else:
            rows.append(SweepRow(s, mean.tolist(), float("nan"), float("nan"), float("nan"),
                                 phase_ks(orbit, m), float(np.mean(orbit.distance(m.samples)))))
    return rows


def gamma_radial_std(params: LogisticParams, anchor) -> float:
    """Closed-form std of |u anchor| along the ray, sigma / sqrt(2 r) for Stratonovich."""
    _, var = stationary_moments(params)
    return float(np.sqrt(var))
