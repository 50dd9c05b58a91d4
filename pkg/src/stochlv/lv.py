"""Deterministic Lotka-Volterra flow dy_i/dt = y_i (r + sum_j a_ij y_j).

The stored matrix always follows this sign convention.  A competitive system
``dy_i = y_i (r - sum_j c_ij y_j)`` with ``c_ij > 0`` is built with
:meth:`LVSystem.competitive`, which stores ``a_ij = -c_ij``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from scipy.optimize import linprog

from . import _kernels
from .errors import DivergenceError, GridError, InsufficientDataError
from .logistic import Calculus, LogisticParams

SINGULAR_TOL = 1e-9
EIG_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class LVSystem:
    r: float
    A: np.ndarray
    sigma: float = 0.0
    calculus: Calculus = Calculus.STRATONOVICH
    name: str = ""

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("A must be a square matrix")
        if not self.r > 0:
            raise ValueError(f"r must be positive, got {self.r}")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "calculus", Calculus(self.calculus))

    @classmethod
    def competitive(cls, r, C, sigma=0.0, calculus=Calculus.STRATONOVICH, name=""):
        """System dy_i = y_i (r - sum_j c_ij y_j) dt (+ noise)."""
        return cls(r=r, A=-np.asarray(C, dtype=float), sigma=sigma,
                   calculus=calculus, name=name)

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def is_competitive(self) -> bool:
        return bool(np.all(-self.A > 0))

    @property
    def logistic(self) -> LogisticParams:
        return LogisticParams(self.r, self.sigma, self.calculus)

    def with_sigma(self, sigma: float) -> "LVSystem":
        return LVSystem(self.r, self.A, sigma, self.calculus, self.name)

    def ito_drift_rate(self) -> float:
        """Growth rate of the equivalent Ito drift (r + sigma^2/2 for Stratonovich)."""
        if self.calculus is Calculus.STRATONOVICH:
            return self.r + 0.5 * self.sigma**2
        return self.r


@dataclass(frozen=True, eq=False)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def __len__(self):
        return self.times.shape[0]


@dataclass(frozen=True, eq=False)
class Equilibrium:
    point: np.ndarray
    support: tuple[int, ...]
    eigenvalues: np.ndarray
    stability: Literal["sink", "source", "saddle", "center-like", "degenerate"]
    # set for continua: affine family point + basis @ c, c in a polytope
    basis: np.ndarray | None = None
    rank_deficiency: int = 0
    endpoints: tuple[np.ndarray, np.ndarray] | None = None

    @property
    def is_continuum(self) -> bool:
        return self.basis is not None

    def describe(self) -> str:
        p = np.array2string(self.point, precision=6)
        if not self.is_continuum:
            return f"{self.stability} at {p}"
        if self.endpoints is not None:
            a, b = (np.array2string(e, precision=6) for e in self.endpoints)
            return f"segment of equilibria from {a} to {b}"
        return (f"{self.rank_deficiency}-parameter family of equilibria on support "
                f"{[i + 1 for i in self.support]} through {p}")


def vector_field(system: LVSystem, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("state must be componentwise nonnegative")
    return y * (system.r + y @ system.A.T)


def jacobian(system: LVSystem, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return np.diag(system.r + system.A @ y) + y[:, None] * system.A


def simplex_project(y) -> np.ndarray:
    """Radial projection y / sum(y) onto the standard simplex (last axis)."""
    y = np.asarray(y, dtype=float)
    s = y.sum(axis=-1, keepdims=True)
    if np.any(s <= 0):
        raise ValueError("cannot project the origin onto the simplex")
    return y / s


def _steps(T: float, step: float) -> np.ndarray:
    if not step > 0:
        raise GridError("step must be positive")
    if T < 0:
        raise GridError("T must be nonnegative")
    k = T / step
    m = int(round(k))
    if abs(k - m) <= 1e-9 * max(1.0, k):
        return np.full(m, float(step))
    m = int(np.floor(k))
    hs = np.full(m + 1, float(step))
    hs[-1] = T - m * step
    return hs


def flow_steps(system: LVSystem, y0, hs, log_coords: bool = False) -> np.ndarray:
    """States after each of the RK4 steps ``hs`` (row 0 is ``y0``)."""
    return _flow(system, y0, hs, log_coords)[0]


def _flow(system: LVSystem, y0, hs, log_coords: bool):
    # (states, log-states or None)
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (system.n,):
        raise ValueError(f"y0 must have shape ({system.n},)")
    if np.any(y0 < 0):
        raise ValueError("y0 must be nonnegative")
    hs = np.ascontiguousarray(hs, dtype=float)
    out = np.empty((hs.shape[0] + 1, system.n))
    if log_coords:
        mask = y0 > 0
        z0 = np.where(mask, np.log(np.where(mask, y0, 1.0)), 0.0)
        status, k = _kernels.rk4_log_steps(system.A, system.r, z0, mask, hs, out)
        states = np.where(mask, np.exp(out), 0.0)
        logs = np.where(mask, out, -np.inf)
    else:
        status, k = _kernels.rk4_steps(system.A, system.r, y0, hs, out)
        states, logs = out, None
    if status == _kernels.DIVERGED:
        raise DivergenceError(f"state norm exceeded 1e12 after {k} steps")
    if status == _kernels.NEGATIVE:
        raise DivergenceError(f"negative state after {k} steps; step too large")
    return states, logs


def integrate_ode(system: LVSystem, y0, T: float, step: float,
                  log_coords: bool = False) -> Trajectory:
    """Classical RK4 trajectory of the deterministic flow on [0, T].

    ``log_coords`` integrates log y_i for the positive coordinates, which
    keeps relative accuracy for coordinates far below 1e-300 never reached in
    linear coordinates (heteroclinic dynamics); the log states are kept in
    ``meta["log_states"]``.
    """
    hs = _steps(T, step)
    states, logs = _flow(system, y0, hs, log_coords)
    times = np.concatenate([[0.0], np.cumsum(hs)])
    meta = {"system": system.name, "step": step, "r": system.r}
    if logs is not None:
        meta["log_states"] = logs  # exact where exp() underflows
    return Trajectory(times, states, meta)


class DenseFlow:
    """Deterministic trajectory on a uniform grid with cubic Hermite interpolation.

    The derivative at each node is the exact vector field, so interpolation
    is fourth-order accurate like the RK4 grid itself.
    """

    def __init__(self, system: LVSystem, y0, horizon: float, step: float = 1e-2,
                 log_coords: bool = False):
        n = max(1, int(np.ceil(horizon / step - 1e-9)))
        self.system = system
        self.step = float(step)
        self.horizon = n * self.step
        self.states = flow_steps(system, y0, np.full(n, self.step), log_coords)
        y = self.states
        self.derivs = y * (system.r + y @ system.A.T)

    def __call__(self, tau) -> np.ndarray:
        tau = np.asarray(tau, dtype=float)
        if np.any(tau < 0) or np.any(tau > self.horizon * (1 + 1e-12)):
            raise GridError(f"times must lie in [0, {self.horizon}]")
        h = self.step
        k = np.minimum((tau / h).astype(np.int64), self.states.shape[0] - 2)
        s = (tau - k * h) / h
        s = s[..., None]
        y0, y1 = self.states[k], self.states[k + 1]
        d0, d1 = self.derivs[k] * h, self.derivs[k + 1] * h
        s2, s3 = s * s, s * s * s
        out = ((2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * d0
               + (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * d1)
        return np.maximum(out, 0.0)


def _stability(eigs: np.ndarray) -> str:
    re, im = eigs.real, eigs.imag
    zero = np.abs(re) < EIG_TOL
    if np.any(zero & (np.abs(im) < EIG_TOL)):
        return "degenerate"
    if np.any(zero):
        return "center-like"
    if np.all(re < 0):
        return "sink"
    if np.all(re > 0):
        return "source"
    return "saddle"


def _positive_point(p: np.ndarray, N: np.ndarray):
    """Point of {p + N c} maximizing the smallest coordinate (LP)."""
    k = N.shape[1]
    # variables (c, t): maximize t s.t. p + N c >= t, t <= 1
    cost = np.zeros(k + 1)
    cost[-1] = -1.0
    A_ub = np.hstack([-N, np.ones((N.shape[0], 1))])
    bounds = [(None, None)] * k + [(None, 1.0)]
    res = linprog(cost, A_ub=A_ub, b_ub=p, bounds=bounds, method="highs")
    if not res.success:
        return None, 0.0
    c = res.x[:k]
    return p + N @ c, res.x[-1]


def _embed(n, S, vals) -> np.ndarray:
    y = np.zeros(n)
    y[list(S)] = vals
    return y


def equilibria(system: LVSystem, include_faces: bool = False) -> list[Equilibrium]:
    """All nonnegative equilibria by enumeration of supports.

    Singular supports yield continua.  A one-parameter family is reported as
    a segment with its endpoints; larger families carry their null-space
    basis.  Equilibria lying in the closure of a larger continuum are merged
    into it unless ``include_faces`` is set.
    """
    n = system.n
    if n > 10:
        raise ValueError("support enumeration limited to n <= 10")
    r, A = system.r, system.A
    found: list[Equilibrium] = []
    origin = np.zeros(n)
    eig0 = np.linalg.eigvals(jacobian(system, origin))
    found.append(Equilibrium(origin, (), eig0, _stability(eig0)))
    for size in range(1, n + 1):
        for S in itertools.combinations(range(n), size):
            M = A[np.ix_(S, S)]
            b = -r * np.ones(size)
            U, sv, Vt = np.linalg.svd(M)
            rank = int(np.sum(sv > SINGULAR_TOL))
            if rank == size:
                ys = np.linalg.solve(M, b)
                if np.all(ys > 0):
                    y = _embed(n, S, ys)
                    eig = np.linalg.eigvals(jacobian(system, y))
                    found.append(Equilibrium(y, S, eig, _stability(eig)))
                continue
            p, *_ = np.linalg.lstsq(M, b, rcond=None)
            if np.linalg.norm(M @ p - b) > SINGULAR_TOL * max(1.0, np.linalg.norm(b)):
                continue
            N = Vt[rank:].T
            q, t = _positive_point(p, N)
            if q is None or t <= 1e-12:
                continue
            deficiency = size - rank
            endpoints = None
            if deficiency == 1:
                v = N[:, 0]
                lo, hi = -np.inf, np.inf
                for pi, vi in zip(p, v):
                    if abs(vi) < 1e-15:
                        continue
                    bound = -pi / vi
                    if vi > 0:
                        lo = max(lo, bound)
                    else:
                        hi = min(hi, bound)
                a_end, b_end = p + lo * v, p + hi * v
                endpoints = (_embed(n, S, np.maximum(a_end, 0.0)),
                             _embed(n, S, np.maximum(b_end, 0.0)))
                q = 0.5 * (a_end + b_end)
            y = _embed(n, S, q)
            eig = np.linalg.eigvals(jacobian(system, y))
            basis = np.zeros((n, deficiency))
            basis[list(S)] = N
            found.append(Equilibrium(y, S, eig, "degenerate", basis=basis,
                                     rank_deficiency=deficiency, endpoints=endpoints))
    if include_faces:
        return found
    return _merge_into_continua(system, found)


def _in_closure(system: LVSystem, e: Equilibrium, fam: Equilibrium) -> bool:
    if not set(e.support) < set(fam.support):
        return False
    S = list(fam.support)
    M = system.A[np.ix_(S, S)]
    b = -system.r * np.ones(len(S))
    tol = 1e-8 * max(1.0, system.r)
    if np.linalg.norm(M @ e.point[S] - b) > tol:
        return False
    if e.basis is not None and np.linalg.norm(M @ e.basis[S]) > tol:
        return False
    return True


def _merge_into_continua(system, found):
    families = [e for e in found if e.is_continuum]
    keep = []
    for e in found:
        if not e.support:
            keep.append(e)
            continue
        if any(f is not e and _in_closure(system, e, f) for f in families):
            continue
        keep.append(e)
    return keep


@dataclass(frozen=True)
class OmegaConfig:
    tail_fraction: float = 0.5
    min_time: float = 100.0
    equilibrium_tol: float = 1e-6
    dwell_radius: float = 0.1
    growth_ratio: float = 1.2
    min_episodes: int = 4
    period_rtol: float = 1e-2
    section_tol: float = 1e-3
    min_periods: int = 2


@dataclass(frozen=True)
class OmegaLimit:
    kind: Literal["converges_to_equilibrium", "periodic", "heteroclinic_like", "unknown"]
    point: np.ndarray | None = None
    period: float | None = None
    evidence: dict = field(default_factory=dict)


def dwell_episodes(times, proj, rest_points, radius):
    """(start, end, index) of the visits of ``proj`` to balls around ``rest_points``."""
    d = np.linalg.norm(proj[:, None, :] - np.asarray(rest_points)[None], axis=2)
    nearest = d.argmin(axis=1)
    inside = d.min(axis=1) < radius
    episodes = []
    k, n = 0, len(times)
    while k < n:
        if not inside[k]:
            k += 1
            continue
        j = nearest[k]
        start = k
        while k < n and inside[k] and nearest[k] == j:
            k += 1
        episodes.append((times[start], times[k - 1], int(j)))
    return episodes


def omega_limit_classify(trajectory: Trajectory, tail_fraction: float | None = None,
                         config: OmegaConfig = OmegaConfig(),
                         rest_points=None) -> OmegaLimit:
    """Heuristic omega-limit category from a sampled trajectory.

    Tests, in order: small tail oscillation (equilibrium); visits to small
    balls around boundary rest points (simplex vertices unless
    ``rest_points`` is given) whose durations grow geometrically
    (heteroclinic); small oscillation over the last third of the tail
    (slowly converging equilibrium); returns to the same point of a Poincare section with a
    stable return time (periodic).  Everything is read on the simplex
    projection.
    """
    frac = config.tail_fraction if tail_fraction is None else tail_fraction
    times, states = trajectory.times, trajectory.states
    if trajectory.duration < config.min_time:
        raise InsufficientDataError(
            f"trajectory of length {trajectory.duration} shorter than {config.min_time}")
    start = int(len(times) * (1.0 - frac))
    tail_t, tail = times[start:], states[start:]
    scale = max(1.0, float(np.abs(tail).max()))
    spread = tail.max(axis=0) - tail.min(axis=0)
    if np.all(spread < config.equilibrium_tol * scale):
        return OmegaLimit("converges_to_equilibrium", point=tail[-1].copy(),
                          evidence={"tail_spread": spread})
    if np.any(tail.sum(axis=1) <= 0):
        return OmegaLimit("unknown", evidence={"tail_spread": spread})

    proj = simplex_project(states)
    if rest_points is None:
        rest_points = np.eye(states.shape[1])
    episodes = dwell_episodes(times, proj, rest_points, config.dwell_radius)
    if episodes and episodes[-1][1] >= times[-1]:
        episodes = episodes[:-1]  # still open at the end of the record
    durations = np.array([b - a for a, b, _ in episodes])
    ratios = durations[1:] / np.maximum(durations[:-1], 1e-300)
    if len(durations) >= config.min_episodes:
        m = config.min_episodes - 1
        cycling = all(episodes[i][2] != episodes[i + 1][2]
                      for i in range(len(episodes) - m - 1, len(episodes) - 1))
        if cycling and np.median(ratios[-m:]) > config.growth_ratio:
            return OmegaLimit("heteroclinic_like", evidence={
                "durations": durations, "ratios": ratios})

    # slow (e.g. non-hyperbolic) convergence: settle test on the end of the tail
    end = tail[-max(2, len(tail) // 3):]
    end_spread = end.max(axis=0) - end.min(axis=0)
    if np.all(end_spread < config.equilibrium_tol * scale):
        return OmegaLimit("converges_to_equilibrium", point=tail[-1].copy(),
                          evidence={"tail_spread": spread, "end_spread": end_spread})

    # Poincare section: upward crossings of the tail mean of the first coordinate
    x = proj[start:, 0] - proj[start:, 0].mean()
    up = np.flatnonzero((x[:-1] < 0) & (x[1:] >= 0))
    if len(up) >= config.min_periods + 1:
        w = (-x[up] / (x[up + 1] - x[up]))[:, None]
        t_cross = tail_t[up] + w[:, 0] * (tail_t[up + 1] - tail_t[up])
        p_cross = proj[start + up] + w * (proj[start + up + 1] - proj[start + up])
        periods = np.diff(t_cross)
        late = periods[-config.min_periods:]
        drift = np.linalg.norm(np.diff(p_cross[-config.min_periods - 1:], axis=0), axis=1)
        if (np.ptp(late) < config.period_rtol * np.mean(late)
                and np.all(drift < config.section_tol)):
            return OmegaLimit("periodic", period=float(np.mean(late)),
                              evidence={"periods": periods, "section_drift": drift})
    return OmegaLimit("unknown", evidence={"tail_spread": spread,
                                           "episode_durations": durations})
