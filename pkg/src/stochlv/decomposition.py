"""Stochastic flow from the deterministic one on a random clock.

    Phi(t, omega, y) = g(t, omega, g0) * Psi(tau(t), y / g0),
    tau(t) = int_0^t g(s, omega, g0) ds,

where g solves the scalar logistic SDE with the system's r, sigma and
calculus, and Psi is the deterministic LV flow.  The deterministic flow is
integrated along the clock itself: one RK4 step per grid interval, of length
tau(t_{k+1}) - tau(t_k), i.e. the grid step scaled by the current g.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import WindowError
from .logistic import LogisticParams, g_series
from .lv import DenseFlow, LVSystem, Trajectory, flow_steps, simplex_project
from .paths import BrownianPath, shift

DEFAULT_G0 = 1.0


@dataclass(frozen=True, eq=False)
class TimeChangedClock:
    """tau(t) = int_0^t g ds tabulated on the path grid over [0, horizon]."""

    path: BrownianPath
    params: LogisticParams
    g0: float
    times: np.ndarray
    g: np.ndarray
    tau: np.ndarray

    @classmethod
    def build(cls, params: LogisticParams, path: BrownianPath, horizon: float,
              g0: float = DEFAULT_G0) -> "TimeChangedClock":
        times, g, tau = g_series(params, path, g0, horizon)
        return cls(path, params, g0, times, g, tau)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < 0) or np.any(t > self.horizon * (1 + 1e-12)):
            raise WindowError(f"t outside the clock horizon [0, {self.horizon}]")
        out = np.interp(t, self.times, self.tau)
        return out if out.ndim else float(out)


def stopping_time(clock: TimeChangedClock, a):
    """Inverse clock: first t with int_0^t g ds = a (linear interpolation)."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0) or np.any(a > clock.tau[-1] * (1 + 1e-12)):
        raise WindowError(f"a outside the integrated range [0, {clock.tau[-1]}]")
    out = np.interp(a, clock.tau, clock.times)
    return out if out.ndim else float(out)


def _check_y(system: LVSystem, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != (system.n,):
        raise ValueError(f"y must have shape ({system.n},)")
    if np.any(y < 0):
        raise ValueError("y must be nonnegative")
    return y


def phi_decomposed_trajectory(system: LVSystem, path: BrownianPath, y, T: float,
                              g0: float = DEFAULT_G0) -> Trajectory:
    """Phi(t, omega, y) at every grid time of [0, T] via the decomposition formula."""
    y = _check_y(system, y)
    clock = TimeChangedClock.build(system.logistic, path, T, g0)
    psi = flow_steps(system, y / g0, np.diff(clock.tau))
    states = clock.g[:, None] * psi
    return Trajectory(clock.times, states, {"system": system.name, "seed": path.seed,
                                            "step": path.step, "scheme": "decomposition",
                                            "tau": clock.tau})


def phi_decomposed(system: LVSystem, path: BrownianPath, y, t: float,
                   g0: float = DEFAULT_G0) -> np.ndarray:
    """Phi(t, omega, y) = g(t) Psi(tau(t), y / g0)."""
    path.index_of(t)
    return phi_decomposed_trajectory(system, path, y, t, g0).states[-1]


def phi_pullback(system: LVSystem, path: BrownianPath, y, t: float,
                 g0: float = DEFAULT_G0) -> np.ndarray:
    """Pull-back value Phi(t, theta_{-t} omega, y)."""
    if not path.covers(-t, 0.0):
        raise WindowError(f"pull-back to -{t} needs a path window starting at or before -{t}")
    return phi_decomposed(system, shift(path, -t), y, t, g0)


def ensemble_on_flow(flow: DenseFlow, clocks, sample_times) -> np.ndarray:
    """Phi at ``sample_times`` for many paths sharing one initial state.

    With a common y / g0 the deterministic trajectory is the same for every
    path, so it is integrated once (``flow``) and read at each path's clock.
    Returns an array of shape (paths, len(sample_times), n).
    """
    sample_times = np.asarray(sample_times, dtype=float)
    out = np.empty((len(clocks), sample_times.shape[0], flow.states.shape[1]))
    for i, clock in enumerate(clocks):
        tau = np.interp(sample_times, clock.times, clock.tau)
        g = np.interp(sample_times, clock.times, clock.g)
        out[i] = g[:, None] * flow(tau)
    return out


def cone_membership(reference, y, tolerance: float = 1e-3) -> bool:
    """Whether y lies (within ``tolerance`` on the simplex) in the cone over ``reference``.

    ``reference`` is a finite set of nonzero states (rows); a curve such as a
    closed orbit should be passed densely sampled.
    """
    y = np.asarray(y, dtype=float)
    if np.all(y == 0):
        return True
    ref = np.atleast_2d(np.asarray(reference, dtype=float))
    if ref.shape[0] == 0:
        raise ValueError("reference set must be nonempty")
    d = np.linalg.norm(simplex_project(ref) - simplex_project(y), axis=1)
    return bool(d.min() <= tolerance)


def cone_distance(reference, states) -> np.ndarray:
    """Simplex-metric distance of each state to the cone over ``reference``."""
    ref = simplex_project(np.atleast_2d(np.asarray(reference, dtype=float)))
    p = simplex_project(np.atleast_2d(np.asarray(states, dtype=float)))
    out = np.empty(p.shape[0])
    for k in range(0, p.shape[0], 4096):
        blk = p[k:k + 4096]
        out[k:k + 4096] = np.linalg.norm(blk[:, None, :] - ref[None], axis=2).min(axis=1)
    return out
