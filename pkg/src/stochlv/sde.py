"""Direct integration of dy_i = y_i (r + sum_j a_ij y_j) dt + sigma y_i dB.

Both schemes run on the Ito form.  A Stratonovich system is converted first
by shifting the growth rate r -> r + sigma^2/2, which is exact for linear
multiplicative noise.  The Brownian increments are read from a shared
:class:`~stochlv.paths.BrownianPath`, so the schemes and the decomposition
formula see the same noise realization.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .errors import DivergenceError, ResolutionError
from .lv import LVSystem, Trajectory
from .paths import BrownianPath

# clamp events tolerated per 10^4 steps before a run is rejected
CLAMP_LIMIT_PER_1E4 = 1.0


def _integrate(system: LVSystem, path: BrownianPath, y0, T: float, milstein: bool,
               clamp_limit: float | None) -> Trajectory:
    y0 = np.asarray(y0, dtype=float)
    if y0.shape != (system.n,):
        raise ValueError(f"y0 must have shape ({system.n},)")
    if np.any(y0 < 0):
        raise ValueError("y0 must be nonnegative")
    dw = np.ascontiguousarray(path.increments(T))
    out = np.empty((dw.shape[0] + 1, system.n))
    status, k, clamps = _kernels.sde_ito(system.A, system.ito_drift_rate(), system.sigma,
                                         y0, dw, path.step, milstein, out)
    if status == _kernels.DIVERGED:
        raise DivergenceError(f"state norm exceeded 1e12 after {k} steps")
    limit = CLAMP_LIMIT_PER_1E4 if clamp_limit is None else clamp_limit
    if dw.shape[0] and clamps * 1e4 / dw.shape[0] > limit:
        raise ResolutionError(f"{clamps} nonnegativity clamps in {dw.shape[0]} steps; "
                              "refine the path")
    times = np.arange(dw.shape[0] + 1) * path.step
    return Trajectory(times, out, {"system": system.name, "seed": path.seed,
                                   "step": path.step, "clamps": int(clamps),
                                   "scheme": "milstein" if milstein else "euler-maruyama"})


def euler_maruyama(system: LVSystem, path: BrownianPath, y0, T: float,
                   clamp_limit: float | None = None) -> Trajectory:
    """Euler-Maruyama trajectory on [0, T] at the path's step."""
    return _integrate(system, path, y0, T, False, clamp_limit)


def milstein(system: LVSystem, path: BrownianPath, y0, T: float,
             clamp_limit: float | None = None) -> Trajectory:
    """Milstein trajectory; the correction is sigma^2/2 y_i (dW^2 - dt)."""
    return _integrate(system, path, y0, T, True, clamp_limit)
