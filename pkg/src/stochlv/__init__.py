"""Stochastic Lotka-Volterra systems via the random time-change decomposition.

Phi(t, omega, y) = g(t, omega, g0) Psi(int_0^t g ds, y / g0): the stochastic
flow is the deterministic LV flow on a random clock, scaled by the solution
of a scalar logistic SDE.
"""

from .decomposition import (TimeChangedClock, cone_membership, phi_decomposed,
                            phi_decomposed_trajectory, phi_pullback, stopping_time)
from .errors import (BudgetError, ConfigError, DegenerateError, DivergenceError, GridError,
                     InsufficientDataError, LabError, ResolutionError, WindowError)
from .logistic import (Calculus, LogisticParams, g_exact, stationary_cdf, stationary_density,
                       u_random_equilibrium)
from .lv import (DenseFlow, Equilibrium, LVSystem, Trajectory, equilibria, integrate_ode,
                 omega_limit_classify, simplex_project)
from .paths import BrownianPath, refine, restrict, sample_path, shift
from .presets import PRESETS, preset
from .sde import euler_maruyama, milstein

__version__ = "0.1.0"
