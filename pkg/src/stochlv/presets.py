"""Built-in systems: Examples 4.1-4.4 and the symmetric May-Leonard family."""

from __future__ import annotations

import numpy as np

from .logistic import Calculus
from .lv import LVSystem


def may_leonard(alpha: float, beta: float, sigma: float = 0.0, r: float = 1.0) -> LVSystem:
    C = np.array([[1.0, alpha, beta],
                  [beta, 1.0, alpha],
                  [alpha, beta, 1.0]])
    return LVSystem.competitive(r, C, sigma=sigma, name=f"may-leonard-{alpha:g}-{beta:g}")


def example_4_1(sigma: float = 0.0) -> LVSystem:
    return LVSystem.competitive(1.0, np.ones((3, 3)), sigma=sigma, name="example-4.1")


def example_4_2(sigma: float = 0.0) -> LVSystem:
    C = [[2.0, 1.0, 1.0],
         [1.0, 2.0, 1.0],
         [1.5, 1.5, 1.0]]
    return LVSystem.competitive(1.0, C, sigma=sigma, name="example-4.2")


def example_4_3(sigma: float = 0.0) -> LVSystem:
    A = [[-1.0, 2.0, -3.0],
         [-3.0, -1.0, 1.0],
         [1.0, -4.0, -1.0]]
    return LVSystem(1.0, A, sigma=sigma, name="example-4.3")


def example_4_4(sigma: float = 0.0) -> LVSystem:
    A = [[-0.75, 1.0, -1.5, -2.0],
         [3.0, -3.0, -16.5, -4.0],
         [2959 / 4000, 0.0, -4.5, -989 / 125],
         [0.5, -1.0, -3.0, -6.0]]
    return LVSystem(2.0, A, sigma=sigma, name="example-4.4")


def example_4_3_invariant(y) -> np.ndarray:
    """Conserved ratio y1 y2 y3 / (2 y1 + 3 y2 + 2 y3)^3 of Example 4.3."""
    y = np.asarray(y, dtype=float)
    return y[..., 0] * y[..., 1] * y[..., 2] / (2 * y[..., 0] + 3 * y[..., 1] + 2 * y[..., 2]) ** 3


PRESETS = {
    "example-4.1": example_4_1,
    "example-4.2": example_4_2,
    "example-4.3": example_4_3,
    "example-4.4": example_4_4,
    "may-leonard-0.8-1.3": lambda sigma=0.0: may_leonard(0.8, 1.3, sigma),
}

DESCRIPTIONS = {
    "example-4.1": "3D competitive, all a_ij = 1: simplex of equilibria, ray-supported laws",
    "example-4.2": "3D competitive with a segment of equilibria (a, a, 1 - 3a)",
    "example-4.3": "3D prey-predator with invariant cones and closed orbits Gamma(h)",
    "example-4.4": "4D prey-predator with an equilibrium and two limit cycles, r = 2",
    "may-leonard-0.8-1.3": "symmetric May-Leonard, attracting heteroclinic cycle",
}


def preset(name: str, sigma: float = 0.0, calculus: Calculus | str = Calculus.STRATONOVICH) -> LVSystem:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    s = factory(sigma)
    return LVSystem(s.r, s.A, sigma, calculus, s.name)
