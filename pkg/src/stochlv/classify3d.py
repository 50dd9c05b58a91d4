"""Structural classification of three-species competitive LV systems.

Works in the competitive convention dy_i = y_i (r - sum_j c_ij y_j), i.e.
C = -A.  Indices below are 1-based in docstrings and cyclic mod 3.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateError
from .lv import Equilibrium, LVSystem, equilibria, flow_steps, omega_limit_classify, Trajectory
from .lv import _steps

CATEGORIES = ("all-to-equilibria", "periodic-family", "heteroclinic-attracting", "mixed/unknown")

THETA_TOL_EXACT = 1e-12
THETA_TOL = 1e-9


def _competitive_matrix(system: LVSystem) -> np.ndarray:
    if system.n != 3:
        raise ValueError(f"classification needs n = 3, got n = {system.n}")
    return -system.A


def alphas_betas(system: LVSystem) -> tuple[np.ndarray, np.ndarray]:
    """alpha_i = c_{i+1,i+1} - c_{i,i+1},  beta_i = c_{i,i-1} - c_{i-1,i-1}."""
    c = _competitive_matrix(system)
    alphas = np.empty(3)
    betas = np.empty(3)
    for i in range(3):
        nxt, prv = (i + 1) % 3, (i - 1) % 3
        alphas[i] = c[nxt, nxt] - c[i, nxt]
        betas[i] = c[i, prv] - c[prv, prv]
    return alphas, betas


def theta_from(alphas, betas) -> float:
    return float(betas[0] * betas[1] * betas[2] - alphas[0] * alphas[1] * alphas[2])


def theta(system: LVSystem) -> float:
    return theta_from(*alphas_betas(system))


def _dyadic(x: float, max_bits: int = 30) -> bool:
    _, den = float(x).as_integer_ratio()
    return den <= 2**max_bits


def theta_tolerance(system: LVSystem) -> float:
    """Zero tolerance for theta: tight when every input is exactly representable."""
    exact = all(_dyadic(v) for v in itertools.chain(system.A.ravel(), [system.r]))
    return THETA_TOL_EXACT if exact else THETA_TOL


def theta_is_zero(system: LVSystem) -> tuple[bool, float, tuple[float, float]]:
    """(is_zero, tolerance, interval) for the theta = 0 test."""
    th = theta(system)
    tol = theta_tolerance(system)
    return abs(th) <= tol, tol, (th - tol, th + tol)


@dataclass(frozen=True)
class ConeInvariant:
    """V(y) = y1^mu y2^nu y3^omega (c1 y1 + c2 y2 + c3 y3), constant on cone surfaces."""

    mu: float
    nu: float
    omega_exp: float
    D: float
    coefficients: tuple[float, float, float]

    def __call__(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if np.any(y <= 0):
            raise ValueError("V is defined on the open positive orthant")
        c = np.asarray(self.coefficients)
        lin = y @ c
        logv = (self.mu * np.log(y[..., 0]) + self.nu * np.log(y[..., 1])
                + self.omega_exp * np.log(y[..., 2]) + np.log(lin))
        return np.exp(logv)

    def as_dict(self) -> dict:
        return {"mu": self.mu, "nu": self.nu, "omega": self.omega_exp, "D": self.D,
                "coefficients": list(self.coefficients)}


def cone_params(system: LVSystem) -> ConeInvariant:
    a, b = alphas_betas(system)
    a1, a2, a3 = a
    b1, b2, b3 = b
    D = b2 * b3 + b2 * a1 + a1 * a3
    if D == 0:
        raise DegenerateError("D = b2 b3 + b2 a1 + a1 a3 vanishes; no cone invariant")
    mu, nu, om = -b2 * b3 / D, -a1 * a3 / D, -a1 * b2 / D
    assert abs(mu + nu + om + 1.0) < 1e-9 * max(1.0, abs(mu) + abs(nu) + abs(om))
    return ConeInvariant(mu, nu, om, D, (b2 * a3, a1 * a3, b1 * b2))


def simplex_samples(interior_denominator: int = 7) -> tuple[np.ndarray, np.ndarray]:
    """Interior lattice points (i, j, k)/m and quarter points on each edge."""
    m = interior_denominator
    interior = np.array([(i, j, m - i - j) for i in range(1, m) for j in range(1, m - i)],
                        dtype=float) / m
    edge = []
    for a, b in ((0, 1), (1, 2), (2, 0)):
        for s in (0.25, 0.5, 0.75):
            y = np.zeros(3)
            y[a], y[b] = s, 1 - s
            edge.append(y)
    return interior, np.array(edge)


@dataclass
class ClassificationReport:
    alphas: tuple
    betas: tuple
    theta: float
    equilibria: list
    category: str
    cone: ConeInvariant | None = None
    certificates: list = field(default_factory=list)
    budget_exhausted: bool = False

    def to_dict(self) -> dict:
        return {"alphas": list(self.alphas), "betas": list(self.betas), "theta": self.theta,
                "equilibria": self.equilibria, "category": self.category,
                "cone": None if self.cone is None else self.cone.as_dict(),
                "certificates": self.certificates, "budget_exhausted": self.budget_exhausted}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _census_entry(e: Equilibrium) -> dict:
    out = {"point": e.point.tolist(), "support": [i + 1 for i in e.support],
           "stability": e.stability, "continuum": e.is_continuum,
           "eigenvalues": [[float(z.real), float(z.imag)] for z in e.eigenvalues]}
    if e.is_continuum:
        out["dimension"] = e.rank_deficiency
        if e.endpoints is not None:
            out["endpoints"] = [p.tolist() for p in e.endpoints]
    return out


def _approaches_census(states: np.ndarray, eqs, tol: float = 5e-2) -> bool:
    """End of the record moves monotonically onto a known equilibrium point."""
    targets = [e.point for e in eqs if not e.is_continuum]
    for e in eqs:
        if e.endpoints is not None:
            targets.extend(e.endpoints)
    end = states[-max(2, len(states) // 3):]
    for p in targets:
        d = np.linalg.norm(end - p, axis=1)
        if d[-1] < tol and np.all(np.diff(d) <= 0):
            return True
    return False


def _mostly_heteroclinic(kinds) -> bool:
    # starts close to the ray through P spiral out slowly and may still be
    # undecided at the horizon; none may settle elsewhere
    settled = [k for k in kinds if k in ("converges_to_equilibrium", "periodic")]
    return bool(kinds) and not settled and kinds.count("heteroclinic_like") * 2 >= len(kinds)


def classify(system: LVSystem, budget: int = 1_000_000, horizon: float | None = None,
             step: float = 1e-2, tail_fraction: float = 0.9) -> ClassificationReport:
    """Equilibrium census plus qualitative dynamics class from sampled trajectories.

    ``budget`` bounds the total number of RK4 steps; when it runs out the
    category is mixed/unknown and the evidence gathered so far is kept.
    """
    c = _competitive_matrix(system)
    if np.any(c <= 0):
        raise ValueError("classification needs all competition coefficients c_ij > 0")
    a, b = alphas_betas(system)
    th = theta_from(a, b)
    zero, tol, interval = theta_is_zero(system)
    eqs = equilibria(system)
    certs: list[dict] = [{"name": "theta", "value": th, "tolerance": tol,
                          "is_zero": zero, "interval": list(interval)}]
    try:
        cone = cone_params(system)
    except DegenerateError:
        cone = None

    interior_eq = [e for e in eqs if len(e.support) == 3 and not e.is_continuum]
    axial = [e for e in eqs if len(e.support) == 1 and not e.is_continuum]
    continua = [e for e in eqs if e.is_continuum]
    if continua:
        certs.append({"name": "continuum", "count": len(continua),
                      "descriptions": [e.describe() for e in continua]})

    T = 300.0 / system.r if horizon is None else horizon
    hs = _steps(T, step)
    interior, edge = simplex_samples()
    kinds: dict[str, list] = {"interior": [], "edge": []}
    used = 0
    exhausted = False
    for label, pts in (("interior", interior), ("edge", edge)):
        for y0 in pts:
            if used + hs.size > budget:
                exhausted = True
                break
            used += hs.size
            states = flow_steps(system, y0, hs)
            times = np.concatenate([[0.0], np.cumsum(hs)])
            om = omega_limit_classify(Trajectory(times, states), tail_fraction)
            kind = om.kind
            if kind == "unknown" and _approaches_census(states, eqs):
                kind = "converges_to_equilibrium"  # algebraic approach to a degenerate point
            entry = {"y0": y0.tolist(), "kind": kind}
            if om.period is not None:
                entry["period"] = om.period
            kinds[label].append(entry)
        if exhausted:
            break
    certs.append({"name": "samples", "steps_used": used, "budget": budget, "horizon": T,
                  "interior": kinds["interior"], "edge": kinds["edge"]})

    all_kinds = [k["kind"] for k in kinds["interior"] + kinds["edge"]]
    int_kinds = [k["kind"] for k in kinds["interior"]]
    if exhausted:
        category = "mixed/unknown"
    elif zero and interior_eq and "periodic" in int_kinds:
        category = "periodic-family"
    elif (th > tol and len(axial) == 3 and all(e.stability == "saddle" for e in axial)
          and interior_eq and interior_eq[0].stability in ("saddle", "source")
          and _mostly_heteroclinic(int_kinds)):
        category = "heteroclinic-attracting"
    elif all_kinds and all(k == "converges_to_equilibrium" for k in all_kinds):
        category = "all-to-equilibria"
    else:
        category = "mixed/unknown"
    return ClassificationReport(tuple(a.tolist()), tuple(b.tolist()), th,
                                [_census_entry(e) for e in eqs], category, cone, certs,
                                exhausted)
