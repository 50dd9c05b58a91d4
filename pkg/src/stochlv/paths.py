"""Discretized two-sided Brownian paths.

A path is stored as a read-only array ``base`` of Wiener values on a uniform
grid, an integer ``origin`` (the grid index that plays the role of time 0) and
an integer ``anchor`` (the grid index where the sampled path was pinned to 0).
Observed values are ``base - base[origin]``, so shifting only moves
``origin`` and composes exactly.

Randomness is counter based: the increments right of the anchor come from one
Philox stream keyed by ``(seed, generation, 0)``, the increments left of it
from a stream keyed by ``(seed, generation, 1)``.  Windows of different width
sampled from the same seed therefore agree on their overlap, and a refinement
only ever adds midpoints.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import GridError, WindowError

MAX_GRID_POINTS = 2**31 - 1
_FORWARD, _BACKWARD = 0, 1
_GRID_RTOL = 1e-9

_MAGIC = b"BPTH"
_HEADER = struct.Struct("<4sIQIddqqq")


def _stream(seed: int, generation: int, direction: int) -> np.random.Generator:
    ss = np.random.SeedSequence([seed & 0xFFFFFFFFFFFFFFFF, generation, direction])
    return np.random.Generator(np.random.Philox(ss))


def _grid_count(span: float, step: float) -> int:
    k = span / step
    m = int(round(k))
    if abs(k - m) > _GRID_RTOL * max(1.0, abs(k)):
        raise GridError(f"span {span} is not an integer multiple of step {step}")
    return m


@dataclass(frozen=True, eq=False)
class BrownianPath:
    seed: int
    step: float
    base: np.ndarray = field(repr=False)
    origin: int
    anchor: int
    generation: int = 0

    def __post_init__(self):
        self.base.setflags(write=False)

    @property
    def n_points(self) -> int:
        return self.base.shape[0]

    @property
    def t_min(self) -> float:
        return -self.origin * self.step

    @property
    def t_max(self) -> float:
        return (self.n_points - 1 - self.origin) * self.step

    @property
    def values(self) -> np.ndarray:
        return self.base - self.base[self.origin]

    @property
    def times(self) -> np.ndarray:
        return (np.arange(self.n_points) - self.origin) * self.step

    def index_of(self, t: float) -> int:
        """Grid index of time ``t``; raises GridError when ``t`` is off-grid."""
        k = t / self.step
        m = int(round(k))
        if abs(k - m) > _GRID_RTOL * max(1.0, abs(k)):
            raise GridError(f"t={t} is not on the grid of step {self.step}")
        idx = self.origin + m
        if idx < 0 or idx >= self.n_points:
            raise WindowError(f"t={t} is outside [{self.t_min}, {self.t_max}]")
        return idx

    def at(self, t: float) -> float:
        i = self.index_of(t)
        return float(self.base[i] - self.base[self.origin])

    def window(self, t0: float, t1: float) -> tuple[np.ndarray, np.ndarray]:
        """Times and values on the closed grid window [t0, t1]."""
        i0, i1 = self.index_of(t0), self.index_of(t1)
        if i1 < i0:
            raise GridError("window end precedes start")
        sl = slice(i0, i1 + 1)
        return self.times[sl], self.base[sl] - self.base[self.origin]

    def forward(self, t: float) -> np.ndarray:
        """Values on [0, t]."""
        return self.window(0.0, t)[1]

    def increments(self, t: float) -> np.ndarray:
        return np.diff(self.forward(t))

    def covers(self, t0: float, t1: float) -> bool:
        eps = _GRID_RTOL * self.step
        return self.t_min - eps <= t0 and t1 <= self.t_max + eps


def sample_path(seed: int, t_min: float, t_max: float, step: float) -> BrownianPath:
    """Sample a two-sided Wiener path on the uniform grid over [t_min, t_max]."""
    if not step > 0:
        raise GridError(f"step must be positive, got {step}")
    if t_min > 0 or t_max < 0:
        raise WindowError(f"need t_min <= 0 <= t_max, got [{t_min}, {t_max}]")
    n_fwd = _grid_count(t_max, step)
    n_bwd = _grid_count(-t_min, step)
    if n_fwd + n_bwd + 1 > MAX_GRID_POINTS:
        raise GridError("grid size overflow")
    scale = np.sqrt(step)
    fwd = _stream(seed, 0, _FORWARD).standard_normal(n_fwd) * scale
    bwd = _stream(seed, 0, _BACKWARD).standard_normal(n_bwd) * scale
    base = np.empty(n_fwd + n_bwd + 1)
    base[n_bwd] = 0.0
    base[n_bwd + 1:] = np.cumsum(fwd)
    # walking left from 0: W(-k step) = W(-(k-1) step) + increment
    base[:n_bwd] = np.cumsum(bwd)[::-1]
    return BrownianPath(seed=seed, step=float(step), base=base, origin=n_bwd,
                        anchor=n_bwd)


def refine(path: BrownianPath) -> BrownianPath:
    """Halve the step, filling each midpoint by a Brownian bridge draw."""
    n_int = path.n_points - 1
    gen = path.generation + 1
    n_right = n_int - path.anchor
    n_left = path.anchor
    z = np.empty(n_int)
    z[path.anchor:] = _stream(path.seed, gen, _FORWARD).standard_normal(n_right)
    z[:path.anchor] = _stream(path.seed, gen, _BACKWARD).standard_normal(n_left)[::-1]
    fine = np.empty(2 * n_int + 1)
    fine[0::2] = path.base
    fine[1::2] = 0.5 * (path.base[:-1] + path.base[1:]) + 0.5 * np.sqrt(path.step) * z
    return BrownianPath(seed=path.seed, step=path.step / 2, base=fine,
                        origin=2 * path.origin, anchor=2 * path.anchor,
                        generation=gen)


def restrict(path: BrownianPath, factor: int = 2) -> BrownianPath:
    """Subsample a path onto the grid ``factor`` times coarser (inverse of refine)."""
    if path.origin % factor or path.anchor % factor or (path.n_points - 1) % factor:
        raise GridError("grid is not divisible by factor")
    gens = int(round(np.log2(factor))) if factor > 1 else 0
    return BrownianPath(seed=path.seed, step=path.step * factor,
                        base=path.base[::factor].copy(), origin=path.origin // factor,
                        anchor=path.anchor // factor,
                        generation=max(path.generation - gens, 0))


def shift(path: BrownianPath, t: float) -> BrownianPath:
    """The path s -> W(s + t) - W(t), i.e. the Wiener shift by ``t``."""
    k = t / path.step
    m = int(round(k))
    if abs(k - m) > _GRID_RTOL * max(1.0, abs(k)):
        raise GridError(f"shift {t} is off-grid")
    new_origin = path.origin + m
    if new_origin < 0 or new_origin >= path.n_points:
        raise WindowError(f"shift {t} leaves the sampled window")
    return BrownianPath(seed=path.seed, step=path.step, base=path.base,
                        origin=new_origin, anchor=path.anchor,
                        generation=path.generation)


def dump(path: BrownianPath, dest) -> None:
    """Write a path to a binary file (header then float64 payload)."""
    header = _HEADER.pack(_MAGIC, 1, path.seed & 0xFFFFFFFFFFFFFFFF, path.generation,
                          path.step, path.t_min, path.origin, path.anchor,
                          path.n_points)
    with open(Path(dest), "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(path.base, dtype="<f8").tobytes())


def load(src) -> BrownianPath:
    with open(Path(src), "rb") as fh:
        raw = fh.read()
    magic, version, seed, gen, step, _t_min, origin, anchor, n = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != 1:
        raise ValueError("not a BrownianPath dump")
    base = np.frombuffer(raw, dtype="<f8", count=n, offset=_HEADER.size).astype(float)
    return BrownianPath(seed=seed, step=step, base=base, origin=origin,
                        anchor=anchor, generation=gen)
