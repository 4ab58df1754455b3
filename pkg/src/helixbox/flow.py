"""Torus-invariant vector fields on T^2 x [0, 1].

The field is tangent to every torus fiber and constant on it, so it is fully
described by a slope profile t -> (a1(t), a2(t)).  The flow map is exact
linear motion on each fiber (no integrator anywhere), and the interesting
operations are about directions: where the profile is parallel to a given
integer class (candidate binding levels), how far a vertical cylinder stays
from tangency (transversality margin), and how to cut [0, 1] into windows of
small direction variation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .homology import HomClass

#: Samples used when scanning a window for sign changes of the cross product.
LEVEL_SCAN_SAMPLES = 2048
#: Samples used for transversality margins over an interval.
MARGIN_SAMPLES = 1024
#: Bisection stops when the bracket is shorter than this.
LEVEL_BRACKET_WIDTH = 1e-12
#: Fine grid used to accumulate direction-angle variation.
VARIATION_SAMPLES = 4096


@dataclass(frozen=True)
class FlowPoint:
    """A point of T^2 x I with fiber coordinates reduced mod 1."""

    x: float
    y: float
    t: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"t must lie in [0, 1], got {self.t}")
        object.__setattr__(self, "x", self.x % 1.0)
        object.__setattr__(self, "y", self.y % 1.0)


class SlopeProfile:
    """Fiberwise direction (a1(t), a2(t)), piecewise-cubic in t with clamped ends.

    The direction may not vanish anywhere; this is checked on the samples and
    on a 10x oversampled grid at construction time.  Directions are stored as
    vectors rather than ratios so vertical directions are unremarkable.
    """

    def __init__(self, samples: Sequence[tuple[float, float, float]]):
        samples = [(float(t), float(a1), float(a2)) for t, a1, a2 in samples]
        if len(samples) < 2:
            raise ValueError("need at least samples at t=0 and t=1")
        ts = [s[0] for s in samples]
        if ts != sorted(ts) or len(set(ts)) != len(ts):
            raise ValueError("sample parameters must be strictly increasing")
        if ts[0] != 0.0 or ts[-1] != 1.0:
            raise ValueError("samples must cover t=0 and t=1")
        self.samples = tuple(samples)
        arr = np.asarray(samples, dtype=float)
        self._spline_a1 = CubicSpline(arr[:, 0], arr[:, 1], bc_type="clamped")
        self._spline_a2 = CubicSpline(arr[:, 0], arr[:, 2], bc_type="clamped")
        self._check_nonvanishing(arr[:, 0])

    def _check_nonvanishing(self, ts: np.ndarray) -> None:
        fine = np.linspace(0.0, 1.0, 10 * max(len(ts), 2))
        grid = np.union1d(ts, fine)
        a1, a2 = self._spline_a1(grid), self._spline_a2(grid)
        norms = np.hypot(a1, a2)
        if np.any(norms < 1e-12):
            bad = grid[int(np.argmin(norms))]
            raise ValueError(f"profile direction vanishes near t={bad}")

    @classmethod
    def constant(cls, a1: float, a2: float) -> "SlopeProfile":
        return cls([(0.0, a1, a2), (1.0, a1, a2)])

    @classmethod
    def from_angles(cls, angle_of_t: Callable[[float], float], n: int = 65,
                    speed: float = 1.0) -> "SlopeProfile":
        """Profile whose direction at t is speed * (cos, sin) of angle_of_t(t)."""
        ts = np.linspace(0.0, 1.0, n)
        return cls([(t, speed * math.cos(angle_of_t(t)), speed * math.sin(angle_of_t(t)))
                    for t in ts])

    # -- pointwise queries ---------------------------------------------------

    def raw_direction(self, t: float) -> tuple[float, float]:
        """Interpolated (a1, a2), unnormalized (this is what advects points)."""
        if not 0.0 <= t <= 1.0:
            raise ValueError(f"t must lie in [0, 1], got {t}")
        return float(self._spline_a1(t)), float(self._spline_a2(t))

    def raw_direction_many(self, ts: np.ndarray) -> np.ndarray:
        return np.stack([self._spline_a1(ts), self._spline_a2(ts)], axis=-1)

    def angle(self, t: float) -> float:
        a1, a2 = self.raw_direction(t)
        return math.atan2(a2, a1)

    def unwrapped_angles(self, ts: np.ndarray) -> np.ndarray:
        d = self.raw_direction_many(ts)
        return np.unwrap(np.arctan2(d[:, 1], d[:, 0]))


def direction_at(profile: SlopeProfile, t: float) -> tuple[float, float]:
    """Unit direction of the flow on the fiber at t."""
    a1, a2 = profile.raw_direction(t)
    n = math.hypot(a1, a2)
    return a1 / n, a2 / n


def flow_map(profile: SlopeProfile, p: FlowPoint, time: float) -> FlowPoint:
    """Advance p by the fiberwise-linear flow; t is conserved exactly."""
    a1, a2 = profile.raw_direction(p.t)
    return FlowPoint(p.x + time * a1, p.y + time * a2, p.t)


def _cross_with_class(profile: SlopeProfile, cls: HomClass, ts: np.ndarray) -> np.ndarray:
    d = profile.raw_direction_many(ts)
    return d[:, 0] * cls.b - d[:, 1] * cls.a


@dataclass(frozen=True)
class RationalLevel:
    """A level where the flow direction is parallel to ``cls``.

    ``bracket`` is the final bisection interval certifying the sign change
    (or a degenerate pair when the cross product vanished exactly at a scan
    sample).  ``identically_parallel`` marks the degenerate whole-window case.
    """

    t: float
    cls: HomClass
    bracket: tuple[float, float]
    identically_parallel: bool = False


def rational_levels(profile: SlopeProfile, cls: HomClass,
                    window: tuple[float, float]) -> list[RationalLevel]:
    """Levels in the window where the direction crosses the class ``cls``.

    Sign-change bracketing on a fixed scan grid, then bisection; even-order
    tangencies between grid points are invisible to this search, which is fine
    for the planner (it only consumes transversal crossings).
    """
    if cls.is_zero():
        raise ValueError("zero homology class")
    tlo, thi = window
    ts = np.linspace(tlo, thi, LEVEL_SCAN_SAMPLES)
    vals = _cross_with_class(profile, cls, ts)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if np.all(np.abs(vals) < 1e-13 * scale):
        mid = 0.5 * (tlo + thi)
        return [RationalLevel(mid, cls, (tlo, thi), identically_parallel=True)]

    def f(t: float) -> float:
        a1, a2 = profile.raw_direction(t)
        return a1 * cls.b - a2 * cls.a

    zero_tol = 1e-12 * scale
    levels: list[RationalLevel] = []

    def push(t: float, bracket: tuple[float, float]) -> None:
        if not levels or abs(levels[-1].t - t) > 1e-9:
            levels.append(RationalLevel(t, cls, bracket))

    for i in range(len(ts) - 1):
        lo, hi = float(ts[i]), float(ts[i + 1])
        flo, fhi = float(vals[i]), float(vals[i + 1])
        if abs(flo) <= zero_tol:
            push(lo, (lo, lo))
            continue
        if abs(fhi) <= zero_tol:
            continue  # handled as the next pair's left endpoint (or the tail below)
        if flo * fhi < 0.0:
            while hi - lo > LEVEL_BRACKET_WIDTH:
                mid = 0.5 * (lo + hi)
                fmid = f(mid)
                if abs(fmid) <= zero_tol:
                    lo = hi = mid
                    break
                if flo * fmid < 0.0:
                    hi = mid
                else:
                    lo, flo = mid, fmid
            push(0.5 * (lo + hi), (lo, hi))
    if abs(float(vals[-1])) <= zero_tol:
        t = float(ts[-1])
        push(t, (t, t))
    return levels


def cylinder_transversality_margin(profile: SlopeProfile, cls: HomClass,
                                   interval: tuple[float, float]) -> float:
    """Worst normalized |cross(direction, cls)| over the interval.

    Zero means the vertical cylinder over a ``cls`` curve is tangent to the
    flow somewhere in the interval (at sampling resolution).
    """
    if not cls.is_primitive():
        raise ValueError("transversality margin is defined for primitive classes")
    tlo, thi = interval
    ts = np.linspace(tlo, thi, MARGIN_SAMPLES)
    d = profile.raw_direction_many(ts)
    cross = np.abs(d[:, 0] * cls.b - d[:, 1] * cls.a)
    norms = np.hypot(d[:, 0], d[:, 1]) * math.hypot(cls.a, cls.b)
    return float(np.min(cross / norms))


@dataclass(frozen=True)
class VariationInterval:
    tlo: float
    thi: float
    variation: float
    constant: bool = False


def partition_by_slope_variation(profile: SlopeProfile, theta0: float,
                                 window: tuple[float, float]) -> list[VariationInterval]:
    """Greedy left-to-right split of the window into pieces of angle variation < theta0.

    Pieces with zero variation at sampling resolution are flagged constant; a
    profile constant on the whole window is rejected (the concatenation
    construction requires a moving slope).
    """
    if theta0 <= 0:
        raise ValueError("theta0 must be positive")
    tlo, thi = window
    ts = np.linspace(tlo, thi, VARIATION_SAMPLES)
    angles = profile.unwrapped_angles(ts)
    steps = np.abs(np.diff(angles))
    total = float(np.sum(steps))
    if total < 1e-12:
        raise ValueError("constant slope on the whole window")

    cum = np.concatenate([[0.0], np.cumsum(steps)])
    intervals: list[VariationInterval] = []
    start = 0
    while start < len(ts) - 1:
        budget = cum[start] + theta0
        end = int(np.searchsorted(cum, budget, side="left"))
        end = min(max(end - 1, start + 1), len(ts) - 1)
        var = float(cum[end] - cum[start])
        intervals.append(VariationInterval(float(ts[start]), float(ts[end]), var,
                                           constant=var < 1e-12))
        start = end
    return intervals


def empirical_rotation_number(lift: Callable[[float, float], tuple[float, float]],
                              iterations: int,
                              seeds: int | Iterable[tuple[float, float]]) -> tuple[float, float]:
    """Birkhoff-average estimate of the first rotation coordinate of a lifted map.

    ``lift`` is a lift to R^2 of a torus (or annulus) map; the estimate is the
    mean over seed points of (x_n - x_0)/n and the spread is max - min.  An
    integer seed count lays points along the diagonal; an iterable is used
    as-is, which lets callers probe specific invariant circles.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if isinstance(seeds, int):
        pts = [((k + 0.5) / seeds, (k + 0.5) / seeds) for k in range(seeds)]
    else:
        pts = [(float(x), float(y)) for x, y in seeds]
    if not pts:
        raise ValueError("need at least one seed point")
    rates = []
    for x0, y0 in pts:
        x, y = x0, y0
        for _ in range(iterations):
            x, y = lift(x, y)
        rates.append((x - x0) / iterations)
    return float(np.mean(rates)), float(np.max(rates) - np.min(rates))
