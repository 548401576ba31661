"""Occupation measures of sampled paths and local time of smooth paths."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .paths import SamplePath


class StationaryLevelError(ValueError):
    """The path crosses the level with (numerically) zero speed; L is infinite there."""


class OccupationWeight(enum.Enum):
    LEBESGUE = "lebesgue"
    QUADRATIC_VARIATION = "quadratic_variation"


def step_weights(path: SamplePath, weight: OccupationWeight | str) -> np.ndarray:
    """Per-step clock increments, shape ``(..., steps)``."""
    weight = OccupationWeight(weight)
    if weight is OccupationWeight.LEBESGUE:
        return np.full(path.values.shape[:-1] + (path.grid.steps,), path.grid.dt)
    return np.square(path.increments)


@dataclass(frozen=True)
class IntervalUnion:
    """Finite union of disjoint half-open intervals ``[a, b)``, sorted."""

    intervals: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        for a, b in ivs:
            if not a < b:
                raise ValueError(f"empty or reversed interval [{a}, {b})")
        for (_, b0), (a1, _) in zip(ivs, ivs[1:]):
            if a1 < b0:
                raise ValueError("intervals must be sorted and disjoint")
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def single(cls, a: float, b: float) -> "IntervalUnion":
        return cls(((a, b),))

    @property
    def edges(self) -> np.ndarray:
        return np.array([e for ab in self.intervals for e in ab], dtype=float)

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if not self.intervals:
            return np.zeros(x.shape, dtype=bool)
        # an odd insertion index means x sits inside some [a_i, b_i)
        return np.searchsorted(self.edges, x, side="right") % 2 == 1


def occupation_time(path: SamplePath, intervals: IntervalUnion,
                    weight: OccupationWeight | str = OccupationWeight.LEBESGUE,
                    upto: float | None = None):
    """Weighted time spent in ``intervals`` over the grid steps inside ``[0, upto]``.

    Each step ``[t_i, t_{i+1})`` contributes its weight when ``X(t_i)`` lies
    in the set.  ``upto`` is rounded down to the grid.
    """
    weight = OccupationWeight(weight)
    k = path.grid.steps if upto is None else path.grid.steps_upto(upto)
    inside = intervals.contains(path.values[..., :k])
    if weight is OccupationWeight.LEBESGUE:
        return np.count_nonzero(inside, axis=-1) * path.grid.dt
    w = step_weights(path, weight)[..., :k]
    return np.sum(np.where(inside, w, 0.0), axis=-1)


def occupation_histogram(path: SamplePath, x_bins: Sequence[float],
                         weight: OccupationWeight | str = OccupationWeight.LEBESGUE) -> np.ndarray:
    """Occupation mass per bin ``[edge_b, edge_{b+1})`` over the whole horizon."""
    edges = np.asarray(x_bins, dtype=float)
    if edges.ndim != 1 or edges.size < 2:
        raise ValueError("need at least two bin edges")
    if np.any(np.diff(edges) <= 0):
        raise ValueError("bin edges must be strictly increasing")
    if path.values.ndim != 1:
        raise ValueError("occupation_histogram takes a single path")
    weight = OccupationWeight(weight)
    idx = np.searchsorted(edges, path.values[:-1], side="right") - 1
    ok = (idx >= 0) & (idx < edges.size - 1)
    nbins = edges.size - 1
    if weight is OccupationWeight.LEBESGUE:
        return np.bincount(idx[ok], minlength=nbins) * path.grid.dt
    w = step_weights(path, weight)
    return np.bincount(idx[ok], weights=w[ok], minlength=nbins)


def write_histogram_csv(edges: Sequence[float], mass: Sequence[float], file) -> None:
    with open(file, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["bin_left", "bin_right", "mass"])
        for a, b, m in zip(edges[:-1], edges[1:], mass):
            w.writerow([f"{a:.17g}", f"{b:.17g}", f"{m:.17g}"])


@dataclass(frozen=True)
class DifferentiablePathSpec:
    value: Callable
    derivative: Callable


def level_crossings(spec: DifferentiablePathSpec, x: float, upto: float,
                    crossing_tolerance: float = 1e-12,
                    scan_points_per_unit: int = 10_000) -> list[float]:
    """Times ``s`` in ``[0, upto)`` with ``X(s) = x``, by scan then bisection.

    A tangency that never changes sign is only caught if a scan point lands
    within ``crossing_tolerance`` of the level.
    """
    n = max(2, int(math.ceil(upto * scan_points_per_unit)))
    s = np.linspace(0.0, upto, n + 1)
    d = np.asarray(spec.value(s), dtype=float) - x
    if d.shape != s.shape:
        d = np.array([float(spec.value(si)) - x for si in s])
    roots = []
    for i in range(n):
        if abs(d[i]) <= crossing_tolerance:
            roots.append(s[i])
        elif d[i] * d[i + 1] < 0:
            roots.append(brentq(lambda u: float(spec.value(u)) - x, s[i], s[i + 1],
                                xtol=crossing_tolerance))
    if abs(d[n]) <= crossing_tolerance:
        roots.append(s[n])
    kept: list[float] = []
    for r in sorted(roots):
        if kept and r - kept[-1] <= 2 * crossing_tolerance:
            continue
        kept.append(r)
    # half-open convention: a crossing at 0 counts, one at ``upto`` does not
    return [r for r in kept if r < upto - crossing_tolerance]


def deterministic_local_time(spec: DifferentiablePathSpec, x: float, upto: float,
                             crossing_tolerance: float = 1e-12,
                             scan_points_per_unit: int = 10_000,
                             slope_tolerance: float = 1e-9) -> float:
    """Sum of ``1/|X'(s)|`` over the crossings of level ``x`` in ``[0, upto)``."""
    total = 0.0
    for r in level_crossings(spec, x, upto, crossing_tolerance, scan_points_per_unit):
        slope = abs(float(spec.derivative(r)))
        if slope < slope_tolerance:
            raise StationaryLevelError(f"stationary crossing of level {x} at t={r:.12g}")
        total += 1.0 / slope
    return total
