"""Random time changes ``C_t`` solving ``int_0^{C_t} g(X_s)^2 ds = t``.

The clock ``A(s) = int_0^s g(X_u)^2 du`` is built with the trapezoid rule on
the source grid and inverted by linear interpolation.  The map is truncated
at ``max_attained = A(horizon)``; it is never extrapolated.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .localtime import BandConfig, band_local_time
from .occupation import OccupationWeight
from .paths import SamplePath, TimeGrid, quadratic_variation


@dataclass(frozen=True)
class ClockDensity:
    g: Callable[[np.ndarray], np.ndarray | float]

    @classmethod
    def constant(cls, c: float) -> "ClockDensity":
        return cls(lambda x: np.full(np.shape(x), float(c)))

    def squared(self, x: np.ndarray) -> np.ndarray:
        gx = np.broadcast_to(np.asarray(self.g(x), dtype=float), np.shape(x))
        if np.any(~(gx > 0)):
            raise ValueError("clock density must be strictly positive along the path")
        return gx * gx


@dataclass(frozen=True)
class TimeChangeMap:
    """Clock samples ``A(t_i)`` on ``source_grid``; ``C = A^{-1}``.

    ``clock`` may carry a leading replicate axis, one map per path.
    """

    source_grid: TimeGrid
    clock: np.ndarray

    @property
    def max_attained(self):
        return self.clock[..., -1]

    def forward(self, t) -> np.ndarray:
        """``C_t`` by piecewise-linear inversion of the clock."""
        src = self.source_grid.times
        t = np.asarray(t, dtype=float)
        if self.clock.ndim == 1:
            return np.interp(t, self.clock, src)
        rows = self.clock.reshape(-1, self.clock.shape[-1])
        out = np.stack([np.interp(t, row, src) for row in rows])
        return out.reshape(self.clock.shape[:-1] + t.shape)

    def inverse(self, s) -> np.ndarray:
        """The clock ``A(s)`` at source times ``s``."""
        src = self.source_grid.times
        s = np.asarray(s, dtype=float)
        if self.clock.ndim == 1:
            return np.interp(s, src, self.clock)
        rows = self.clock.reshape(-1, self.clock.shape[-1])
        return np.stack([np.interp(s, src, row) for row in rows]).reshape(
            self.clock.shape[:-1] + s.shape)

    def write_csv(self, file) -> None:
        if self.clock.ndim != 1:
            raise ValueError("write_csv takes a single map")
        with open(file, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "C_t"])
            for t, c in zip(self.clock, self.source_grid.times):
                w.writerow([f"{t:.17g}", f"{c:.17g}"])


def build_time_change(path: SamplePath, clock: ClockDensity) -> TimeChangeMap:
    g2 = clock.squared(path.values)
    a = cumulative_trapezoid(g2, dx=path.grid.dt, axis=-1, initial=0.0)
    return TimeChangeMap(path.grid, a)


def apply_time_change(path: SamplePath, tc: TimeChangeMap, out_grid: TimeGrid) -> SamplePath:
    """``X^C`` on ``out_grid`` by linear interpolation of ``X`` at ``C_t``."""
    limit = float(np.min(tc.max_attained))
    if out_grid.horizon > limit * (1 + 1e-12):
        raise ValueError(f"out_grid horizon {out_grid.horizon} exceeds max_attained {limit}")
    c = tc.forward(out_grid.times)
    src = path.grid.times
    if path.values.ndim == 1:
        return SamplePath(out_grid, np.interp(c, src, path.values))
    rows = path.values.reshape(-1, path.grid.steps + 1)
    # a single clock may be shared by every path of a batch
    cs = np.broadcast_to(c, path.values.shape[:-1] + c.shape[-1:]).reshape(-1, out_grid.steps + 1)
    out = np.stack([np.interp(ci, src, row) for ci, row in zip(cs, rows)])
    return SamplePath(out_grid, out.reshape(path.values.shape[:-1] + (out_grid.steps + 1,)))


def default_out_grid(path: SamplePath, tc: TimeChangeMap, coarsening: int = 2) -> TimeGrid:
    """Output grid over ``[0, max_attained]`` with ``steps // coarsening`` steps."""
    return TimeGrid(float(np.min(tc.max_attained)), max(1, path.grid.steps // coarsening))


@dataclass
class TransformGap:
    gap: float
    per_path: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray


def check_qv_transform(path: SamplePath, tc: TimeChangeMap,
                       out_grid: TimeGrid | None = None) -> TransformGap:
    """``sup_t |QV(X^C)_t - QV(X)_{C_t}|`` relative to the terminal QV.

    ``gap`` is the ensemble mean of the per-path values.
    """
    out_grid = default_out_grid(path, tc) if out_grid is None else out_grid
    xc = apply_time_change(path, tc, out_grid)
    lhs = quadratic_variation(xc).values
    qv_src = quadratic_variation(path)
    c = tc.forward(out_grid.times)
    src = path.grid.times
    if path.values.ndim == 1:
        rhs = np.interp(c, src, qv_src.values)
    else:
        c = np.broadcast_to(c, path.values.shape[:-1] + c.shape[-1:])
        rhs = np.stack([np.interp(ci, src, row) for ci, row in
                        zip(c.reshape(-1, c.shape[-1]), qv_src.values.reshape(-1, src.size))])
        rhs = rhs.reshape(lhs.shape)
    denom = np.maximum(rhs[..., -1], np.finfo(float).tiny)
    per_path = np.max(np.abs(lhs - rhs), axis=-1) / denom
    both_zero = (rhs[..., -1] == 0) & (np.max(np.abs(lhs), axis=-1) == 0)
    per_path = np.where(both_zero, 0.0, per_path)
    return TransformGap(float(np.mean(per_path)), np.atleast_1d(per_path),
                        lhs[..., -1], rhs[..., -1])


def check_localtime_transform(path: SamplePath, tc: TimeChangeMap, a: float,
                              band: BandConfig | None = None,
                              out_grid: TimeGrid | None = None) -> TransformGap:
    """Terminal ``L^a(X^C)`` against ``L^a(X)`` read at ``C_T`` (QV-weighted bands).

    ``gap`` compares ensemble means; ``per_path`` holds the per-path
    relative gaps (0 where both sides vanish).
    """
    out_grid = default_out_grid(path, tc) if out_grid is None else out_grid
    band = BandConfig.for_grid(path.grid) if band is None else band
    qv = OccupationWeight.QUADRATIC_VARIATION
    xc = apply_time_change(path, tc, out_grid)
    lhs = np.atleast_1d(band_local_time(xc, a, band, qv).terminal)
    src_lt = band_local_time(path, a, band, qv).values.reshape(-1, path.grid.steps + 1)
    c_end = np.broadcast_to(tc.forward(out_grid.horizon), path.values.shape[:-1]).reshape(-1)
    src = path.grid.times
    rhs = np.array([np.interp(ce, src, row) for ce, row in zip(c_end, src_lt)])
    ml, mr = float(np.mean(lhs)), float(np.mean(rhs))
    gap = 0.0 if ml == mr == 0.0 else abs(ml - mr) / max(abs(ml), abs(mr))
    with np.errstate(invalid="ignore", divide="ignore"):
        per = np.where((lhs == 0) & (rhs == 0), 0.0,
                       np.abs(lhs - rhs) / np.maximum(np.abs(lhs), np.abs(rhs)))
    return TransformGap(gap, per, lhs, rhs)
