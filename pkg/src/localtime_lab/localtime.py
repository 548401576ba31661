"""Local time estimators for sampled semimartingale paths.

Two independent routes are provided:

* the band estimator, ``(1/2eps) * occupation of [x - eps, x + eps)``,
  optionally with the quadratic-variation clock ``(dX)^2`` as weight;
* discrete Tanaka sums, ``|X_t - a| - |X_0 - a| - sum sgn(X_i - a) dX_i``,
  with left-endpoint (Ito) integrands and ``sgn(0) = -1``.

The band bias is O(eps) and its sampling error per path is O(sqrt(dt)/eps);
``default_epsilon`` returns ``dt ** (1/3)``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import integrate

from .occupation import OccupationWeight, step_weights
from .paths import SamplePath, TimeGrid


def default_epsilon(dt: float) -> float:
    return dt ** (1.0 / 3.0)


@dataclass(frozen=True)
class BandConfig:
    epsilon: float

    def __post_init__(self):
        if not (math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")

    @classmethod
    def for_grid(cls, grid: TimeGrid) -> "BandConfig":
        return cls(default_epsilon(grid.dt))


def sgn(x):
    """Sign with ``sgn(0) = -1``."""
    return np.where(np.asarray(x) > 0, 1.0, -1.0)


def _band(path: SamplePath, band: BandConfig | None) -> BandConfig:
    return BandConfig.for_grid(path.grid) if band is None else band


def band_local_time(path: SamplePath, x: float, band: BandConfig | None = None,
                    weight: OccupationWeight | str = OccupationWeight.LEBESGUE,
                    one_sided: bool = False) -> SamplePath:
    """Band estimate of ``t -> L_t^x``.

    With ``one_sided=True`` the band is ``[x, x + eps)`` with mass ``1/eps``,
    the right-continuous convention for the boundary of a nonnegative process.
    """
    band = _band(path, band)
    eps = band.epsilon
    left = path.values[..., :-1]
    if one_sided:
        inside = (left >= x) & (left < x + eps)
        scale = 1.0 / eps
    else:
        inside = (left >= x - eps) & (left < x + eps)
        scale = 0.5 / eps
    w = np.where(inside, step_weights(path, weight), 0.0)
    out = np.zeros_like(path.values)
    np.cumsum(w, axis=-1, out=out[..., 1:])
    out *= scale
    return path.with_values(out)


def tanaka_local_time(path: SamplePath, a: float) -> SamplePath:
    """Discrete Tanaka local time at level ``a``; not clipped to be monotone."""
    v = path.values
    ito = np.zeros_like(v)
    np.cumsum(sgn(v[..., :-1] - a) * np.diff(v, axis=-1), axis=-1, out=ito[..., 1:])
    lt = np.abs(v - a) - np.abs(v[..., :1] - a) - ito
    return path.with_values(lt)


def tanaka_positive_part(path: SamplePath, x: float,
                         local_time: SamplePath | None = None) -> tuple[SamplePath, SamplePath]:
    """Positive-part Tanaka formula.

    Returns ``(reconstructed, half_l)`` where ``half_l`` is the implied
    ``L/2 = (X_t - x)^+ - (X_0 - x)^+ - sum 1{X_i > x} dX_i`` and
    ``reconstructed = (X_0 - x)^+ + sum 1{X_i > x} dX_i + L/2`` uses
    ``local_time`` (default: ``tanaka_local_time``).  The gap between
    ``reconstructed`` and ``(X_t - x)^+`` is the residual.
    """
    v = path.values
    ito = np.zeros_like(v)
    np.cumsum(np.where(v[..., :-1] > x, np.diff(v, axis=-1), 0.0), axis=-1, out=ito[..., 1:])
    pos0 = np.maximum(v[..., :1] - x, 0.0)
    half_l = np.maximum(v - x, 0.0) - pos0 - ito
    if local_time is None:
        local_time = tanaka_local_time(path, x)
    recon = pos0 + ito + 0.5 * local_time.values
    return path.with_values(recon), path.with_values(half_l)


def default_x_grid(values: np.ndarray, band: BandConfig, points_per_band: int = 4) -> np.ndarray:
    """Uniform grid of spacing ``2 eps / points_per_band`` aligned on 0.

    It covers ``[min - eps, max + eps]``, so every sampled value has exactly
    ``points_per_band`` grid levels whose band contains it.
    """
    h = 2.0 * band.epsilon / points_per_band
    lo = math.floor((float(np.min(values)) - band.epsilon) / h) - 1
    hi = math.ceil((float(np.max(values)) + band.epsilon) / h) + 1
    return np.arange(lo, hi + 1) * h


def x_cell_widths(x_grid: np.ndarray) -> np.ndarray:
    """Midpoint-rule cell widths of a strictly increasing grid."""
    x = np.asarray(x_grid, dtype=float)
    if x.size == 1:
        return np.ones(1)
    mids = 0.5 * (x[1:] + x[:-1])
    w = np.empty_like(x)
    w[1:-1] = np.diff(mids)
    w[0] = x[1] - x[0]
    w[-1] = x[-1] - x[-2]
    return w


@dataclass(frozen=True)
class LocalTimeField:
    """``values[k, j]`` estimates ``L`` at time ``t_grid.times[k]``, level ``x_grid[j]``."""

    t_grid: TimeGrid
    x_grid: np.ndarray
    values: np.ndarray
    epsilon: float
    weight: OccupationWeight

    @property
    def terminal(self) -> np.ndarray:
        return self.values[-1]

    def integrate(self, f=None, k: int | slice = -1) -> np.ndarray:
        """Midpoint rule for ``sum_x f(x) L^x dx`` at time index/indices ``k``."""
        dx = x_cell_widths(self.x_grid)
        fx = np.ones_like(self.x_grid) if f is None else np.asarray(f(self.x_grid), dtype=float)
        return self.values[k] @ (fx * dx)

    def write_csv(self, file) -> None:
        with open(file, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "L"])
            for t, row in zip(self.t_grid.times, self.values):
                for x, val in zip(self.x_grid, row):
                    w.writerow([f"{t:.17g}", f"{x:.17g}", f"{val:.17g}"])


def local_time_field(path: SamplePath, x_grid: Sequence[float] | None = None,
                     band: BandConfig | None = None,
                     weight: OccupationWeight | str = OccupationWeight.LEBESGUE,
                     time_stride: int = 1) -> LocalTimeField:
    """Band local time of one path on ``x_grid`` at every ``time_stride``-th grid time."""
    if path.values.ndim != 1:
        raise ValueError("local_time_field takes a single path")
    band = _band(path, band)
    weight = OccupationWeight(weight)
    x = default_x_grid(path.values, band) if x_grid is None else np.asarray(x_grid, dtype=float)
    if x.ndim != 1 or np.any(np.diff(x) <= 0):
        raise ValueError("x_grid must be strictly increasing")
    if path.grid.steps % time_stride:
        raise ValueError("time_stride must divide the number of steps")
    eps = band.epsilon
    left = path.values[:-1, None]
    inside = (left >= x - eps) & (left < x + eps)
    w = np.where(inside, step_weights(path, weight)[:, None], 0.0)
    cum = np.zeros((path.grid.steps + 1, x.size))
    np.cumsum(w, axis=0, out=cum[1:])
    cum *= 0.5 / eps
    t_grid = TimeGrid(path.grid.horizon, path.grid.steps // time_stride)
    return LocalTimeField(t_grid, x, cum[::time_stride], eps, weight)


def terminal_profile(path: SamplePath, x_grid: Sequence[float], band: BandConfig | None = None,
                     weight: OccupationWeight | str = OccupationWeight.LEBESGUE) -> np.ndarray:
    """Terminal band local time ``L_T^x`` for each ``x`` in ``x_grid``.

    Works on ensembles (shape ``(..., len(x_grid))``) without forming the
    full time-by-level field: the sampled values are sorted once and band
    masses read off cumulative weights.
    """
    band = _band(path, band)
    x = np.asarray(x_grid, dtype=float)
    eps = band.epsilon
    left = path.values[..., :-1].reshape(-1, path.grid.steps)
    w = step_weights(path, weight).reshape(-1, path.grid.steps)
    out = np.empty((left.shape[0], x.size))
    for r in range(left.shape[0]):
        order = np.argsort(left[r], kind="stable")
        sv = left[r, order]
        cw = np.concatenate([[0.0], np.cumsum(w[r, order])])
        hi = np.searchsorted(sv, x + eps, side="left")
        lo = np.searchsorted(sv, x - eps, side="left")
        out[r] = (cw[hi] - cw[lo]) * (0.5 / eps)
    return out.reshape(path.values.shape[:-1] + (x.size,))


def expected_local_time_gaussian(t: float, x: float) -> float:
    """``E[L_t^x]`` for standard Brownian motion from 0: ``int_0^t p(s, x) ds``.

    Substituting ``s = u^2`` removes the ``s^(-1/2)`` singularity at ``x = 0``.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 0.0
    x2 = float(x) * float(x)

    def integrand(u):
        return math.exp(-x2 / (2.0 * u * u)) if u > 0 else (1.0 if x2 == 0 else 0.0)

    val, _ = integrate.quad(integrand, 0.0, math.sqrt(t), epsabs=0.0, epsrel=1e-11, limit=200)
    return math.sqrt(2.0 / math.pi) * val


@dataclass(frozen=True)
class EnsembleSummary:
    x: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    n: int

    @classmethod
    def from_samples(cls, x: Sequence[float], samples: np.ndarray) -> "EnsembleSummary":
        samples = np.asarray(samples, dtype=float).reshape(-1, len(x))
        n = samples.shape[0]
        sd = samples.std(axis=0, ddof=1) if n > 1 else np.zeros(len(x))
        return cls(np.asarray(x, dtype=float), samples.mean(axis=0), sd / math.sqrt(n), n)

    def write_csv(self, file) -> None:
        with open(file, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "mean_L", "stderr", "n"])
            for x, m, s in zip(self.x, self.mean, self.stderr):
                w.writerow([f"{x:.17g}", f"{m:.17g}", f"{s:.17g}", self.n])
