"""Discretely sampled stochastic processes on uniform time grids.

Wiener paths, Euler-Maruyama diffusions, realized quadratic variation and
running extremes.  Every array-valued routine treats the last axis as time,
so a ``SamplePath`` may carry a leading replicate axis and the same
functions work on single paths and on whole ensembles.

Gaussian increments come from a Philox counter-based generator keyed on
``(seed, replicate)``; the position inside the stream is the step index.
Replicate ``r`` is therefore the same no matter how an ensemble is split
into batches.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import numpy as np

_MASK64 = (1 << 64) - 1


class DivergenceError(RuntimeError):
    """A simulated path produced a non-finite value."""

    def __init__(self, step: int, replicate: int | None = None):
        self.step = step
        self.replicate = replicate
        where = f" (replicate {replicate})" if replicate is not None else ""
        super().__init__(f"non-finite value at step {step}{where}")


@dataclass(frozen=True)
class TimeGrid:
    horizon: float
    steps: int

    def __post_init__(self):
        if isinstance(self.steps, bool) or int(self.steps) != self.steps:
            raise ValueError(f"steps must be an integer, got {self.steps!r}")
        object.__setattr__(self, "steps", int(self.steps))
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon}")
        object.__setattr__(self, "horizon", float(self.horizon))

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.steps + 1) * self.dt

    def steps_upto(self, t: float) -> int:
        """Number of whole grid steps contained in ``[0, t]``."""
        if t < 0:
            raise ValueError(f"time must be nonnegative, got {t}")
        if t > self.horizon * (1 + 1e-12):
            raise ValueError(f"time {t} exceeds horizon {self.horizon}")
        k = math.floor(t / self.dt + 1e-9)
        return min(k, self.steps)


@dataclass(frozen=True)
class SamplePath:
    """Values on a ``TimeGrid``; shape ``(..., steps + 1)``.

    ``driver_increments`` (shape ``(..., steps)``) holds the Wiener
    increments that generated the path, when known.
    """

    grid: TimeGrid
    values: np.ndarray
    driver_increments: np.ndarray | None = None

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 0 or values.shape[-1] != self.grid.steps + 1:
            raise ValueError(
                f"values must have last axis of length {self.grid.steps + 1}, "
                f"got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("path values must be finite")
        object.__setattr__(self, "values", values)
        if self.driver_increments is not None:
            inc = np.asarray(self.driver_increments, dtype=float)
            if inc.shape != values.shape[:-1] + (self.grid.steps,):
                raise ValueError(
                    f"driver_increments shape {inc.shape} does not match "
                    f"values shape {values.shape}")
            object.__setattr__(self, "driver_increments", inc)

    @property
    def times(self) -> np.ndarray:
        return self.grid.times

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.values, axis=-1)

    @property
    def n_replicates(self) -> int:
        return 1 if self.values.ndim == 1 else int(np.prod(self.values.shape[:-1]))

    @property
    def terminal(self):
        """Values at the horizon; a copy, so batches can be released."""
        v = self.values[..., -1]
        return v.copy() if isinstance(v, np.ndarray) else float(v)

    def replicate(self, i: int) -> "SamplePath":
        if self.values.ndim == 1:
            if i != 0:
                raise IndexError(i)
            return self
        inc = None if self.driver_increments is None else self.driver_increments[i]
        return SamplePath(self.grid, self.values[i], inc)

    def replicates(self) -> Iterator["SamplePath"]:
        for i in range(self.n_replicates):
            yield self.replicate(i)

    def with_values(self, values: np.ndarray) -> "SamplePath":
        """Same grid, new values, no driver."""
        return SamplePath(self.grid, values)


@dataclass(frozen=True)
class ItoCoefficients:
    """Drift and diffusion of ``dX = mu(X) dt + sigma(X) dW``.

    Both callables must accept numpy arrays (scalars are broadcast).
    """

    drift: Callable[[np.ndarray], np.ndarray | float]
    diffusion: Callable[[np.ndarray], np.ndarray | float]
    initial: float = 0.0


@dataclass(frozen=True)
class SimulationConfig:
    seed: int
    replicates: int
    grid: TimeGrid

    def __post_init__(self):
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ValueError(f"replicates must be a positive integer, got {self.replicates}")
        object.__setattr__(self, "replicates", int(self.replicates))
        object.__setattr__(self, "seed", int(self.seed))


def derive_seed(seed: int, stream: int) -> int:
    """Seed of an independent sub-stream, e.g. for the two sides of a test."""
    ss = np.random.SeedSequence([seed & _MASK64, stream])
    return int(ss.generate_state(1, np.uint64)[0])


def replicate_generator(seed: int, replicate: int) -> np.random.Generator:
    key = (seed & _MASK64) | (int(replicate) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def wiener_increments(seed: int, grid: TimeGrid,
                      replicates: Sequence[int] | range) -> np.ndarray:
    """Increments ``dW``, shape ``(len(replicates), grid.steps)``."""
    out = np.empty((len(replicates), grid.steps))
    scale = math.sqrt(grid.dt)
    for row, r in enumerate(replicates):
        replicate_generator(seed, r).standard_normal(grid.steps, out=out[row])
    out *= scale
    return out


def _replicate_range(config: SimulationConfig, replicates) -> range | Sequence[int]:
    if replicates is None:
        return range(config.replicates)
    return replicates


def simulate_wiener(config: SimulationConfig, replicates=None) -> SamplePath:
    """Standard Wiener paths started at 0.

    Returns one ``SamplePath`` with values of shape ``(R, steps + 1)``;
    ``replicates`` selects a subset of replicate indices (default all).
    """
    reps = _replicate_range(config, replicates)
    dw = wiener_increments(config.seed, config.grid, reps)
    values = np.zeros((len(reps), config.grid.steps + 1))
    np.cumsum(dw, axis=1, out=values[:, 1:])
    return SamplePath(config.grid, values, dw)


def simulate_ito(coeffs: ItoCoefficients, config: SimulationConfig,
                 replicates=None) -> SamplePath:
    """Euler-Maruyama: ``X[i+1] = X[i] + mu(X[i]) dt + sigma(X[i]) dW[i]``."""
    reps = _replicate_range(config, replicates)
    grid = config.grid
    dw = wiener_increments(config.seed, grid, reps)
    values = np.empty((len(reps), grid.steps + 1))
    x = np.full(len(reps), float(coeffs.initial))
    values[:, 0] = x
    dt = grid.dt
    with np.errstate(all="ignore"):
        for i in range(grid.steps):
            x = x + coeffs.drift(x) * dt + coeffs.diffusion(x) * dw[:, i]
            if not np.all(np.isfinite(x)):
                bad = int(np.flatnonzero(~np.isfinite(x))[0])
                raise DivergenceError(i + 1, reps[bad])
            values[:, i + 1] = x
    return SamplePath(grid, values, dw)


def iter_batches(config: SimulationConfig, batch_size: int = 256) -> Iterator[range]:
    """Consecutive replicate ranges covering ``config.replicates``."""
    for start in range(0, config.replicates, batch_size):
        yield range(start, min(start + batch_size, config.replicates))


def quadratic_variation(path: SamplePath) -> SamplePath:
    """Running sum of squared increments, starting at 0."""
    qv = np.zeros_like(path.values)
    np.cumsum(np.square(path.increments), axis=-1, out=qv[..., 1:])
    return path.with_values(qv)


def running_extremes(path: SamplePath) -> tuple[SamplePath, SamplePath]:
    """Running maximum and running minimum."""
    hi = np.maximum.accumulate(path.values, axis=-1)
    lo = np.minimum.accumulate(path.values, axis=-1)
    return path.with_values(hi), path.with_values(lo)


def write_path_csv(path: SamplePath, file) -> None:
    """CSV with header ``t,value[,dW]``; ``dW`` on row i is W(t[i+1]) - W(t[i])."""
    if path.values.ndim != 1:
        raise ValueError("write_path_csv takes a single path; use path.replicate(i)")
    own = isinstance(file, (str, bytes)) or hasattr(file, "__fspath__")
    fh = open(file, "w", newline="") if own else file
    try:
        w = csv.writer(fh)
        has_dw = path.driver_increments is not None
        w.writerow(["t", "value", "dW"] if has_dw else ["t", "value"])
        for i, (t, v) in enumerate(zip(path.times, path.values)):
            row = [f"{t:.17g}", f"{v:.17g}"]
            if has_dw:
                row.append(f"{path.driver_increments[i]:.17g}" if i < path.grid.steps else "")
            w.writerow(row)
    finally:
        if own:
            fh.close()


def read_path_csv(file) -> SamplePath:
    own = isinstance(file, (str, bytes)) or hasattr(file, "__fspath__")
    fh = open(file, newline="") if own else file
    try:
        rows = list(csv.reader(fh))
    finally:
        if own:
            fh.close()
    header, body = rows[0], rows[1:]
    t = np.array([float(r[0]) for r in body])
    values = np.array([float(r[1]) for r in body])
    grid = TimeGrid(t[-1], len(t) - 1)
    dw = None
    if len(header) > 2 and header[2] == "dW":
        dw = np.array([float(r[2]) for r in body[:-1]])
    return SamplePath(grid, values, dw)
