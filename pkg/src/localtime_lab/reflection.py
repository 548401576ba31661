"""Skorohod reflection at zero and regulated SDEs.

For a path ``x`` with ``x_0 = 0`` the regulator is ``f_t = max_{s<=t} x_s^-``
and the regulated path is ``z = x + f``.  Regulated diffusions are simulated
with the projected Euler scheme, which is the same map applied step by step.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .localtime import BandConfig, band_local_time
from .occupation import OccupationWeight
from .paths import (DivergenceError, ItoCoefficients, SamplePath, SimulationConfig,
                    wiener_increments)


@dataclass(frozen=True)
class ReflectedPair:
    """Input path ``x``, regulated path ``z`` and regulator ``f``."""

    x: SamplePath
    z: SamplePath
    f: SamplePath

    def replicate(self, i: int) -> "ReflectedPair":
        return ReflectedPair(self.x.replicate(i), self.z.replicate(i), self.f.replicate(i))

    def write_csv(self, file) -> None:
        if self.z.values.ndim != 1:
            raise ValueError("write_csv takes a single pair; use replicate(i)")
        with open(file, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "z", "f"])
            for row in zip(self.z.times, self.x.values, self.z.values, self.f.values):
                w.writerow([f"{v:.17g}" for v in row])


def skorohod_map(path: SamplePath) -> ReflectedPair:
    x = path.values
    if np.any(x[..., 0] != 0.0):
        raise ValueError("skorohod_map needs paths starting at 0")
    f = np.maximum.accumulate(np.maximum(-x, 0.0), axis=-1)
    return ReflectedPair(path, path.with_values(x + f), path.with_values(f))


@dataclass
class SkorohodReport:
    nonnegative: bool
    nondecreasing: bool
    additive: bool
    complementary: bool
    min_z: float
    max_decrease: float
    additivity_error: float
    complementarity: float
    complementarity_bound: float
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def verify_skorohod(pair: ReflectedPair, complementarity_tolerance: float = 4 * np.finfo(float).eps,
                    additivity_tolerance: float = 0.0) -> SkorohodReport:
    """Check the four Skorohod properties on the grid.

    Complementarity is checked in summed form: ``sum_i z_i (f_i - f_{i-1})``
    with ``f_{-1} = 0``, bounded by ``tol * f_T * max z`` per path.
    Additivity is exact unless ``additivity_tolerance`` (relative to the
    path scale) is given, as for schemes that accumulate ``x`` and ``f``
    separately.
    """
    x, z, f = pair.x.values, pair.z.values, pair.f.values
    min_z = float(np.min(z))
    jumps = np.diff(f, axis=-1, prepend=0.0)
    max_decrease = float(max(0.0, -np.min(jumps)))
    scale = max(1.0, float(np.max(np.abs(x))), float(np.max(np.abs(f))))
    add_err = float(np.max(np.abs(z - (x + f))))
    comp = np.sum(z * jumps, axis=-1)
    bound = complementarity_tolerance * f[..., -1] * np.max(z, axis=-1)
    worst = int(np.argmax(comp - bound)) if np.ndim(comp) else 0
    comp_w = float(np.ravel(comp)[worst])
    bound_w = float(np.ravel(bound)[worst])
    report = SkorohodReport(
        nonnegative=min_z >= 0.0,
        nondecreasing=max_decrease == 0.0,
        additive=add_err <= additivity_tolerance * scale,
        complementary=bool(np.all(comp <= bound)),
        min_z=min_z, max_decrease=max_decrease, additivity_error=add_err,
        complementarity=comp_w, complementarity_bound=bound_w)
    for name in ("nonnegative", "nondecreasing", "additive", "complementary"):
        if not getattr(report, name):
            report.failures.append(name)
    return report


@dataclass(frozen=True)
class RegulatedSdeSpec:
    coeffs: ItoCoefficients
    lipschitz_hint: float | None = None

    def __post_init__(self):
        if self.coeffs.initial != 0.0:
            raise ValueError("regulated SDEs start at 0")


def simulate_regulated_sde(spec: RegulatedSdeSpec, config: SimulationConfig,
                           replicates=None) -> ReflectedPair:
    """Projected Euler: ``Z[i+1] = max(Z[i] + mu dt + sigma dW, 0)``.

    The pushed amount accumulates in ``F``; ``x`` is the free part
    ``sum (mu(Z) dt + sigma(Z) dW)`` so that ``z = x + f`` up to round-off.
    """
    reps = range(config.replicates) if replicates is None else replicates
    grid = config.grid
    dt = grid.dt
    dw = wiener_increments(config.seed, grid, reps)
    shape = (len(reps), grid.steps + 1)
    zs, fs, xs = np.zeros(shape), np.zeros(shape), np.zeros(shape)
    z = np.zeros(len(reps))
    fcur = np.zeros(len(reps))
    xcur = np.zeros(len(reps))
    mu, sigma = spec.coeffs.drift, spec.coeffs.diffusion
    with np.errstate(all="ignore"):
        for i in range(grid.steps):
            step = mu(z) * dt + sigma(z) * dw[:, i]
            free = z + step
            if not np.all(np.isfinite(free)):
                bad = int(np.flatnonzero(~np.isfinite(free))[0])
                raise DivergenceError(i + 1, reps[bad])
            z = np.maximum(free, 0.0)
            fcur = fcur + (z - free)
            xcur = xcur + step
            zs[:, i + 1], fs[:, i + 1], xs[:, i + 1] = z, fcur, xcur
    return ReflectedPair(SamplePath(grid, xs, dw), SamplePath(grid, zs), SamplePath(grid, fs))


@dataclass
class RegulatorGap:
    regulator: np.ndarray
    half_local_time: np.ndarray
    relative_gap: float
    degenerate: bool


def regulator_vs_localtime(pair: ReflectedPair, band: BandConfig | None = None) -> RegulatorGap:
    """Compare ``F_T`` with half the one-sided QV-weighted band local time of ``Z`` at 0.

    ``relative_gap`` compares ensemble means.  ``degenerate`` flags the case
    where ``F`` grows but ``Z`` carries no quadratic variation (zero
    diffusion), in which the identification with local time does not apply.
    """
    lt = band_local_time(pair.z, 0.0, band, OccupationWeight.QUADRATIC_VARIATION, one_sided=True)
    f_t = np.atleast_1d(pair.f.terminal)
    half = 0.5 * np.atleast_1d(lt.terminal)
    mf, ml = float(np.mean(f_t)), float(np.mean(half))
    if mf == 0.0 and ml == 0.0:
        gap = 0.0
    else:
        gap = abs(mf - ml) / (mf if mf > 0.0 else ml)
    degenerate = mf > 0.0 and ml == 0.0
    return RegulatorGap(f_t, half, gap, degenerate)
