"""Named experiments, one per acceptance check of the toolkit.

Each runner takes a resolved ``ExperimentConfig`` and a writable directory,
writes its CSV artifacts there and returns a list of ``Report``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import optimize, stats

from .convexcalc import ito_tanaka_residual, linear_combo, square_combo
from .localtime import (BandConfig, EnsembleSummary, band_local_time, default_x_grid,
                        local_time_field)
from .occupation import (DifferentiablePathSpec, OccupationWeight, deterministic_local_time,
                         occupation_histogram, write_histogram_csv)
from .paths import (ItoCoefficients, SamplePath, SimulationConfig, TimeGrid, derive_seed,
                    iter_batches, simulate_ito, simulate_wiener, write_path_csv)
from .reflection import (RegulatedSdeSpec, ReflectedPair, regulator_vs_localtime,
                         simulate_regulated_sde, skorohod_map, verify_skorohod)
from .timechange import (ClockDensity, apply_time_change, build_time_change,
                         check_localtime_transform, check_qv_transform, default_out_grid)
from .verify import (CheckResult, Report, check_abs_w_localtime, check_joint_identity,
                     check_localtime_maximum_identity, check_standard_wiener, folded_normal_cdf,
                     half_normal_cdf, ks_one_sample, occupation_density_identity,
                     write_reports_csv)

DEFAULT_SEED = 1729
QV = OccupationWeight.QUADRATIC_VARIATION
LEB = OccupationWeight.LEBESGUE

DRIFTS: dict[str, Callable[[float], Callable]] = {
    "zero": lambda c: (lambda x: np.zeros_like(x)),
    "constant": lambda c: (lambda x: np.full_like(x, c)),
    "ou": lambda c: (lambda x: -c * x),
}
DIFFUSIONS: dict[str, Callable[[float], Callable]] = {
    "zero": lambda c: (lambda x: np.zeros_like(x)),
    "constant": lambda c: (lambda x: np.full_like(x, c)),
}


class ConfigError(ValueError):
    """Invalid experiment configuration; the message names the offending key."""


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    seed: int = DEFAULT_SEED
    horizon: float = 1.0
    steps: int | None = None
    replicates: int | None = None
    epsilon: float | None = None
    x_min: float | None = None
    x_max: float | None = None
    x_points: int | None = None
    drift: str = "zero"
    drift_value: float = 0.0
    diffusion: str = "constant"
    diffusion_value: float = 1.0
    sigmas: tuple = (0.5, 2.0)
    batch_size: int = 256
    out: str | None = None

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in fields(cls)]

    def resolved(self) -> "ExperimentConfig":
        """Fill experiment defaults and validate every parameter."""
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment: unknown name {self.experiment!r}")
        d = EXPERIMENTS[self.experiment].defaults
        cfg = replace(self,
                      steps=d["steps"] if self.steps is None else self.steps,
                      replicates=d["replicates"] if self.replicates is None else self.replicates)
        cfg._validate()
        return cfg

    def _validate(self):
        def need(ok, key, msg):
            if not ok:
                raise ConfigError(f"{key}: {msg} (got {getattr(self, key)!r})")

        def is_int(v):
            return isinstance(v, (int, np.integer)) and not isinstance(v, bool)

        def is_real(v):
            return isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v)

        need(is_int(self.seed) and 0 <= self.seed < 2 ** 64, "seed", "must be an integer in [0, 2^64)")
        need(is_real(self.horizon) and self.horizon > 0, "horizon", "must be a positive number")
        need(is_int(self.steps) and self.steps >= 1, "steps", "must be an integer >= 1")
        need(is_int(self.replicates) and self.replicates >= 2, "replicates", "must be an integer >= 2")
        need(is_int(self.batch_size) and self.batch_size >= 1, "batch_size", "must be an integer >= 1")
        need(self.epsilon is None or (is_real(self.epsilon) and self.epsilon > 0),
             "epsilon", "must be a positive number")
        xs = (self.x_min, self.x_max, self.x_points)
        need(all(v is None for v in xs) or all(v is not None for v in xs), "x_points",
             "x_min, x_max and x_points must be given together")
        if self.x_points is not None:
            need(is_real(self.x_min), "x_min", "must be a number")
            need(is_real(self.x_max) and self.x_max > self.x_min, "x_max", "must exceed x_min")
            need(is_int(self.x_points) and self.x_points >= 2, "x_points", "must be an integer >= 2")
        need(self.drift in DRIFTS, "drift", f"must be one of {sorted(DRIFTS)}")
        need(self.diffusion in DIFFUSIONS, "diffusion", f"must be one of {sorted(DIFFUSIONS)}")
        need(is_real(self.drift_value), "drift_value", "must be a number")
        need(is_real(self.diffusion_value), "diffusion_value", "must be a number")
        need(isinstance(self.sigmas, tuple) and len(self.sigmas) >= 1
             and all(is_real(s) and s > 0 for s in self.sigmas), "sigmas",
             "must be a tuple of positive numbers")
        need(self.out is None or isinstance(self.out, str), "out", "must be a string path")

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(float(self.horizon), int(self.steps))

    @property
    def simulation(self) -> SimulationConfig:
        return SimulationConfig(int(self.seed), int(self.replicates), self.grid)

    @property
    def band(self) -> BandConfig:
        return BandConfig.for_grid(self.grid) if self.epsilon is None else BandConfig(self.epsilon)

    def x_grid(self, values: np.ndarray) -> np.ndarray:
        if self.x_points is None:
            return default_x_grid(values, self.band)
        return np.linspace(self.x_min, self.x_max, self.x_points)

    def coefficients(self) -> ItoCoefficients:
        return ItoCoefficients(DRIFTS[self.drift](float(self.drift_value)),
                               DIFFUSIONS[self.diffusion](float(self.diffusion_value)))

    def echo(self) -> str:
        return "".join(f"{k} = {v!r}\n" for k, v in asdict(self).items())


@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    run: Callable[[ExperimentConfig, Path], list[Report]]
    defaults: dict


EXPERIMENTS: dict[str, Experiment] = {}


def _register(name: str, description: str, steps: int, replicates: int):
    def deco(fn):
        EXPERIMENTS[name] = Experiment(name, description, fn, {"steps": steps, "replicates": replicates})
        return fn
    return deco


def list_experiments(filter_text: str = "") -> list[tuple[str, str]]:
    return [(e.name, e.description) for e in EXPERIMENTS.values() if filter_text in e.name]


def _first_path(cfg: ExperimentConfig) -> SamplePath:
    return simulate_wiener(cfg.simulation, range(1))


def band_expectation_discrete(grid: TimeGrid, epsilon: float, x: float = 0.0) -> float:
    """Exact mean of the Lebesgue band estimate for a Wiener path sampled on ``grid``."""
    t = grid.times[:-1]
    p = np.empty_like(t)
    p[0] = 1.0 if x - epsilon <= 0.0 < x + epsilon else 0.0
    s = np.sqrt(t[1:])
    p[1:] = stats.norm.cdf((x + epsilon) / s) - stats.norm.cdf((x - epsilon) / s)
    return float(np.sum(p) * grid.dt * 0.5 / epsilon)


@_register("expected_localtime", "mean band local time at 0 against sqrt(2T/pi)", 2 ** 14, 50_000)
def run_expected_localtime(cfg: ExperimentConfig, out: Path) -> list[Report]:
    band, sim = cfg.band, cfg.simulation
    lt = np.concatenate([band_local_time(simulate_wiener(sim, r), 0.0, band).terminal
                         for r in iter_batches(sim, cfg.batch_size)])
    summary = EnsembleSummary.from_samples([0.0], lt[:, None])
    summary.write_csv(out / "localtime_mean.csv")
    target = math.sqrt(2.0 * cfg.horizon / math.pi)
    mean, se = float(summary.mean[0]), float(summary.stderr[0])
    rel = abs(mean / target - 1.0)
    disc = band_expectation_discrete(cfg.grid, band.epsilon)
    rep = Report("expected_localtime")
    rep.checks.append(CheckResult.at_most("mean_rel_error", rel, 0.02, sim.replicates, sim.seed,
                                          mean=mean, target=target, stderr=se))
    rep.measured.update(epsilon=band.epsilon, band_expectation=disc,
                        band_bias=disc / target - 1.0, zscore_vs_band_expectation=(mean - disc) / se)
    return [rep]


@_register("localtime_maximum", "Tanaka local time at 0 against the running maximum in law",
           2 ** 14, 20_000)
def run_localtime_maximum(cfg: ExperimentConfig, out: Path) -> list[Report]:
    write_path_csv(_first_path(cfg).replicate(0), out / "path.csv")
    return [check_localtime_maximum_identity(cfg.simulation, ks_limit=0.03)]


@_register("joint_identity", "(S - W, S) against (|W|, L) by marginals and correlation",
           2 ** 14, 20_000)
def run_joint_identity(cfg: ExperimentConfig, out: Path) -> list[Report]:
    return [check_joint_identity(cfg.simulation, ks_limit=0.03)]


@_register("abs_w_factor2", "local time of |W| at 0 is twice that of W", 2 ** 14, 4_000)
def run_abs_w_factor2(cfg: ExperimentConfig, out: Path) -> list[Report]:
    return [check_abs_w_localtime(cfg.simulation, cfg.band)]


@_register("occupation_density", "sum f(X)(dX)^2 against sum_x f(x) L^x dx", 2 ** 14, 64)
def run_occupation_density(cfg: ExperimentConfig, out: Path) -> list[Report]:
    paths = simulate_wiener(cfg.simulation)
    first = paths.replicate(0)
    x = cfg.x_grid(first.values)
    local_time_field(first, x, cfg.band, QV, time_stride=_stride(cfg.steps)).write_csv(out / "field.csv")
    return [occupation_density_identity(paths, name, cfg.band)
            for name in ("constant-one", "gaussian-bump", "indicator-interval")]


def _stride(steps: int, target: int = 64) -> int:
    s = max(1, steps // target)
    while steps % s:
        s -= 1
    return s


def _median_square_residual(cfg: ExperimentConfig, steps: int) -> tuple[float, np.ndarray]:
    sub = replace(cfg, steps=steps)
    paths = simulate_wiener(sub.simulation)
    res = []
    for p in paths.replicates():
        fld = local_time_field(p, sub.x_grid(p.values), sub.band, LEB)
        res.append(ito_tanaka_residual(p, square_combo(), fld).terminal)
    res = np.abs(np.asarray(res))
    return float(np.median(res)), res


def dyadic_walk(seed: int, steps: int, scale_exp: int = -8) -> SamplePath:
    """Random walk with steps ``+-2^scale_exp``; all sums are exact in binary floating point."""
    rng = np.random.default_rng(seed)
    v = np.concatenate([[0.0], np.cumsum(rng.choice([-1.0, 1.0], steps))]) * 2.0 ** scale_exp
    return SamplePath(TimeGrid(1.0, steps), v)


@_register("ito_tanaka_square", "Ito-Tanaka residual of x^2 and of linear functions", 2 ** 14, 64)
def run_ito_tanaka_square(cfg: ExperimentConfig, out: Path) -> list[Report]:
    med, res = _median_square_residual(cfg, cfg.steps)
    med_fine, _ = _median_square_residual(cfg, 2 * cfg.steps)
    np.savetxt(out / "square_residuals.csv", res, header="abs_residual", comments="", fmt="%.17g")
    rep = Report("ito_tanaka_square")
    n = cfg.replicates
    rep.checks.append(CheckResult.at_most("median_abs_residual", med, 0.05, n, cfg.seed))
    rep.checks.append(CheckResult("median_decreases_on_halving", med_fine, med, med_fine < med, n,
                                  cfg.seed, {"steps_fine": 2 * cfg.steps}))
    worst = 0.0
    combo = linear_combo(2.0, -3.0)
    for r in range(8):
        walk = dyadic_walk(derive_seed(cfg.seed, 100 + r), cfg.steps)
        fld = local_time_field(walk, np.array([-1.0, 1.0]), cfg.band, LEB)
        worst = max(worst, float(np.max(np.abs(ito_tanaka_residual(walk, combo, fld).values))))
    rep.checks.append(CheckResult.at_most("linear_max_abs_residual", worst, 0.0, 8, cfg.seed))
    return [rep]


def brute_force_minimal_regulator(x: np.ndarray) -> np.ndarray:
    """Least feasible nondecreasing staircase by exhaustive search.

    Candidate levels are 0 and the values ``-x_j``; a regulator only needs
    these.  Every feasible candidate is checked to dominate the returned one.
    """
    levels = sorted({0.0, *[float(v) for v in -x if v > 0]})
    best, best_sum, feasible = None, math.inf, []
    for g in itertools.combinations_with_replacement(levels, x.size):
        g = np.asarray(g)
        if np.all(x + g >= 0.0):
            feasible.append(g)
            if g.sum() < best_sum:
                best, best_sum = g, g.sum()
    if not all(np.all(g >= best) for g in feasible):
        raise AssertionError("no pointwise least regulator among candidates")
    return best


def lp_minimal_regulator(x: np.ndarray) -> np.ndarray:
    """Least regulator via linear programming: minimise ``sum g`` subject to
    ``g_0 >= 0``, ``g_{i+1} >= g_i`` and ``x + g >= 0``."""
    n = x.size
    a_ub = np.zeros((n - 1, n))
    idx = np.arange(n - 1)
    a_ub[idx, idx], a_ub[idx, idx + 1] = 1.0, -1.0
    bounds = [(max(0.0, -float(v)), None) for v in x]
    res = optimize.linprog(np.ones(n), A_ub=a_ub if n > 1 else None, b_ub=np.zeros(n - 1) if n > 1 else None,
                           bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(res.message)
    return res.x


@_register("skorohod_unit", "Skorohod map properties, minimality and idempotence", 2 ** 12, 1_000)
def run_skorohod_unit(cfg: ExperimentConfig, out: Path) -> list[Report]:
    sim = replace(cfg, replicates=min(cfg.replicates, 256)).simulation
    paths = simulate_ito(cfg.coefficients(), sim)
    pair = skorohod_map(paths)
    pair.replicate(0).write_csv(out / "reflected_pair.csv")
    sk = verify_skorohod(pair)
    rep = Report("skorohod_unit")
    rep.checks += [
        CheckResult.at_most("negative_min_z", max(0.0, -sk.min_z), 0.0, sim.replicates, sim.seed),
        CheckResult.at_most("max_decrease_f", sk.max_decrease, 0.0, sim.replicates, sim.seed),
        CheckResult.at_most("additivity_error", sk.additivity_error, 0.0, sim.replicates, sim.seed),
        CheckResult.at_most("complementarity", sk.complementarity, sk.complementarity_bound,
                            sim.replicates, sim.seed),
    ]
    again = skorohod_map(pair.z)
    idem = max(float(np.max(np.abs(again.z.values - pair.z.values))), float(np.max(again.f.values)))
    rep.checks.append(CheckResult.at_most("idempotence_error", idem, 0.0, sim.replicates, sim.seed))
    rng = np.random.default_rng(derive_seed(cfg.seed, 7))
    lp_err, bf_err, n_bf = 0.0, 0.0, 0
    for k in range(cfg.replicates):
        n = int(rng.integers(1, 21))
        x = np.concatenate([[0.0], np.cumsum(rng.normal(size=n))])
        f = skorohod_map(SamplePath(TimeGrid(1.0, n), x)).f.values
        lp_err = max(lp_err, float(np.max(np.abs(lp_minimal_regulator(x) - f))))
        if n <= 7:
            bf_err = max(bf_err, float(np.max(np.abs(brute_force_minimal_regulator(x) - f))))
            n_bf += 1
    rep.checks.append(CheckResult.at_most("minimality_lp_error", lp_err, 1e-9, cfg.replicates, cfg.seed))
    rep.checks.append(CheckResult.at_most("minimality_exhaustive_error", bf_err, 0.0, n_bf, cfg.seed))
    return [rep]


@_register("regulated_unit", "regulated SDE laws and regulator against local time", 2 ** 14, 20_000)
def run_regulated_unit(cfg: ExperimentConfig, out: Path) -> list[Report]:
    spec = RegulatedSdeSpec(cfg.coefficients())
    sim = cfg.simulation
    z_t, f_t, lt_half = [], [], []
    for r in iter_batches(sim, cfg.batch_size):
        pair = simulate_regulated_sde(spec, sim, r)
        if r.start == 0:
            pair.replicate(0).write_csv(out / "regulated_pair.csv")
        gap = regulator_vs_localtime(pair, cfg.band)
        z_t.append(pair.z.terminal)
        f_t.append(gap.regulator)
        lt_half.append(gap.half_local_time)
    z_t, f_t, lt_half = map(np.concatenate, (z_t, f_t, lt_half))
    n = sim.replicates
    scale = float(cfg.diffusion_value) ** 2 * cfg.horizon
    rep = Report("regulated_unit")
    rep.checks.append(CheckResult.from_ks("ks_z_vs_folded_normal",
                                          ks_one_sample(z_t, folded_normal_cdf(scale)), n, sim.seed, 0.03))
    rep.checks.append(CheckResult.from_ks("ks_f_vs_half_normal",
                                          ks_one_sample(f_t, half_normal_cdf(scale)), n, sim.seed, 0.03))
    mf, ml = float(np.mean(f_t)), float(np.mean(lt_half))
    gap = abs(mf - ml) / mf if mf > 0 else (0.0 if ml == 0 else math.inf)
    rep.checks.append(CheckResult.at_most("regulator_vs_localtime_gap", gap, 0.10, n, sim.seed,
                                          mean_regulator=mf, mean_half_local_time=ml))
    return [rep]


def _time_changed_ensemble(cfg: ExperimentConfig, sigma: float):
    """Scaled Wiener paths ``sigma W`` with the clock ``g = sigma``, in batches."""
    sim = cfg.simulation
    clock = ClockDensity.constant(sigma)
    for r in iter_batches(sim, cfg.batch_size):
        w = simulate_wiener(sim, r)
        x = w.with_values(sigma * w.values)
        yield x, build_time_change(x, clock)


@_register("timechange_standardize", "time-changed scaled Wiener paths are standard Wiener",
           2 ** 13, 2_000)
def run_timechange_standardize(cfg: ExperimentConfig, out: Path) -> list[Report]:
    reports = []
    for sigma in cfg.sigmas:
        xcs, qv_gaps, lhs, rhs = [], [], [], []
        for x, tc in _time_changed_ensemble(cfg, float(sigma)):
            grid_out = default_out_grid(x, tc)
            xcs.append(apply_time_change(x, tc, grid_out).values)
            qv_gaps.append(check_qv_transform(x, tc, grid_out).per_path)
            lt = check_localtime_transform(x, tc, 0.0, cfg.band, grid_out)
            lhs.append(lt.lhs)
            rhs.append(lt.rhs)
        ens = SamplePath(grid_out, np.concatenate(xcs))
        rep = check_standard_wiener(ens)
        rep.name = f"timechange_standardize.sigma_{sigma:g}"
        qv_gap = float(np.mean(np.concatenate(qv_gaps)))
        ml, mr = float(np.mean(np.concatenate(lhs))), float(np.mean(np.concatenate(rhs)))
        lt_gap = abs(ml - mr) / max(abs(ml), abs(mr))
        rep.checks.append(CheckResult.at_most("qv_transform_gap", qv_gap, 0.05, ens.n_replicates, cfg.seed))
        rep.checks.append(CheckResult.at_most("localtime_transform_gap", lt_gap, 0.10, ens.n_replicates,
                                              cfg.seed, mean_lhs=ml, mean_rhs=mr))
        reports.append(rep)
    first, _ = next(_time_changed_ensemble(replace(cfg, batch_size=1), float(cfg.sigmas[0])))
    build_time_change(first.replicate(0), ClockDensity.constant(float(cfg.sigmas[0]))).write_csv(
        out / "time_change.csv")
    return reports


@_register("deterministic_ramp", "deterministic oracles and negative controls", 2 ** 12, 2_000)
def run_deterministic_ramp(cfg: ExperimentConfig, out: Path) -> list[Report]:
    grid = cfg.grid
    band = cfg.band
    eps = band.epsilon
    ramp = SamplePath(grid, grid.times.copy())
    inner = default_x_grid(ramp.values, band)
    inner = inner[(inner >= eps) & (inner <= grid.horizon - eps)]
    fld = local_time_field(ramp, inner, band, LEB, time_stride=_stride(grid.steps))
    fld.write_csv(out / "ramp_field.csv")
    ramp_err = float(np.max(np.abs(fld.terminal - 1.0)))
    spec = DifferentiablePathSpec(lambda t: t, lambda t: np.ones_like(t))
    crossing_err = max(abs(deterministic_local_time(spec, float(v), grid.horizon) - 1.0)
                       for v in (0.25, 0.5, 0.75))
    const = SamplePath(grid, np.full(grid.steps + 1, 0.3))
    edges = np.linspace(-1.0, 1.0, 21)
    mass = occupation_histogram(const, edges, LEB)
    write_histogram_csv(edges, mass, out / "constant_histogram.csv")
    nonzero = int(np.count_nonzero(mass))
    rep = Report("deterministic_ramp")
    rep.checks += [
        CheckResult.at_most("ramp_band_max_error", ramp_err, eps, inner.size, None, epsilon=eps),
        CheckResult.at_most("ramp_crossing_error", crossing_err, 1e-9, 3, None),
        CheckResult("constant_path_bins_with_mass", float(nonzero), 1.0,
                    nonzero == 1 and math.isclose(float(mass.sum()), grid.horizon), grid.steps, None,
                    {"total_mass": float(mass.sum())}),
    ]
    controls = negative_controls(cfg)
    write_reports_csv(controls, out / "controls.csv")
    for c in controls:
        rep.checks.append(CheckResult(f"control_fails.{c.name}", float(not c.passed), 1.0,
                                      not c.passed, 0, cfg.seed,
                                      {"failed_checks": ";".join(k.check for k in c.checks if not k.passed)}))
    return [rep]


def negative_controls(cfg: ExperimentConfig) -> list[Report]:
    """Deliberately wrong inputs to every identity check; each report must fail.

    Identity checks use the full-size ``cfg.replicates``; the cheaper
    deterministic controls use a handful of paths.
    """
    sim = cfg.simulation
    out = [
        check_localtime_maximum_identity(sim, negative_control=True),
        check_joint_identity(sim, negative_control=True),
        check_abs_w_localtime(sim, cfg.band, negative_control=True),
    ]
    rng = np.random.default_rng(derive_seed(cfg.seed, 11))
    slope = SamplePath(cfg.grid, cfg.grid.times[None, :] * rng.normal(size=(sim.replicates, 1)))
    sw = check_standard_wiener(slope)
    sw.name = "standard_wiener_control"
    out.append(sw)
    x = simulate_wiener(replace(cfg, replicates=16).simulation)
    x = x.with_values(2.0 * x.values)
    od = occupation_density_identity(x, "constant-one", cfg.band, weight=LEB)
    od.name = "occupation_density_control"
    out.append(od)
    w = simulate_wiener(replace(cfg, replicates=16).simulation)
    pair = skorohod_map(w)
    f_bad = pair.f.values.copy()
    f_bad[:, -1] -= 1e-3
    bad = verify_skorohod(ReflectedPair(pair.x, pair.z, pair.f.with_values(f_bad)))
    sk = Report("skorohod_control")
    sk.checks.append(CheckResult("nondecreasing", bad.max_decrease, 0.0, bad.nondecreasing, 16, sim.seed))
    out.append(sk)
    return out
