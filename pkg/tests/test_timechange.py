import math

import numpy as np
import pytest

from localtime_lab.paths import (ItoCoefficients, SamplePath, SimulationConfig, TimeGrid,
                                 quadratic_variation, simulate_ito, simulate_wiener)
from localtime_lab.timechange import (ClockDensity, TimeChangeMap, apply_time_change,
                                      build_time_change, check_localtime_transform,
                                      check_qv_transform, default_out_grid)
from localtime_lab.verify import check_standard_wiener


def wiener(seed=1, reps=1, n=2 ** 10):
    return simulate_wiener(SimulationConfig(seed, reps, TimeGrid(1.0, n)))


def test_unit_clock_is_identity():
    p = wiener().replicate(0)
    tc = build_time_change(p, ClockDensity.constant(1.0))
    t = np.linspace(0, 1, 33)
    assert np.allclose(tc.forward(t), t, atol=1e-14)
    same = apply_time_change(p, tc, p.grid)
    assert np.allclose(same.values, p.values, atol=1e-12)


def test_scaled_clock_closed_form():
    c = 2.0
    w = wiener().replicate(0)
    x = w.with_values(c * w.values)
    tc = build_time_change(x, ClockDensity.constant(c))
    assert tc.max_attained == pytest.approx(c * c)
    t = np.linspace(0, 4, 17)
    assert np.allclose(tc.forward(t), t / c ** 2, atol=1e-14)


def test_round_trip_within_two_cells():
    p = wiener(2).replicate(0)
    tc = build_time_change(p, ClockDensity(lambda x: 1.0 + 0.5 * np.sin(x)))
    s = np.linspace(0, 1, 101)
    assert np.all(np.abs(tc.forward(tc.inverse(s)) - s) <= 2 * p.grid.dt)
    assert np.all(np.diff(tc.forward(np.linspace(0, float(tc.max_attained), 200))) > 0)


def test_clock_must_be_positive():
    p = wiener().replicate(0)
    with pytest.raises(ValueError):
        build_time_change(p, ClockDensity(lambda x: x))


def test_overrun_names_max_attained():
    p = wiener().replicate(0)
    tc = build_time_change(p, ClockDensity.constant(0.5))
    with pytest.raises(ValueError, match="max_attained"):
        apply_time_change(p, tc, TimeGrid(1.0, 10))


def test_monotone_composition():
    g = TimeGrid(1.0, 256)
    p = SamplePath(g, g.times ** 2)
    tc = build_time_change(p, ClockDensity(lambda x: 1.0 + x))
    out = apply_time_change(p, tc, default_out_grid(p, tc))
    assert np.all(np.diff(out.values) >= 0)


def test_scaled_wiener_standardizes():
    w = wiener(3, 400, 2 ** 12)
    x = w.with_values(2.0 * w.values)
    tc = build_time_change(x, ClockDensity.constant(2.0))
    xc = apply_time_change(x, tc, default_out_grid(x, tc))
    qv = quadratic_variation(xc).terminal
    assert np.mean(qv) == pytest.approx(xc.grid.horizon, rel=0.02)
    assert check_standard_wiener(xc).passed


def test_qv_transform_cases():
    w = wiener(4, 50, 2 ** 12)
    ident = check_qv_transform(w, build_time_change(w, ClockDensity.constant(1.0)), w.grid)
    assert ident.gap < 1e-12
    tc = build_time_change(w, ClockDensity.constant(2.0))
    res = check_qv_transform(w, tc, TimeGrid(1.0, 2 ** 10))
    assert np.mean(res.lhs) == pytest.approx(0.25, rel=0.05)
    assert res.gap < 0.05
    g = TimeGrid(1.0, 2 ** 12)
    smooth = SamplePath(g, np.sin(g.times))
    sres = check_qv_transform(smooth, build_time_change(smooth, ClockDensity.constant(1.0)))
    assert abs(sres.lhs) < 1e-3 and abs(sres.rhs) < 1e-3


def test_localtime_transform_cases():
    w = wiener(5, 200, 2 ** 12)
    ident = check_localtime_transform(w, build_time_change(w, ClockDensity.constant(1.0)), 0.0,
                                      out_grid=w.grid)
    assert ident.gap < 0.02
    x = w.with_values(2.0 * w.values)
    res = check_localtime_transform(x, build_time_change(x, ClockDensity.constant(2.0)), 0.0)
    assert res.gap < 0.10
    far = check_localtime_transform(w, build_time_change(w, ClockDensity.constant(1.0)), 50.0)
    assert far.gap == 0.0 and np.all(far.lhs == 0) and np.all(far.rhs == 0)


def test_piecewise_constant_diffusion_standardizes():
    cfg = SimulationConfig(6, 1000, TimeGrid(1.0, 2 ** 12))
    g = cfg.grid
    sigma = np.where(g.times < 0.5, 0.5, 2.0)
    w = simulate_wiener(cfg)
    x = np.zeros_like(w.values)
    np.cumsum(sigma[:-1] * w.increments, axis=1, out=x[:, 1:])
    path = w.with_values(x)
    # left-endpoint clock, matching the integrand of the Ito sum
    clock = np.concatenate([[0.0], np.cumsum(sigma[:-1] ** 2 * g.dt)])
    tc = TimeChangeMap(g, clock)
    # out step 16 dt lands on source points in both regimes (64 and 4 steps)
    out = TimeGrid(float(tc.max_attained), int(round(float(tc.max_attained) / (16 * g.dt))))
    xc = apply_time_change(path, tc, out)
    assert check_standard_wiener(xc).passed


def test_inverse_clock_builds_scaled_integral():
    # clock 1/sigma on a standard Wiener path gives a process with variance sigma^2 t
    sigma = 1.5
    w = wiener(7, 4000, 2 ** 10)
    tc = build_time_change(w, ClockDensity.constant(1.0 / sigma))
    y = apply_time_change(w, tc, TimeGrid(1.0 / sigma ** 2, 2 ** 9))
    se = math.sqrt(2.0 / 4000) * sigma ** 2 * y.grid.horizon
    assert abs(np.var(y.terminal, ddof=1) - sigma ** 2 * y.grid.horizon) < 4 * se


def test_ou_drift_scales_with_clock():
    cfg = SimulationConfig(8, 500, TimeGrid(2.0, 2 ** 12))
    x = simulate_ito(ItoCoefficients(lambda v: -v, lambda v: np.ones_like(v)), cfg)
    tc = build_time_change(x, ClockDensity.constant(2.0))
    y = apply_time_change(x, tc, default_out_grid(x, tc))
    dy = np.diff(y.values, axis=1).ravel()
    reg = (y.values[:, :-1] * y.grid.dt).ravel()
    beta = np.dot(reg, dy) / np.dot(reg, reg)
    resid = dy - beta * reg
    se = math.sqrt(np.dot(resid, resid) / (dy.size - 1) / np.dot(reg, reg))
    assert abs(beta + 0.25) < 3 * se


def test_time_change_csv(tmp_path):
    p = wiener().replicate(0)
    build_time_change(p, ClockDensity.constant(1.0)).write_csv(tmp_path / "c.csv")
    assert (tmp_path / "c.csv").read_text().splitlines()[0] == "t,C_t"


def test_shared_clock_matches_per_path_clocks():
    w = wiener(9, 5, 2 ** 8)
    x = w.with_values(2.0 * w.values)
    per_path = build_time_change(x, ClockDensity.constant(2.0))
    shared = TimeChangeMap(x.grid, per_path.clock[0])
    out = default_out_grid(x, per_path)
    assert np.allclose(apply_time_change(x, shared, out).values, apply_time_change(x, per_path, out).values)
    a, b = check_qv_transform(x, shared, out), check_qv_transform(x, per_path, out)
    assert np.allclose(a.per_path, b.per_path)
    a, b = check_localtime_transform(x, shared, 0.0, out_grid=out), check_localtime_transform(x, per_path, 0.0, out_grid=out)
    assert np.allclose(a.rhs, b.rhs) and a.rhs.shape == (5,)
