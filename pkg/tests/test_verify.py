import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from localtime_lab.occupation import IntervalUnion, OccupationWeight, occupation_time
from localtime_lab.paths import SamplePath, SimulationConfig, TimeGrid, simulate_wiener
from localtime_lab.verify import (EmpiricalDistribution, Report, check_abs_w_localtime,
                                  check_joint_identity, check_localtime_maximum_identity,
                                  check_standard_wiener, folded_normal_cdf,
                                  ks_critical_value, ks_one_sample, ks_two_sample,
                                  occupation_density_identity, write_reports_csv)

samples_st = st.lists(st.floats(-10, 10, allow_nan=False), min_size=2, max_size=60)


def brute_two_sample(a, b):
    best = 0.0
    for z in list(a) + list(b):
        fa = sum(1 for v in a if v <= z) / len(a)
        fb = sum(1 for v in b if v <= z) / len(b)
        best = max(best, abs(fa - fb))
    return best


def brute_one_sample(a, cdf):
    s = sorted(a)
    n = len(s)
    return max(max((i + 1) / n - cdf(v), cdf(v) - i / n) for i, v in enumerate(s))


def test_critical_value():
    assert ks_critical_value(0.01) == pytest.approx(1.6276, abs=1e-4)


@settings(max_examples=60, deadline=None)
@given(samples_st, samples_st)
def test_two_sample_matches_brute_force(a, b):
    assert ks_two_sample(a, b).statistic == pytest.approx(brute_two_sample(a, b), abs=1e-12)


@settings(max_examples=60, deadline=None)
@given(samples_st)
def test_one_sample_matches_brute_force(a):
    cdf = lambda x: float(stats.norm.cdf(x))
    got = ks_one_sample(a, lambda x: stats.norm.cdf(x)).statistic
    assert got == pytest.approx(brute_one_sample(a, cdf), abs=1e-12)


def test_two_sample_brute_force_n200():
    rng = np.random.default_rng(0)
    a, b = rng.normal(size=200), rng.normal(0.2, size=150)
    assert ks_two_sample(a, b).statistic == pytest.approx(brute_two_sample(a, b), abs=1e-12)


def test_identical_samples_and_threshold():
    a = np.random.default_rng(1).normal(size=100)
    r = ks_two_sample(a, a)
    assert r.statistic == 0.0 and r.passed
    assert r.threshold == pytest.approx(ks_critical_value(0.01) * np.sqrt(2 / 100))
    assert ks_two_sample(a, a, inflation=2.0).threshold == pytest.approx(2 * r.threshold)


def test_separated_samples_fail():
    rng = np.random.default_rng(2)
    r = ks_two_sample(rng.normal(size=1000), rng.normal(3.0, size=1000))
    assert not r.passed
    assert r.statistic == pytest.approx(2 * stats.norm.cdf(1.5) - 1, abs=0.05)


def test_one_sample_size_calibration():
    passes = sum(ks_one_sample(np.random.default_rng(s).normal(size=10_000), stats.norm.cdf).passed
                 for s in range(50))
    assert passes / 50 >= 0.98


def test_folded_vs_normal_fails():
    a = np.abs(np.random.default_rng(3).normal(size=2000))
    assert not ks_one_sample(a, stats.norm.cdf).passed
    assert ks_one_sample(a, folded_normal_cdf(1.0)).passed


def test_ecdf_is_rank_over_n():
    d = EmpiricalDistribution(np.array([3.0, 1.0, 2.0, 5.0]))
    assert list(d.cdf(d.samples)) == [0.25, 0.5, 0.75, 1.0]
    with pytest.raises(ValueError):
        EmpiricalDistribution([1.0])


def test_localtime_maximum_deterministic_and_control():
    cfg = SimulationConfig(5, 2000, TimeGrid(1.0, 2 ** 10))
    a = check_localtime_maximum_identity(cfg)
    b = check_localtime_maximum_identity(cfg)
    assert a.lines() == b.lines()
    assert a.passed
    assert not check_localtime_maximum_identity(cfg, negative_control=True).passed


def test_ks_statistic_shrinks_when_dt_halves():
    def stat(n, g):
        cfg = SimulationConfig(1000 + g, 4000, TimeGrid(1.0, n))
        return check_localtime_maximum_identity(cfg)["ks_tanaka_vs_max"].statistic
    coarse = np.median([stat(2 ** 5, g) for g in range(10)])
    fine = np.median([stat(2 ** 6, g) for g in range(10)])
    assert fine <= coarse


def test_joint_identity_and_control():
    cfg = SimulationConfig(6, 3000, TimeGrid(1.0, 2 ** 10))
    rep = check_joint_identity(cfg)
    assert rep.passed, rep.lines()
    ctrl = check_joint_identity(cfg, negative_control=True)
    assert not ctrl["correlation_gap"].passed


def test_abs_w_and_control():
    cfg = SimulationConfig(7, 500, TimeGrid(1.0, 2 ** 12))
    rep = check_abs_w_localtime(cfg)
    assert rep.passed
    assert rep["negative_level_max"].statistic == 0.0
    assert not check_abs_w_localtime(cfg, negative_control=True).passed


def test_standard_wiener_positive_and_negative():
    cfg = SimulationConfig(8, 2000, TimeGrid(1.0, 256))
    assert check_standard_wiener(simulate_wiener(cfg)).passed
    g = cfg.grid
    slope = SamplePath(g, g.times[None, :] * np.random.default_rng(0).normal(size=(2000, 1)))
    rep = check_standard_wiener(slope)
    assert not rep["qv_rel_error"].passed


def test_occupation_density_functions_and_control():
    paths = simulate_wiener(SimulationConfig(9, 8, TimeGrid(1.0, 2 ** 14)))
    for name in ("constant-one", "gaussian-bump"):
        rep = occupation_density_identity(paths, name)
        assert rep.passed, rep.lines()
    one = occupation_density_identity(paths.replicate(0), "constant-one")
    assert one["relative_gap"].details["lhs"] == pytest.approx(one.measured["realized_qv"], rel=1e-12)
    x2 = paths.with_values(2.0 * paths.values)
    assert not occupation_density_identity(x2, "constant-one", weight=OccupationWeight.LEBESGUE).passed
    with pytest.raises(KeyError):
        occupation_density_identity(paths, "cubic")


def test_indicator_lhs_is_occupation_time():
    p = simulate_wiener(SimulationConfig(10, 1, TimeGrid(1.0, 2 ** 12))).replicate(0)
    rep = occupation_density_identity(p, "indicator-interval")
    occ = occupation_time(p, IntervalUnion.single(0.0, 1.0), OccupationWeight.QUADRATIC_VARIATION)
    assert rep["relative_gap"].details["lhs"] == pytest.approx(occ, rel=1e-12)


def test_report_formats(tmp_path):
    cfg = SimulationConfig(11, 200, TimeGrid(1.0, 64))
    rep = check_localtime_maximum_identity(cfg)
    lines = rep.lines()
    assert lines[0].startswith("localtime_maximum.pass=")
    assert any(l.startswith("localtime_maximum.ks_tanaka_vs_max.statistic=") for l in lines)
    assert all("=" in l for l in lines)
    write_reports_csv([rep], tmp_path / "r.csv")
    rows = (tmp_path / "r.csv").read_text().splitlines()
    assert rows[0] == "check,statistic,threshold,pass,n,seed" and len(rows) == 1 + len(rep.checks)
    assert Report("empty").passed
