import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from localtime_lab.localtime import BandConfig, band_local_time
from localtime_lab.occupation import (DifferentiablePathSpec, IntervalUnion, OccupationWeight,
                                      StationaryLevelError, deterministic_local_time,
                                      level_crossings, occupation_histogram, occupation_time,
                                      write_histogram_csv)
from localtime_lab.paths import SamplePath, SimulationConfig, TimeGrid, simulate_wiener

LEB, QV = OccupationWeight.LEBESGUE, OccupationWeight.QUADRATIC_VARIATION


def wiener(seed=1, n=2 ** 10):
    return simulate_wiener(SimulationConfig(seed, 1, TimeGrid(1.0, n))).replicate(0)


def test_interval_union_validation():
    with pytest.raises(ValueError):
        IntervalUnion(((0.0, 1.0), (0.5, 2.0)))
    with pytest.raises(ValueError):
        IntervalUnion(((1.0, 1.0),))
    with pytest.raises(ValueError):
        IntervalUnion(((2.0, 3.0), (0.0, 1.0)))
    u = IntervalUnion(((0.0, 1.0), (2.0, 3.0)))
    assert list(u.contains(np.array([0.0, 1.0, 2.5, 3.0]))) == [True, False, True, False]
    adjacent = IntervalUnion(((0.0, 1.0), (1.0, 2.0)))
    assert list(adjacent.contains(np.array([0.5, 1.0, 1.5, 2.0]))) == [True, True, True, False]


def test_constant_path_point_mass():
    g = TimeGrid(2.0, 100)
    p = SamplePath(g, np.full(101, 0.7))
    assert occupation_time(p, IntervalUnion.single(0.5, 1.0), LEB) == pytest.approx(2.0)
    assert occupation_time(p, IntervalUnion.single(0.5, 1.0), LEB, upto=1.5) == pytest.approx(1.5)


def test_ramp_occupation():
    g = TimeGrid(2.0, 2 ** 10)
    p = SamplePath(g, g.times.copy())
    assert occupation_time(p, IntervalUnion.single(0.0, 1.0), LEB) == pytest.approx(1.0)


def test_qv_weight_matches_rescan():
    p = wiener()
    got = occupation_time(p, IntervalUnion.single(-1.0, 1.0), QV)
    want = 0.0
    for i in range(p.grid.steps):
        if -1.0 <= p.values[i] < 1.0:
            want += (p.values[i + 1] - p.values[i]) ** 2
    assert got == pytest.approx(want, rel=1e-12)


def test_additivity_exact_and_bounds():
    p = wiener(3)
    parts = [(-2.0, -0.3), (-0.3, 0.1), (0.1, 5.0)]
    whole = occupation_time(p, IntervalUnion(((-2.0, 5.0),)), LEB)
    split = sum(occupation_time(p, IntervalUnion.single(a, b), LEB) for a, b in parts)
    union = occupation_time(p, IntervalUnion(((-2.0, -0.3), (0.1, 5.0))), LEB)
    assert whole == split
    assert union == occupation_time(p, IntervalUnion.single(-2.0, -0.3), LEB) + \
        occupation_time(p, IntervalUnion.single(0.1, 5.0), LEB)
    ts = np.linspace(0, 1, 17)
    occ = [occupation_time(p, IntervalUnion.single(-0.2, 0.4), LEB, upto=t) for t in ts]
    assert np.all(np.diff(occ) >= 0) and np.all(np.array(occ) <= ts + 1e-12)


def test_histogram_single_bin_and_constant():
    p = wiener(5)
    edges = [p.values.min() - 1, p.values.max() + 1]
    assert occupation_histogram(p, edges, LEB).sum() == pytest.approx(1.0)
    c = SamplePath(TimeGrid(1.0, 50), np.full(51, -0.25))
    mass = occupation_histogram(c, np.linspace(-1, 1, 9), LEB)
    assert np.count_nonzero(mass) == 1 and mass.sum() == pytest.approx(1.0)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32), st.sampled_from([LEB, QV]))
def test_histogram_matches_interval_calls(seed, weight):
    p = wiener(seed, 128)
    edges = np.linspace(-1.5, 1.5, 13)
    mass = occupation_histogram(p, edges, weight)
    calls = [occupation_time(p, IntervalUnion.single(a, b), weight) for a, b in zip(edges[:-1], edges[1:])]
    assert np.allclose(mass, calls, rtol=0, atol=1e-14)
    support = occupation_time(p, IntervalUnion.single(edges[0], edges[-1]), weight)
    assert mass.sum() == pytest.approx(support, abs=1e-13)


def test_histogram_csv(tmp_path):
    write_histogram_csv([0.0, 1.0, 2.0], [0.25, 0.75], tmp_path / "h.csv")
    assert (tmp_path / "h.csv").read_text().splitlines()[0] == "bin_left,bin_right,mass"


def test_deterministic_ramps():
    ramp = DifferentiablePathSpec(lambda t: t, lambda t: np.ones_like(t))
    assert deterministic_local_time(ramp, 0.5, 1.0) == pytest.approx(1.0)
    steep = DifferentiablePathSpec(lambda t: 2 * t, lambda t: 2 * np.ones_like(t))
    assert deterministic_local_time(steep, 0.5, 1.0) == pytest.approx(0.5)


def test_sine_half_open_crossings_and_band_oracle():
    spec = DifferentiablePathSpec(lambda t: np.sin(2 * np.pi * t), lambda t: 2 * np.pi * np.cos(2 * np.pi * t))
    roots = level_crossings(spec, 0.0, 1.0)
    assert np.allclose(roots, [0.0, 0.5])
    lt = deterministic_local_time(spec, 0.0, 1.0)
    assert lt == pytest.approx(2 / (2 * np.pi), rel=1e-9)
    # band oracle on a dense grid: t = 0 and t = 1 each contribute half a
    # crossing; the exact band value is arcsin(eps) / (pi eps) = (1/pi)(1 + O(eps^2))
    g = TimeGrid(1.0, 2 ** 16)
    p = SamplePath(g, np.sin(2 * np.pi * g.times))
    est = band_local_time(p, 0.0, BandConfig(0.01)).terminal
    assert est == pytest.approx(1 / np.pi, rel=5e-3)


def test_stationary_level_raises():
    spec = DifferentiablePathSpec(lambda t: (t - 0.5) ** 2, lambda t: 2 * (t - 0.5))
    with pytest.raises(StationaryLevelError):
        deterministic_local_time(spec, 0.0, 1.0)
