import sys
import os

import numpy as np
import pytest

# Add src to path
sys.path.append(os.path.join(os.path.dirname(__file__), '..', 'src'))

from diagnostics import (
    EnergyTrace,
    acf,
    acf_area,
    empirical_distribution,
    mean_acf,
    read_acf_table,
    read_trace,
    tv_distance,
    write_acf_table,
    write_trace,
)
from errors import DimensionError, InvalidParameterError


def ar1_series(phi, n, seed):
    rng = np.random.default_rng(seed)
    noise = rng.normal(size=n)
    series = np.empty(n)
    series[0] = noise[0]
    for t in range(1, n):
        series[t] = phi * series[t - 1] + noise[t]
    return series


# -------------------------------------------------------------------------
# SCENARIO 1: Autocorrelation
# -------------------------------------------------------------------------
def test_ar1_geometric_decay():
    curve = acf(ar1_series(0.9, 100_000, seed=0), max_lag=20)
    assert curve.values[0] == 1.0
    for t in range(1, 21):
        assert curve.values[t] == pytest.approx(0.9 ** t, abs=0.05)
    # sum_{t>=1} 0.9^t = 9, truncated at 20 lags
    expected = sum(0.9 ** t for t in range(1, 21))
    assert curve.area() == pytest.approx(expected, abs=1.0)


def test_white_noise_area_near_zero():
    series = np.random.default_rng(1).normal(size=100_000)
    assert np.all(np.abs(acf(series, 50).values[1:]) < 0.02)
    assert abs(acf_area(series, 50)) < 0.1


def test_constant_series():
    curve = acf(np.full(100, 3.5), 10)
    assert curve.zero_variance
    assert curve.values.tolist() == [1.0] + [0.0] * 10
    assert curve.area() == 0.0


def test_affine_invariance():
    series = ar1_series(0.5, 5000, seed=2)
    assert np.allclose(acf(series, 30).values, acf(-3.0 * series + 7.0, 30).values)


def test_biased_estimator_on_short_series():
    """[1, -1, 1, -1]: rho(1) = (1/4)(-3) / 1 = -0.75."""
    curve = acf([1.0, -1.0, 1.0, -1.0], 2)
    assert curve.values[1] == pytest.approx(-0.75)
    assert curve.values[2] == pytest.approx(0.5)
    assert curve.max_lag == 2
    assert curve.lags.tolist() == [0, 1, 2]


def test_acf_argument_checks():
    with pytest.raises(DimensionError):
        acf(np.arange(10.0), 10)
    with pytest.raises(InvalidParameterError):
        acf(np.arange(10.0), 0)


def test_mean_acf_averages_curves():
    a = ar1_series(0.3, 2000, seed=3)
    b = ar1_series(0.8, 2000, seed=4)
    expected = (acf(a, 5).values + acf(b, 5).values) / 2
    assert np.allclose(mean_acf([a, b], 5), expected)


# -------------------------------------------------------------------------
# SCENARIO 2: Distribution distances
# -------------------------------------------------------------------------
def test_tv_distance():
    assert tv_distance([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert tv_distance([1.0, 0.0], [0.0, 1.0]) == 1.0
    with pytest.raises(DimensionError):
        tv_distance([1.0], [0.5, 0.5])
    with pytest.raises(InvalidParameterError):
        tv_distance([0.5, 0.6], [0.5, 0.5])


def test_empirical_distribution():
    assert empirical_distribution([0, 2, 2, 3], 5).tolist() == [0.25, 0.0, 0.5, 0.25, 0.0]


# -------------------------------------------------------------------------
# SCENARIO 3: Traces and files
# -------------------------------------------------------------------------
def test_trace_stride_and_burn_in():
    trace = EnergyTrace(step_stride=5)
    for step in range(1, 101):
        trace(step, -float(step), step % 2 == 0, 3)
    assert len(trace) == 20
    assert trace.steps[:3] == [5, 10, 15]
    assert len(trace.after_burn_in(0.2)) == 16
    with pytest.raises(InvalidParameterError):
        trace.after_burn_in(1.0)
    with pytest.raises(InvalidParameterError):
        EnergyTrace(step_stride=0)


def test_trace_file_round_trip(tmp_path):
    trace = EnergyTrace()
    for step, e in enumerate([-1.5, 0.1 + 0.2, 1e-17], start=1):
        trace(step, e, step != 2, step)
    path = tmp_path / "trace.csv"
    write_trace(trace, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "step,energy,accepted,walk_length"
    assert lines[2] == "2,0.30000000000000004,0,2"
    loaded = read_trace(path)
    assert loaded.energies == trace.energies
    assert loaded.accepted_flags == [True, False, True]


def test_trace_header_checked(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("step,value\n1,2\n")
    with pytest.raises(DimensionError):
        read_trace(path)


def test_acf_table(tmp_path):
    path = tmp_path / "acf.csv"
    write_acf_table({"gibbs": [1.0, 0.5, 0.25], "adaptive": [1.0, 0.1, 0.0]}, path)
    assert path.read_text().splitlines()[0] == "lag,gibbs,adaptive"
    table = read_acf_table(path)
    assert table["adaptive"].tolist() == [1.0, 0.1, 0.0]
    with pytest.raises(DimensionError):
        write_acf_table({"a": [1.0, 0.5], "b": [1.0]}, path)
