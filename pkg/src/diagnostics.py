"""
Mixing diagnostics: energy traces, the autocorrelation function and its
area, and the comma-separated trace / ACF files the harness writes.
"""
import csv
from dataclasses import dataclass, field

import numpy as np

from errors import DimensionError, InvalidParameterError


@dataclass
class EnergyTrace:
    energies: list = field(default_factory=list)
    accepted_flags: list = field(default_factory=list)
    walk_lengths: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    step_stride: int = 1

    def __post_init__(self):
        if self.step_stride < 1:
            raise InvalidParameterError(f"stride must be >= 1, got {self.step_stride}")

    def __call__(self, step, energy, accepted, walk_length=0):
        """Sink interface: keeps every step that is a multiple of the stride."""
        if step % self.step_stride == 0:
            self.steps.append(int(step))
            self.energies.append(float(energy))
            self.accepted_flags.append(bool(accepted))
            self.walk_lengths.append(int(walk_length))

    def __len__(self):
        return len(self.energies)

    def as_array(self):
        return np.asarray(self.energies, dtype=np.float64)

    def after_burn_in(self, fraction):
        if not 0.0 <= fraction < 1.0:
            raise InvalidParameterError(f"burn-in fraction must be in [0, 1), got {fraction}")
        start = int(round(fraction * len(self.energies)))
        return self.as_array()[start:]


@dataclass
class AcfCurve:
    values: np.ndarray
    zero_variance: bool = False

    @property
    def max_lag(self):
        return len(self.values) - 1

    @property
    def lags(self):
        return np.arange(len(self.values))

    def area(self):
        return float(np.sum(self.values[1:]))


def acf(series, max_lag):
    """
    Biased autocorrelation estimate with the full-sample mean:
        rho(t) = (1/n) sum_{i<n-t} (e_i - m)(e_{i+t} - m) / ((1/n) sum (e_i - m)^2)
    A constant series yields rho(0) = 1, rho(t > 0) = 0 and the zero-variance flag.
    """
    series = np.asarray(series, dtype=np.float64)
    if max_lag < 1:
        raise InvalidParameterError(f"max_lag must be >= 1, got {max_lag}")
    n = len(series)
    if n <= max_lag:
        raise DimensionError(f"series of length {n} is too short for max_lag={max_lag}")
    centered = series - series.mean()
    variance = np.dot(centered, centered) / n
    values = np.zeros(max_lag + 1)
    values[0] = 1.0
    if variance <= 1e-300 * max(1.0, np.abs(series).max() ** 2):
        return AcfCurve(values, zero_variance=True)
    for t in range(1, max_lag + 1):
        values[t] = np.dot(centered[:n - t], centered[t:]) / n / variance
    return AcfCurve(values)


def acf_area(series, max_lag):
    """Signed sum of rho(1..max_lag); the adaptation reward is its negation."""
    return acf(series, max_lag).area()


def mean_acf(series_list, max_lag):
    curves = [acf(series, max_lag).values for series in series_list]
    return np.mean(curves, axis=0)


def tv_distance(p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise DimensionError(f"distributions of shape {p.shape} and {q.shape}")
    for name, dist in (("p", p), ("q", q)):
        if abs(dist.sum() - 1.0) > 1e-6:
            raise InvalidParameterError(f"{name} sums to {dist.sum()}, not 1")
    return 0.5 * float(np.abs(p - q).sum())


def empirical_distribution(indices, num_states):
    counts = np.bincount(np.asarray(indices, dtype=np.int64), minlength=num_states)
    return counts / counts.sum()


TRACE_HEADER = ["step", "energy", "accepted", "walk_length"]


def write_trace(trace, path):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRACE_HEADER)
        for row in zip(trace.steps, trace.energies, trace.accepted_flags, trace.walk_lengths):
            step, energy, accepted, length = row
            writer.writerow([step, repr(energy), int(accepted), length])


def read_trace(path, stride=1):
    trace = EnergyTrace(step_stride=stride)
    with open(path, newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != TRACE_HEADER:
            raise DimensionError(f"{path}: unexpected trace header {header}")
        for step, energy, accepted, length in reader:
            trace.steps.append(int(step))
            trace.energies.append(float(energy))
            trace.accepted_flags.append(accepted == "1")
            trace.walk_lengths.append(int(length))
    return trace


def write_acf_table(columns, path):
    """columns: mapping sampler name -> ACF values (equal lengths). One row per lag."""
    names = list(columns)
    lengths = {len(columns[n]) for n in names}
    if len(lengths) != 1:
        raise DimensionError(f"ACF columns have different lengths {sorted(lengths)}")
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["lag"] + names)
        for lag in range(lengths.pop()):
            writer.writerow([lag] + [repr(float(columns[n][lag])) for n in names])


def read_acf_table(path):
    with open(path, newline="") as f:
        reader = csv.reader(f)
        names = next(reader)[1:]
        rows = [[float(v) for v in row[1:]] for row in reader]
    values = np.asarray(rows)
    return {name: values[:, k] for k, name in enumerate(names)}
