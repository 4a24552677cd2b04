"""Damage labeling: bending moment -> stress -> rainflow -> S-N + Miner -> DEL."""

from dataclasses import dataclass

import numpy as np

from ._checks import check_vector
from .exceptions import EnvBenchError


class FatigueError(EnvBenchError, ValueError):
    pass


@dataclass(frozen=True)
class SectionGeometry:
    """Outer radius and wall thickness of a tubular tower section, in metres."""

    radius: float
    thickness: float

    def __post_init__(self):
        if not (0 < self.thickness < self.radius):
            raise FatigueError(
                f"invalid section geometry: need 0 < thickness ({self.thickness}) "
                f"< radius ({self.radius})"
            )


@dataclass(frozen=True)
class SNCurve:
    """Single-slope S-N curve ``N(S) = a_bar * S**-m``.

    ``a_bar`` has no default; it depends on the detail category and the
    stress unit of the input series.
    """

    a_bar: float
    m: float = 3.0

    def __post_init__(self):
        if not (self.a_bar > 0 and self.m > 0):
            raise FatigueError(f"S-N parameters must be positive, got a_bar={self.a_bar}, m={self.m}")

    def cycles_to_failure(self, stress_range):
        s = np.asarray(stress_range, dtype=np.float64)
        with np.errstate(divide="ignore"):
            return self.a_bar * s ** (-self.m)


@dataclass(frozen=True)
class CycleHistogram:
    """Rainflow output as parallel arrays of (range, mean, count) with count in {0.5, 1}."""

    ranges: np.ndarray
    means: np.ndarray
    counts: np.ndarray

    def __len__(self):
        return len(self.ranges)

    @property
    def total_cycles(self):
        return float(np.sum(self.counts))

    def as_tuples(self):
        return list(zip(self.ranges.tolist(), self.means.tolist(), self.counts.tolist()))

    def scaled(self, k):
        """Histogram of the series multiplied by ``k`` (k > 0)."""
        return CycleHistogram(self.ranges * k, self.means * k, self.counts.copy())


@dataclass(frozen=True)
class DamageResult:
    damage: float
    del_: float
    m: float = 3.0


def moment_to_stress(moment, geom):
    """Bending stress from moment with the thin-walled tube section modulus ``pi r^2 t``."""
    moment = check_vector(moment, "moment series")
    return moment / (np.pi * geom.radius**2 * geom.thickness)


def reversals(series):
    """Turning points of a series: strict local extrema, with both endpoints kept.

    Repeated samples are collapsed first, so plateaus count once.
    """
    x = check_vector(series, "series")
    if x.size == 0:
        return x
    keep = np.concatenate(([True], np.diff(x) != 0))
    x = x[keep]
    if x.size < 3:
        return x
    d = np.diff(x)
    turning = np.flatnonzero(np.sign(d[1:]) != np.sign(d[:-1])) + 1
    idx = np.concatenate(([0], turning, [x.size - 1]))
    return x[idx]


def rainflow(series):
    """ASTM E1049-85 rainflow counting (four-point form); residue counted as half cycles."""
    peaks = reversals(series)
    ranges, means, counts = [], [], []
    stack = []
    for p in peaks.tolist():
        stack.append(p)
        while len(stack) >= 4:
            a, b, c, d = stack[-4:]
            inner = abs(b - c)
            if inner <= abs(a - b) and inner <= abs(c - d):
                ranges.append(inner)
                means.append((b + c) / 2.0)
                counts.append(1.0)
                del stack[-3:-1]
            else:
                break
    for a, b in zip(stack[:-1], stack[1:]):
        ranges.append(abs(a - b))
        means.append((a + b) / 2.0)
        counts.append(0.5)
    return CycleHistogram(
        np.asarray(ranges, dtype=np.float64),
        np.asarray(means, dtype=np.float64),
        np.asarray(counts, dtype=np.float64),
    )


def damage_to_del(damage, m=3.0):
    return np.asarray(damage, dtype=np.float64) ** (1.0 / m)


def miner_damage(hist, curve):
    """Palmgren-Miner sum ``D = sum(n_i / N(S_i))``; zero-range cycles contribute nothing."""
    r = hist.ranges
    nonzero = r > 0
    damage = float(np.sum(hist.counts[nonzero] * r[nonzero] ** curve.m) / curve.a_bar)
    return DamageResult(damage=damage, del_=float(damage ** (1.0 / curve.m)), m=curve.m)


def label_run(moment, geom, curve):
    """Damage label for one bending-moment series at one section."""
    stress = moment_to_stress(moment, geom)
    return miner_damage(rainflow(stress), curve)


def load_series_csv(path, start_time=None):
    """Read a ``time_s,moment_Nm`` CSV and return moments at or after ``start_time``."""
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 2:
        raise FatigueError(f"{path}: expected 2 columns (time_s,moment_Nm), got {data.shape[1]}")
    if start_time is not None:
        data = data[data[:, 0] >= start_time]
    return data[:, 1]


def load_series_binary(path, sample_rate, start_time=None):
    """Read raw little-endian float64 samples taken at ``sample_rate`` Hz from t = 0."""
    values = np.fromfile(path, dtype="<f8")
    if start_time is not None:
        first = int(np.ceil(start_time * sample_rate - 1e-9))
        values = values[first:]
    return values
