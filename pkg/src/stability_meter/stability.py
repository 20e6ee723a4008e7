"""Stability analysis of a performance series.

Given the sequence of windowed metric values produced by continuous
evaluation, this module computes the moving average and moving (population)
standard deviation over the last M points, the derived lower/upper bounds,
the significant drops (maximal runs of points strictly below the lower
bound), and the four stability meta-measures: drop count, volatility,
drop magnitude (max/avg), and recovery rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError


@dataclass(frozen=True)
class MovingStats:
    """Per-point moving statistics of a series.

    At position i (1-based), the statistics cover the last min(i, window)
    points including point i itself: ``ma`` is their mean and ``phi`` their
    population standard deviation (divisor = window size). ``lb``/``ub`` are
    ``ma -/+ phi``.
    """

    window: int
    ma: np.ndarray
    phi: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    @classmethod
    def from_ma_phi(cls, ma: Sequence[float], phi: Sequence[float], window: int = 1) -> "MovingStats":
        """Assemble stats from externally supplied ma/phi values."""
        ma_arr = np.asarray(ma, dtype=float)
        phi_arr = np.asarray(phi, dtype=float)
        return cls(window=window, ma=ma_arr, phi=phi_arr, lb=ma_arr - phi_arr, ub=ma_arr + phi_arr)


@dataclass(frozen=True)
class SignificantDrop:
    """A maximal run of consecutive drop points.

    ``start``/``end`` are 0-based inclusive indices into the series;
    ``magnitudes[j]`` is |p_i - ma_i| for the j-th point of the run.
    """

    start: int
    end: int
    points: tuple[float, ...]
    magnitudes: tuple[float, ...]

    def __len__(self) -> int:
        return self.end - self.start + 1

    def indices(self) -> range:
        return range(self.start, self.end + 1)


@dataclass(frozen=True)
class MetaMeasures:
    """The four stability meta-measures plus the drop inventory.

    When the series has no drops, ``max_magnitude``, ``avg_magnitude`` and
    ``recovery_rate`` are None (absent), never 0.
    """

    drop_count: int
    volatility: float
    max_magnitude: float | None
    avg_magnitude: float | None
    recovery_rate: float | None
    drops: tuple[SignificantDrop, ...]
    n_points: int

    @property
    def drops_per_100_points(self) -> float:
        return 100.0 * self.drop_count / self.n_points


def moving_stats(points: Sequence[float], window: int) -> MovingStats:
    """Moving average and population standard deviation over the series.

    Point i (1-based) is summarized over the last min(i, window) points,
    itself included; the divisor is the window length, so a single point has
    ma = p and phi = 0. Constant windows yield exactly phi = 0.
    """
    if window < 1:
        raise ConfigError(f"moving window must be >= 1, got {window}")
    series = np.asarray(points, dtype=float)
    n = len(series)
    if n == 0:
        raise ValueError("cannot compute moving statistics of an empty series")
    ma = np.empty(n)
    phi = np.empty(n)
    for i in range(n):
        view = series[max(0, i - window + 1) : i + 1]
        if view.max() == view.min():
            ma[i] = view[0]
            phi[i] = 0.0
        else:
            mean = view.mean()
            ma[i] = mean
            phi[i] = math.sqrt(((view - mean) ** 2).mean())
    return MovingStats(window=window, ma=ma, phi=phi, lb=ma - phi, ub=ma + phi)


# The drop inequality is strict, so a point sitting exactly on its lower
# bound must not count; margins within this relative guard of zero are
# treated as "on the bound" to keep the decision stable under float
# rounding (a 2-point window always puts its smaller value exactly on lb).
_BOUND_GUARD = 1e-12


def drop_mask(points: Sequence[float], stats: MovingStats) -> np.ndarray:
    """Boolean mask of points strictly below their lower bound."""
    series = np.asarray(points, dtype=float)
    guard = _BOUND_GUARD * np.maximum(1.0, np.abs(stats.lb))
    return series < stats.lb - guard


def detect_drops(points: Sequence[float], stats: MovingStats) -> list[SignificantDrop]:
    """All maximal runs of points strictly below their lower bound.

    Returned in ascending order; runs are pairwise disjoint and each is
    bordered by non-drop points (or the series ends). A point participates
    in its own moving statistics, so a zero-variance point can never drop.
    """
    series = np.asarray(points, dtype=float)
    below = drop_mask(series, stats)
    drops = []
    i = 0
    n = len(series)
    while i < n:
        if not below[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and below[j + 1]:
            j += 1
        segment = series[i : j + 1]
        magnitudes = np.abs(segment - stats.ma[i : j + 1])
        drops.append(
            SignificantDrop(
                start=i,
                end=j,
                points=tuple(float(v) for v in segment),
                magnitudes=tuple(float(m) for m in magnitudes),
            )
        )
        i = j + 1
    return drops


def meta_measures(points: Sequence[float], window: int) -> MetaMeasures:
    """Compute the four stability meta-measures of a series.

    Volatility is the mean of all per-point moving standard deviations.
    Magnitudes aggregate |p_i - ma_i| over all drop points; the recovery
    rate is the mean drop length. The magnitude and recovery fields are
    absent (None) when the series has no drops.
    """
    stats = moving_stats(points, window)
    drops = detect_drops(points, stats)
    volatility = float(np.mean(stats.phi))
    magnitudes = [m for drop in drops for m in drop.magnitudes]
    if drops:
        max_magnitude = max(magnitudes)
        avg_magnitude = sum(magnitudes) / len(magnitudes)
        recovery_rate = sum(len(drop) for drop in drops) / len(drops)
    else:
        max_magnitude = avg_magnitude = recovery_rate = None
    return MetaMeasures(
        drop_count=len(drops),
        volatility=volatility,
        max_magnitude=max_magnitude,
        avg_magnitude=avg_magnitude,
        recovery_rate=recovery_rate,
        drops=tuple(drops),
        n_points=len(stats.ma),
    )


@dataclass(frozen=True)
class SeriesAnnotation:
    """One annotated series point, ready for CSV/plot emission."""

    value: float
    ma: float
    std: float
    lb: float
    ub: float
    is_drop: bool
    drop_id: int | None


def annotate_series(points: Sequence[float], window: int) -> list[SeriesAnnotation]:
    """Per-point annotation rows; drop_id is the 1-based enclosing drop."""
    stats = moving_stats(points, window)
    drops = detect_drops(points, stats)
    drop_of_index: dict[int, int] = {}
    for number, drop in enumerate(drops, start=1):
        for index in drop.indices():
            drop_of_index[index] = number
    rows = []
    for i, value in enumerate(np.asarray(points, dtype=float)):
        drop_id = drop_of_index.get(i)
        rows.append(
            SeriesAnnotation(
                value=float(value),
                ma=float(stats.ma[i]),
                std=float(stats.phi[i]),
                lb=float(stats.lb[i]),
                ub=float(stats.ub[i]),
                is_drop=drop_id is not None,
                drop_id=drop_id,
            )
        )
    return rows
