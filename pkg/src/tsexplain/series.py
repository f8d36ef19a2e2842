"""Series container and the elementary transforms every other module builds on.

All reductions that feed a distance are sequential left-to-right sums
(``np.cumsum``), so a vectorized kernel and a plain Python loop over the same
samples produce identical floating point results.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Optional, Union

import numpy as np


class DegenerateInputError(ValueError):
    """Raised when a series is too short (or otherwise degenerate) for an operation."""


# A window whose population std falls below this fraction of its magnitude is
# treated as flat and normalizes to all zeros.
FLAT_RTOL = 1e-10


@dataclass(frozen=True)
class TimeSeries:
    """Immutable sequence of finite samples with optional time metadata.

    ``sample_period`` is in seconds per sample; ``start_time`` is the absolute
    timestamp of sample 0 when known.
    """

    values: np.ndarray
    sample_period: float = 1.0
    start_time: Optional[datetime] = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        arr = np.array(self.values, dtype=float).ravel()
        if arr.size < 1:
            raise DegenerateInputError("a time series needs at least one sample")
        if not np.all(np.isfinite(arr)):
            bad = int(np.flatnonzero(~np.isfinite(arr))[0])
            raise ValueError(f"non-finite sample at index {bad}")
        if not self.sample_period > 0:
            raise ValueError("sample_period must be positive")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)
        object.__setattr__(self, "sample_period", float(self.sample_period))

    def __len__(self) -> int:
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self.values
        return self.values.astype(dtype)

    def __getitem__(self, item):
        if isinstance(item, slice):
            start, _, step = item.indices(len(self))
            if step != 1:
                raise ValueError("only contiguous slices keep time metadata")
            t0 = self.time_at(start)
            return TimeSeries(self.values[item], self.sample_period, t0, self.name)
        return float(self.values[item])

    def time_at(self, index: int) -> Optional[datetime]:
        if self.start_time is None:
            return None
        return self.start_time + timedelta(seconds=index * self.sample_period)

    def with_values(self, values) -> "TimeSeries":
        return TimeSeries(values, self.sample_period, self.start_time, self.name)


SeriesLike = Union[TimeSeries, np.ndarray, list, tuple]


@dataclass(frozen=True)
class LineFit:
    slope: float
    intercept: float

    def __call__(self, n: int) -> np.ndarray:
        return self.slope * np.arange(n, dtype=float) + self.intercept


def as_array(s: SeriesLike) -> np.ndarray:
    """Return the samples of ``s`` as a 1-D float array (no copy for TimeSeries)."""
    if isinstance(s, TimeSeries):
        return s.values
    return np.asarray(s, dtype=float).ravel()


def seq_sum(x: np.ndarray) -> float:
    """Left-to-right sum; matches ``acc += v`` in a Python loop bit for bit."""
    if x.size == 0:
        return 0.0
    return float(np.cumsum(x)[-1])


def is_flat(x: np.ndarray, std: float) -> bool:
    scale = max(1.0, float(np.max(np.abs(x))))
    return std <= FLAT_RTOL * scale


def znormalize(s: SeriesLike) -> np.ndarray:
    """Zero mean, unit population std. Flat input maps to all zeros."""
    x = as_array(s)
    if x.size < 2:
        raise DegenerateInputError("z-normalization needs at least 2 samples")
    mu = x.mean()
    sigma = x.std()
    if is_flat(x, sigma):
        return np.zeros_like(x)
    return (x - mu) / sigma


def resample(s: SeriesLike, target_len: int) -> np.ndarray:
    """Linear interpolation onto ``target_len`` evenly spaced points spanning the input.

    Endpoints are preserved exactly and ``target_len == len(s)`` is the identity.
    """
    x = as_array(s)
    if target_len < 2 or x.size < 2:
        raise DegenerateInputError("resampling needs at least 2 input and 2 output samples")
    n = x.size
    if target_len == n:
        return x.copy()
    pos = np.arange(target_len) * ((n - 1) / (target_len - 1))
    pos[-1] = n - 1
    return np.interp(pos, np.arange(n), x)


def moving_mean(s: SeriesLike, w: int) -> np.ndarray:
    """Centered moving mean of width ``w``, truncated (not padded) at the edges."""
    x = as_array(s)
    if w < 1 or w > x.size:
        raise DegenerateInputError(f"window {w} invalid for series of length {x.size}")
    if w == 1:
        return x.copy()
    half = w // 2
    n = x.size
    # accumulate deviations from the center sample: exact on constant runs
    dev = np.zeros(n)
    count = np.ones(n)
    for off in range(1, half + 1):
        dev[off:] += x[:-off] - x[off:]
        count[off:] += 1
        dev[:-off] += x[off:] - x[:-off]
        count[:-off] += 1
    return x + dev / count


def fit_line(s: SeriesLike) -> LineFit:
    """Ordinary least squares line through ``(index, value)`` pairs."""
    y = as_array(s)
    if y.size < 2:
        raise DegenerateInputError("line fit needs at least 2 samples")
    t = np.arange(y.size, dtype=float)
    tc = t - t.mean()
    slope = float(np.dot(tc, y - y.mean()) / np.dot(tc, tc))
    return LineFit(slope, float(y.mean() - slope * t.mean()))


def detrend(s: SeriesLike) -> np.ndarray:
    """Subtract the least squares line."""
    y = as_array(s)
    return y - fit_line(y)(y.size)
