"""Synthetic corruption models.

Every corruption starts in the span ``[location, location + length)`` of the
host. Step and LinearTrend leave their offset in place after the span and
UniformScale shifts the rest of the series in time; the others stay inside it.
Each is a pure function of ``(host, spec)``: random draws come from a generator
seeded with ``spec.seed``. Magnitudes are in units of the host span's std
(the whole host's std when the span is flat).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Tuple

import numpy as np

from .config import CORRUPTION_NAMES
from .series import SeriesLike, TimeSeries, as_array, is_flat, resample

# corruption class -> operator expected to explain it
EXPECTED_OPERATOR: Dict[str, str] = {
    "Spike": "Occlusion",
    "Dropout": "Occlusion",
    "NoisyRegion": "Occlusion",
    "NoisyGlobal": "Smoothing",
    "LRFlip": "LRFlip",
    "UDFlip": "UDFlip",
    "UniformScale": "UniformScaling",
    "Step": "PiecewiseNorm",
    "LinearTrend": "LinearTrend",
    "Warp": "Warping",
}

MAGNITUDE_KINDS = frozenset({"Spike", "Dropout", "NoisyRegion", "NoisyGlobal", "Step", "LinearTrend", "Warp"})


class CorruptionError(ValueError):
    pass


@dataclass(frozen=True)
class CorruptionSpec:
    """What to inject and where.

    For ``Warp`` the magnitude is the maximum index displacement in samples;
    ``UniformScale`` ignores the magnitude and draws its factor from
    +/-[5%, 15%] using the seed.
    """

    kind: str
    location: int
    length: int
    magnitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in CORRUPTION_NAMES:
            raise CorruptionError(f"unknown corruption kind {self.kind!r}")
        if self.location < 0 or self.length < 0:
            raise CorruptionError("location and length must be non-negative")
        if self.magnitude < 0:
            raise CorruptionError("magnitude must be non-negative")


@dataclass(frozen=True)
class GroundTruth:
    spec: CorruptionSpec
    start: int
    end: int
    sigma: float
    details: Dict[str, Any] = field(default_factory=dict)

    def overlaps(self, lo: int, hi: int) -> bool:
        """Whether ``[lo, hi)`` intersects the affected span."""
        return lo < self.end and self.start < hi

    def to_dict(self) -> Dict[str, Any]:
        out = asdict(self)
        out["spec"] = asdict(self.spec)
        return out


def _span_sigma(x: np.ndarray, lo: int, hi: int) -> float:
    """Std of the span; the whole host's std when the span is too short or flat."""
    if hi - lo >= 2:
        sd = float(x[lo:hi].std())
        if not is_flat(x[lo:hi], sd):
            return sd
    return float(x.std())


def warp_map(length: int, displacement: float) -> np.ndarray:
    """Smooth monotone remapping of ``0..length-1`` that fixes both ends and
    moves the middle by ``displacement`` samples (sign gives direction)."""
    i = np.arange(length, dtype=float)
    if length < 2:
        return i
    limit = (length - 1) / math.pi
    if abs(displacement) >= limit:
        raise CorruptionError(f"displacement {displacement} breaks monotonicity (limit {limit:.2f})")
    return i + displacement * np.sin(math.pi * i / (length - 1))


def corrupt(host: SeriesLike, spec: CorruptionSpec) -> Tuple[np.ndarray, GroundTruth]:
    """Return a corrupted copy of ``host`` and the ground truth label."""
    x = as_array(host).copy()
    lo, hi = spec.location, spec.location + spec.length
    if hi > x.size:
        raise CorruptionError(f"span [{lo}, {hi}) exceeds host length {x.size}")
    if spec.kind != "Spike" and spec.length < 2:
        raise CorruptionError(f"{spec.kind} needs a span of at least 2 samples")
    sigma = _span_sigma(x, lo, hi)
    rng = np.random.default_rng(spec.seed)
    mag = spec.magnitude
    kind = spec.kind
    details: Dict[str, Any] = {}
    start, end = lo, hi

    if kind == "Spike":
        at = lo + spec.length // 2 if spec.length else lo
        if at >= x.size:
            raise CorruptionError("spike position outside the host")
        x[at] += mag * sigma
        start, end = at, at + 1
        details["index"] = at
    elif kind == "Dropout":
        x[lo:hi] -= mag * sigma
    elif kind in ("NoisyRegion", "NoisyGlobal"):
        x[lo:hi] += rng.normal(0.0, mag * sigma, size=spec.length)
    elif kind == "LRFlip":
        x[lo:hi] = x[lo:hi][::-1].copy()
    elif kind == "UDFlip":
        seg = x[lo:hi]
        x[lo:hi] = 2.0 * seg.mean() - seg
    elif kind == "UniformScale":
        pct = rng.uniform(5.0, 15.0) * rng.choice((-1.0, 1.0))
        factor = 1.0 + pct / 100.0
        # factor * length source samples are squeezed or spread over the span and
        # the rest of the series follows on from there, so there is no seam;
        # a speed-up runs out of data at the far end, which is padded by reflection
        src = as_array(host)
        src_len = int(round(factor * spec.length))
        if lo + src_len > x.size:
            raise CorruptionError("not enough data after the span to absorb the speed change")
        tail = src[lo + src_len:]
        short = x.size - hi - tail.size
        if short > 0:
            tail = np.concatenate([tail, src[::-1][:short]])
        x[lo:hi] = resample(src[lo:lo + src_len], spec.length)
        x[hi:] = tail[:x.size - hi]
        details["factor"] = factor
    elif kind == "Step":
        mid = lo + spec.length // 2
        # the new level persists past the span
        x[mid:] += mag * sigma
        details["change_point"] = mid
    elif kind == "LinearTrend":
        # drift, then the reached offset persists past the span
        x[lo:hi] += mag * sigma * np.arange(spec.length) / (spec.length - 1)
        x[hi:] += mag * sigma
    elif kind == "Warp":
        sign = rng.choice((-1.0, 1.0))
        src = as_array(host)[lo:hi]
        pos = warp_map(spec.length, sign * mag)
        x[lo:hi] = np.interp(pos, np.arange(spec.length), src)
        details["displacement"] = float(sign * mag)
    return x, GroundTruth(spec, start, end, sigma, details)


def corrupt_series(host: TimeSeries, spec: CorruptionSpec) -> Tuple[TimeSeries, GroundTruth]:
    values, truth = corrupt(host, spec)
    return host.with_values(values), truth
