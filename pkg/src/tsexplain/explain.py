"""Pick the most parsimonious counterfactual and render it as a sentence."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import List, Optional

import numpy as np

from .config import Config
from .operators import OperatorKind, OperatorResult, References, ZeroDistanceError, run_suite
from .series import SeriesLike, TimeSeries, as_array, znormalize

log = logging.getLogger(__name__)

# equal improvements go to the more local, more specific corruption
PRIORITY = (
    OperatorKind.OCCLUSION,
    OperatorKind.UNIFORM_SCALING,
    OperatorKind.WARPING,
    OperatorKind.PIECEWISE_NORM,
    OperatorKind.LINEAR_TREND,
    OperatorKind.SMOOTHING,
    OperatorKind.LR_FLIP,
    OperatorKind.UD_FLIP,
)


class NotAnomalousError(ValueError):
    pass


@dataclass
class Explanation:
    best: OperatorResult
    all_results: List[OperatorResult]
    neighbor_location: int
    neighbor_distance: float
    nearest_location: int
    anomaly_location: Optional[int] = None
    neighbor_timestamp: Optional[datetime] = None
    anomaly_timestamp: Optional[datetime] = None
    sample_period: float = 1.0
    timed: bool = False
    window: int = 0
    weak: bool = False
    text: str = field(default="")


def index_to_timestamp(i: int, s: TimeSeries) -> Optional[datetime]:
    if not isinstance(s, TimeSeries) or s.start_time is None:
        return None
    return s.start_time + timedelta(seconds=i * s.sample_period)


def timestamp_to_index(ts: datetime, s: TimeSeries) -> int:
    if s.start_time is None:
        raise ValueError("series has no start time")
    return int(round((ts - s.start_time).total_seconds() / s.sample_period))


def select_best(results: List[OperatorResult]) -> OperatorResult:
    if not results:
        raise ValueError("no operator results to choose from")
    rank = {k: i for i, k in enumerate(PRIORITY)}
    return min(results, key=lambda r: (r.improvement, rank[r.kind]))


def explain(
    A: SeriesLike,
    train: SeriesLike,
    config: Config = Config(),
    *,
    anomaly_location: Optional[int] = None,
    threshold: Optional[float] = None,
) -> Explanation:
    """Explain anomaly window ``A`` against the training series.

    Every enabled operator searches the training windows for its best match;
    the winner has the smallest improvement ratio, with ``D0`` the plain
    distance to the nearest training window. ``threshold`` (or
    ``config.threshold``) guards against explaining windows that are not
    anomalous; ``config.anomaly_check`` decides whether that is an error, a
    warning, or ignored.
    """
    a = as_array(A)
    refs = References.windows(train, a.size)
    loc, d0 = refs.nearest(znormalize(a))
    if not d0 > 0:
        raise ZeroDistanceError("window matches the training data exactly")
    limit = threshold if threshold is not None else config.threshold
    if limit is not None and d0 <= limit and config.anomaly_check != "off":
        msg = f"distance to nearest neighbor {d0:.4g} is within the threshold {limit:.4g}"
        if config.anomaly_check == "error":
            raise NotAnomalousError(msg)
        warnings.warn(msg, stacklevel=2)
    results = run_suite(a, refs, config)
    best = select_best(results)
    timed = isinstance(A, TimeSeries) and (A.start_time is not None or A.sample_period != 1.0)
    e = Explanation(
        best=best,
        all_results=results,
        neighbor_location=best.neighbor,
        neighbor_distance=d0,
        nearest_location=loc,
        anomaly_location=anomaly_location,
        neighbor_timestamp=index_to_timestamp(best.neighbor, train) if isinstance(train, TimeSeries) else None,
        anomaly_timestamp=A.start_time if isinstance(A, TimeSeries) else None,
        sample_period=A.sample_period if isinstance(A, TimeSeries) else 1.0,
        timed=timed,
        window=a.size,
        weak=best.improvement > config.weak_threshold,
    )
    e.text = render_text(e)
    log.debug("best operator %s with I=%.4f", best.kind.value, best.improvement)
    return e


def _fmt_time(ts: datetime) -> str:
    if ts.second == 0 and ts.microsecond == 0:
        return ts.strftime("%H:%M")
    return ts.strftime("%H:%M:%S")


def _fmt_stamp(ts: datetime) -> str:
    if ts.hour == ts.minute == ts.second == ts.microsecond == 0:
        return ts.strftime("%Y-%m-%d")
    return ts.strftime("%Y-%m-%d %H:%M:%S")


def _fmt_num(x: float) -> str:
    return f"{x:.3g}"


def _corruption_phrase(e: Explanation) -> str:
    r = e.best
    p = r.params
    if r.kind is OperatorKind.UNIFORM_SCALING:
        return f"{p['percent']:+d}% uniform scaling"
    if r.kind is OperatorKind.OCCLUSION:
        if p["length"] == 0:
            return "no localized region (nothing occluded)"
        what = (p["subkind"] or "noise").capitalize()
        if e.anomaly_timestamp is not None:
            at = e.anomaly_timestamp + timedelta(seconds=p["location"] * e.sample_period)
            return f"{what} at {_fmt_time(at)} (length {p['length']})"
        return f"{what} of length {p['length']}, from {p['location']}"
    if r.kind is OperatorKind.WARPING:
        dev = p["max_deviation"]
        if e.timed:
            return f"warping of up to {_fmt_num(dev * e.sample_period)} seconds"
        return f"warping of up to {_fmt_num(100.0 * dev / e.window)}% of the window"
    if r.kind is OperatorKind.LINEAR_TREND:
        return f"a linear trend of {p['rise']:+.2f} std over the window"
    if r.kind is OperatorKind.PIECEWISE_NORM:
        split = p["split"]
        if e.anomaly_timestamp is not None:
            at = e.anomaly_timestamp + timedelta(seconds=split * e.sample_period)
            return f"a level/scale shift at {_fmt_time(at)}"
        return f"a level/scale shift at {split}"
    if r.kind is OperatorKind.SMOOTHING:
        return "noise (global)"
    if r.kind is OperatorKind.LR_FLIP:
        return "horizontal reversal"
    return "vertical reversal"


def render_text(e: Explanation) -> str:
    if e.neighbor_timestamp is not None:
        ref = _fmt_stamp(e.neighbor_timestamp)
    else:
        ref = f"training index {e.neighbor_location}"
    text = f"Anomaly would be like {ref}, except for {_corruption_phrase(e)}"
    if e.weak:
        text += f" (weak explanation, I = {e.best.improvement:.2f})"
    return text
