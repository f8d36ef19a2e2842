"""CSV ingestion, JSON documents and plot-data export."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from datetime import datetime
from enum import Enum
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from .detect import AnomalyCandidate
from .explain import Explanation
from .operators import OperatorResult
from .series import SeriesLike, TimeSeries, as_array, znormalize

SCHEMA_VERSION = "1.0"
SPACING_RTOL = 0.01

PathLike = Union[str, Path]


class DataError(ValueError):
    """Input data that cannot be used as given (bad rows, uneven timestamps, ...)."""


# --------------------------------------------------------------------------
# CSV

def _parse_time(text: str) -> datetime:
    t = text.strip()
    if t.endswith("Z"):
        t = t[:-1] + "+00:00"
    return datetime.fromisoformat(t)


def _parse_value(text: str, lineno: int, path: PathLike) -> float:
    try:
        v = float(text)
    except ValueError:
        raise DataError(f"{path}:{lineno}: not a number: {text.strip()!r}") from None
    if not math.isfinite(v):
        raise DataError(f"{path}:{lineno}: non-finite value {text.strip()!r}")
    return v


def _looks_like_header(row: List[str]) -> bool:
    try:
        float(row[-1])
    except ValueError:
        return row[-1].strip().lower() not in ("nan", "inf", "-inf", "+inf")
    return False


def load_csv(path: PathLike, *, header: Optional[bool] = None, name: Optional[str] = None,
             spacing_rtol: float = SPACING_RTOL) -> TimeSeries:
    """Read a one-column (values) or two-column (ISO-8601 timestamp, value) CSV.

    ``header=None`` detects a header row by a non-numeric last field. Timestamps
    must be evenly spaced: every interval within ``spacing_rtol`` of the median
    interval. Errors name the offending line.
    """
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = [(i, r) for i, r in enumerate(csv.reader(fh), start=1) if any(c.strip() for c in r)]
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror or exc}") from None
    except (UnicodeDecodeError, csv.Error) as exc:
        raise DataError(f"cannot parse {path}: {exc}") from None
    if not rows:
        raise DataError(f"{path}: no data rows")
    if header is None:
        header = _looks_like_header(rows[0][1])
    if header:
        rows = rows[1:]
        if not rows:
            raise DataError(f"{path}: header but no data rows")
    ncol = len(rows[0][1])
    if ncol not in (1, 2):
        raise DataError(f"{path}:{rows[0][0]}: expected 1 or 2 columns, found {ncol}")
    values = np.empty(len(rows))
    stamps: List[datetime] = []
    for k, (lineno, row) in enumerate(rows):
        if len(row) != ncol:
            raise DataError(f"{path}:{lineno}: expected {ncol} columns, found {len(row)}")
        values[k] = _parse_value(row[-1], lineno, path)
        if ncol == 2:
            try:
                stamps.append(_parse_time(row[0]))
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad timestamp {row[0].strip()!r}") from None
    label = name if name is not None else path.stem
    if ncol == 1:
        return TimeSeries(values, name=label)
    if len(stamps) < 2:
        raise DataError(f"{path}: need at least two timestamped rows to infer the sample period")
    try:
        gaps = np.array([(b - a).total_seconds() for a, b in zip(stamps, stamps[1:])])
    except TypeError:
        raise DataError(f"{path}: mixes timezone-aware and naive timestamps") from None
    period = float(np.median(gaps))
    if not period > 0:
        raise DataError(f"{path}: timestamps must increase")
    bad = np.flatnonzero(np.abs(gaps - period) > spacing_rtol * period)
    if bad.size:
        lineno = rows[int(bad[0]) + 1][0]
        raise DataError(f"{path}:{lineno}: uneven timestamp spacing "
                        f"({gaps[bad[0]]:g}s against a median of {period:g}s)")
    return TimeSeries(values, sample_period=period, start_time=stamps[0], name=label)


def write_csv(path: PathLike, series: SeriesLike) -> None:
    """Write a series in the format ``load_csv`` reads back (timestamps when known)."""
    vals = as_array(series)
    ts = series if isinstance(series, TimeSeries) else None
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if ts is not None and ts.start_time is not None:
            w.writerow(["timestamp", "value"])
            for i, v in enumerate(vals):
                w.writerow([ts.time_at(i).isoformat(), repr(float(v))])
        else:
            w.writerow(["value"])
            for v in vals:
                w.writerow([repr(float(v))])


# --------------------------------------------------------------------------
# JSON documents

def _iso(ts: Optional[datetime]) -> Optional[str]:
    return ts.isoformat() if ts is not None else None


def _from_iso(text: Optional[str]) -> Optional[datetime]:
    return datetime.fromisoformat(text) if text is not None else None


def _plain(v: Any) -> Any:
    """numpy scalars, enums and arrays to JSON-native values."""
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    if isinstance(v, np.ndarray):
        return [_plain(x) for x in v.tolist()]
    if isinstance(v, Enum):
        return v.value
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def result_to_dict(r: OperatorResult) -> Dict[str, Any]:
    return {
        "operator_kind": r.kind.value,
        "improvement": float(r.improvement),
        "distance": float(r.distance),
        "neighbor": int(r.neighbor),
        "params": _plain(r.params),
        "transformed": None if r.transformed is None else [float(x) for x in r.transformed],
    }


def candidate_to_dict(c: AnomalyCandidate) -> Dict[str, Any]:
    return {
        "location": int(c.location),
        "length": len(c.window),
        "score": float(c.score),
        "neighbor_location": int(c.neighbor_location),
        "neighbor_distance": float(c.neighbor_distance),
        "start_time": _iso(c.window.start_time),
    }


def explanation_to_dict(e: Explanation) -> Dict[str, Any]:
    return {
        "best": result_to_dict(e.best),
        "all_results": [result_to_dict(r) for r in e.all_results],
        "neighbor_location": int(e.neighbor_location),
        "neighbor_distance": float(e.neighbor_distance),
        "nearest_location": int(e.nearest_location),
        "anomaly_location": None if e.anomaly_location is None else int(e.anomaly_location),
        "neighbor_timestamp": _iso(e.neighbor_timestamp),
        "anomaly_timestamp": _iso(e.anomaly_timestamp),
        "sample_period": float(e.sample_period),
        "window": int(e.window),
        "weak": bool(e.weak),
    }


@dataclass
class ExplanationDocument:
    """Serializable record of one explained anomaly and where it came from."""

    explanation: Dict[str, Any]
    text: str
    candidate: Optional[Dict[str, Any]] = None
    provenance: Dict[str, Any] = field(default_factory=dict)
    schema_version: str = SCHEMA_VERSION

    @classmethod
    def build(cls, e: Explanation, candidate: Optional[AnomalyCandidate] = None,
              provenance: Optional[Dict[str, Any]] = None) -> "ExplanationDocument":
        return cls(
            explanation=explanation_to_dict(e),
            text=e.text,
            candidate=None if candidate is None else candidate_to_dict(candidate),
            provenance=dict(provenance or {}),
        )

    @property
    def operator_kind(self) -> str:
        return self.explanation["best"]["operator_kind"]

    @property
    def neighbor_timestamp(self) -> Optional[datetime]:
        return _from_iso(self.explanation["neighbor_timestamp"])

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_json(self, indent: Optional[int] = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True)

    @classmethod
    def from_dict(cls, d: Dict[str, Any]) -> "ExplanationDocument":
        validate_document(d, "explanation")
        return cls(
            explanation=d["explanation"],
            text=d["text"],
            candidate=d.get("candidate"),
            provenance=d.get("provenance", {}),
            schema_version=d["schema_version"],
        )

    @classmethod
    def from_json(cls, text: str) -> "ExplanationDocument":
        return cls.from_dict(json.loads(text))


def candidates_document(candidates: Sequence[AnomalyCandidate], threshold: float,
                        provenance: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    return {
        "schema_version": SCHEMA_VERSION,
        "threshold": float(threshold),
        "provenance": dict(provenance or {}),
        "candidates": [candidate_to_dict(c) for c in candidates],
    }


# --------------------------------------------------------------------------
# schemas

SCHEMA_FILES = {
    "explanation": "explanation.schema.json",
    "candidates": "candidates.schema.json",
    "bench_report": "bench_report.schema.json",
}


@lru_cache(maxsize=None)
def load_schema(kind: str) -> Dict[str, Any]:
    try:
        fname = SCHEMA_FILES[kind]
    except KeyError:
        raise ValueError(f"unknown schema {kind!r}; choose from {sorted(SCHEMA_FILES)}") from None
    text = resources.files("tsexplain").joinpath("schema", fname).read_text()
    return json.loads(text)


def validate_document(doc: Dict[str, Any], kind: str) -> None:
    """Raise ``jsonschema.ValidationError`` if ``doc`` does not match the schema."""
    import jsonschema

    jsonschema.validate(doc, load_schema(kind))


# --------------------------------------------------------------------------
# plot data

def plot_rows(e: Explanation, anomaly: SeriesLike, train: SeriesLike) -> np.ndarray:
    """Columns: z-normalized anomaly, its winning neighbor, and the transformed
    anomaly (NaN for operators that relax the distance instead)."""
    a = znormalize(anomaly)
    tr = as_array(train)
    nb = znormalize(tr[e.best.neighbor:e.best.neighbor + a.size])
    tf = np.full(a.size, np.nan) if e.best.transformed is None else znormalize(e.best.transformed)
    return np.column_stack((a, nb, tf))


def write_plot_data(path: PathLike, e: Explanation, anomaly: SeriesLike, train: SeriesLike) -> None:
    """Tab-separated overlay of anomaly, neighbor and transformed anomaly."""
    rows = plot_rows(e, anomaly, train)
    with Path(path).open("w") as fh:
        fh.write("index\tanomaly\tneighbor\ttransformed\n")
        for i, (a, b, c) in enumerate(rows):
            tail = "" if math.isnan(c) else repr(float(c))
            fh.write(f"{i}\t{float(a)!r}\t{float(b)!r}\t{tail}\n")
