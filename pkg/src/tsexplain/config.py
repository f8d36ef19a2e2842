"""Run configuration: a flat TOML file with strict key checking.

Every key has a documented default; unknown keys and out-of-range values are
rejected up front because a silently misconfigured bound skews every
benchmark number downstream.
"""
from __future__ import annotations

import dataclasses
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

OPERATOR_NAMES: Tuple[str, ...] = (
    "UniformScaling",
    "Occlusion",
    "Warping",
    "Smoothing",
    "LRFlip",
    "UDFlip",
    "LinearTrend",
    "PiecewiseNorm",
)

CORRUPTION_NAMES: Tuple[str, ...] = (
    "Spike",
    "Dropout",
    "NoisyRegion",
    "NoisyGlobal",
    "LRFlip",
    "UDFlip",
    "UniformScale",
    "Step",
    "LinearTrend",
    "Warp",
)

# one class per operator, in the row order of the published confusion table
DEFAULT_BENCH_CLASSES: Tuple[str, ...] = (
    "LRFlip",
    "LinearTrend",
    "UniformScale",
    "NoisyGlobal",
    "UDFlip",
    "Step",
    "Warp",
    "Spike",
)

THRESHOLD_MODES = ("max_plus_sigma", "mu_sigma")
SOURCE_KINDS = ("quasi_periodic", "csv")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Config:
    # detection
    window: int = 64
    threshold_mode: str = "max_plus_sigma"
    threshold: Optional[float] = None
    # operator suite
    operators: Tuple[str, ...] = OPERATOR_NAMES
    scaling_min: float = 0.80
    scaling_max: float = 1.20
    scaling_step_percent: int = 1
    dtw_band_fraction: float = 0.10
    smoothing_window: int = 3
    pnd_min_seg: int = 3
    trend_grid_size: int = 201
    trend_max_sigma: float = 4.0
    neighbor_candidates: int = 16
    weak_threshold: float = 0.9
    anomaly_check: str = "error"
    # reproducibility
    seed: int = 0
    workers: int = 1
    # benchmark
    bench_n: int = 3000
    bench_n_train: int = 1200
    bench_trials_per_class: int = 50
    bench_classes: Tuple[str, ...] = DEFAULT_BENCH_CLASSES
    bench_source: str = "quasi_periodic"
    bench_source_files: Tuple[str, ...] = ()
    bench_inject_length: Optional[int] = None
    bench_magnitude_min: float = 3.0
    bench_magnitude_max: float = 5.0
    bench_source_noise: float = 0.01

    def __post_init__(self):
        object.__setattr__(self, "operators", tuple(self.operators))
        object.__setattr__(self, "bench_classes", tuple(self.bench_classes))
        object.__setattr__(self, "bench_source_files", tuple(self.bench_source_files))
        self.validate()

    @property
    def inject_length(self) -> int:
        return self.bench_inject_length if self.bench_inject_length is not None else self.window

    def band_for(self, length: int) -> int:
        # ceil with slack so that 0.1 * 30 gives 3, not 4
        return min(length, math.ceil(self.dtw_band_fraction * length - 1e-9))

    def validate(self) -> None:
        def need(cond: bool, msg: str) -> None:
            if not cond:
                raise ConfigError(msg)

        need(self.window >= 4, "window must be >= 4")
        need(self.threshold_mode in THRESHOLD_MODES, f"threshold_mode must be one of {THRESHOLD_MODES}")
        need(self.threshold is None or self.threshold > 0, "threshold must be positive")
        need(len(self.operators) > 0, "at least one operator must be enabled")
        unknown = set(self.operators) - set(OPERATOR_NAMES)
        need(not unknown, f"unknown operators: {sorted(unknown)}")
        need(len(set(self.operators)) == len(self.operators), "operators listed twice")
        need(0.5 <= self.scaling_min <= 1.0 <= self.scaling_max <= 2.0,
             "scaling range must satisfy 0.5 <= min <= 1 <= max <= 2")
        need(1 <= self.scaling_step_percent <= 50, "scaling_step_percent must be in [1, 50]")
        need(0.0 <= self.dtw_band_fraction <= 1.0, "dtw_band_fraction must be in [0, 1]")
        need(self.smoothing_window >= 1 and self.smoothing_window % 2 == 1,
             "smoothing_window must be a positive odd integer")
        need(self.pnd_min_seg >= 2, "pnd_min_seg must be >= 2")
        need(self.trend_grid_size >= 3 and self.trend_grid_size % 2 == 1,
             "trend_grid_size must be odd and >= 3 so that zero slope is on the grid")
        need(self.trend_max_sigma > 0, "trend_max_sigma must be positive")
        need(self.neighbor_candidates >= 1, "neighbor_candidates must be >= 1")
        need(self.weak_threshold > 0, "weak_threshold must be positive")
        need(self.anomaly_check in ("error", "warn", "off"), "anomaly_check must be error, warn or off")
        need(self.workers >= 1, "workers must be >= 1")
        need(self.bench_trials_per_class >= 1, "bench_trials_per_class must be >= 1")
        bad = set(self.bench_classes) - set(CORRUPTION_NAMES)
        need(not bad, f"unknown corruption classes: {sorted(bad)}")
        need(len(self.bench_classes) > 0, "bench_classes must not be empty")
        need(self.bench_source in SOURCE_KINDS, f"bench_source must be one of {SOURCE_KINDS}")
        need(self.bench_source != "csv" or self.bench_source_files,
             "bench_source = 'csv' needs bench_source_files")
        need(self.window < self.bench_n_train, "window must be shorter than bench_n_train")
        need(self.bench_n_train + 2 * self.window < self.bench_n,
             "bench_n must leave room for an injection after the training prefix")
        need(4 <= self.inject_length <= self.bench_n - self.bench_n_train - 1,
             "bench_inject_length out of range")
        need(0 < self.bench_magnitude_min <= self.bench_magnitude_max, "bad magnitude range")
        need(self.bench_source_noise >= 0, "bench_source_noise must be >= 0")

    def replace(self, **changes: Any) -> "Config":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> Dict[str, Any]:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


CONFIG_KEYS = frozenset(f.name for f in dataclasses.fields(Config))


def config_from_mapping(data: Dict[str, Any]) -> Config:
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    types = {f.name: f.type for f in dataclasses.fields(Config)}
    kwargs = {}
    for key, value in data.items():
        kwargs[key] = _coerce(key, types[key], value)
    return Config(**kwargs)


def _coerce(key: str, type_name: str, value: Any) -> Any:
    if type_name.startswith("Tuple"):
        if not isinstance(value, (list, tuple)) or not all(isinstance(v, str) for v in value):
            raise ConfigError(f"{key} must be a list of strings")
        return tuple(value)
    if type_name == "int" or type_name == "Optional[int]":
        if value is None and type_name.startswith("Optional"):
            return None
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{key} must be an integer")
        return value
    if type_name in ("float", "Optional[float]"):
        if value is None and type_name.startswith("Optional"):
            return None
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{key} must be a number")
        return float(value)
    if type_name == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{key} must be a string")
        return value
    raise ConfigError(f"unsupported type for {key}")


def load_config(path: Optional[str | Path] = None, **overrides: Any) -> Config:
    data: Dict[str, Any] = {}
    if path is not None:
        with open(path, "rb") as fh:
            try:
                data = tomllib.load(fh)
            except tomllib.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from exc
        nested = [k for k, v in data.items() if isinstance(v, dict)]
        if nested:
            raise ConfigError(f"config must be flat; found tables {nested}")
    data.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_mapping(data)
