"""Benchmark harnesses: occlusion recovery and detect-then-explain confusion matrix."""
from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .config import OPERATOR_NAMES, Config
from .corrupt import EXPECTED_OPERATOR, CorruptionSpec, corrupt
from .detect import find_anomalies, train_threshold
from .explain import explain
from .metrics import euclidean, oed
from .operators import ZeroDistanceError
from .series import as_array, znormalize


# --------------------------------------------------------------------------
# sources

def quasi_periodic(n: int, rng: np.random.Generator, noise: float = 0.01,
                   period: Optional[float] = None, harmonics: int = 6,
                   jitter: float = 0.02) -> np.ndarray:
    """Pulse-like harmonic mixture with slowly drifting instantaneous frequency.

    A sawtooth-style sine series (sharp rise, slow fall) plus a coherent cosine
    pulse train (narrow crest, broad trough), so the shape is asymmetric both in
    time and in amplitude, as in PPG or gait traces. Without that asymmetry a
    reversed or inverted stretch is just a phase-shifted copy of normal data.
    """
    if period is None:
        period = rng.uniform(28.0, 44.0)
    t = np.arange(n)
    # smooth frequency jitter, std ``jitter`` relative to the base frequency
    knots = rng.normal(0.0, jitter, size=n // 200 + 2)
    jitter = np.interp(t, np.linspace(0, n - 1, knots.size), knots)
    phase = 2 * np.pi * np.cumsum((1.0 + jitter) / period)
    saw = rng.uniform(0.6, 1.0)
    pulse = rng.uniform(0.4, 0.7)
    x = np.zeros(n)
    for k in range(1, harmonics + 1):
        x += saw * np.sin(k * phase) / k + pulse * np.cos(k * phase)
    return x + noise * rng.standard_normal(n)


def exemplar_family(count: int, m: int, rng: np.random.Generator, noise: float = 0.02,
                    wobble: float = 0.01) -> np.ndarray:
    """Near-identical smooth exemplars (one shape, small per-exemplar variation).

    ``wobble`` scales a slow per-exemplar sinusoidal drift. Occlusion recovery
    is sensitive to it: the occlusion score adds prefix and suffix norms, so a
    residual spread over the whole window makes swallowing an edge cheap.
    """
    t = np.linspace(0.0, 1.0, m)
    base = (np.sin(2 * np.pi * 1.5 * t) + 0.6 * np.exp(-((t - 0.35) / 0.08) ** 2)
            - 0.4 * np.exp(-((t - 0.75) / 0.05) ** 2))
    out = np.empty((count, m))
    for k in range(count):
        drift = wobble * rng.standard_normal() * np.sin(2 * np.pi * t + rng.uniform(0, 2 * np.pi))
        out[k] = base * (1.0 + 0.03 * rng.standard_normal()) + drift + noise * rng.standard_normal(m)
    return out


# --------------------------------------------------------------------------
# occlusion recovery

REGION_KINDS = ("Noise", "Spike", "Dropout")


@dataclass
class RecoveryReport:
    trials: int
    kinds: List[str]
    true_location: List[int]
    true_length: List[int]
    found_location: List[int]
    found_length: List[int]

    def _err(self, a, b) -> np.ndarray:
        return np.asarray(a) - np.asarray(b)

    @property
    def location_error(self) -> np.ndarray:
        return self._err(self.found_location, self.true_location)

    @property
    def length_error(self) -> np.ndarray:
        return self._err(self.found_length, self.true_length)

    def location_within(self, tol: int = 3) -> float:
        """Fraction of non-empty injections whose location is recovered within ``tol``."""
        mask = np.asarray(self.true_length) > 0
        if not mask.any():
            return float("nan")
        return float(np.mean(np.abs(self.location_error[mask]) <= tol))

    def length_within(self, tol: int = 3) -> float:
        return float(np.mean(np.abs(self.length_error) <= tol))

    def zero_length_recovered(self, max_len: int = 2) -> float:
        mask = np.asarray(self.true_length) == 0
        if not mask.any():
            return float("nan")
        return float(np.mean(np.asarray(self.found_length)[mask] <= max_len))

    def histograms(self) -> Dict[str, Dict[int, int]]:
        out = {}
        for name, err in (("location", self.location_error), ("length", self.length_error)):
            vals, counts = np.unique(err, return_counts=True)
            out[name] = {int(v): int(c) for v, c in zip(vals, counts)}
        return out


def distort_region(x: np.ndarray, kind: str, location: int, length: int,
                   magnitude: float, rng: np.random.Generator) -> np.ndarray:
    """Add noise, a raised plateau (spike) or a lowered plateau (dropout)."""
    out = x.copy()
    if length == 0:
        return out
    sigma = x.std()
    sl = slice(location, location + length)
    if kind == "Noise":
        out[sl] += rng.normal(0.0, magnitude * sigma, size=length)
    elif kind == "Spike":
        out[sl] += magnitude * sigma
    elif kind == "Dropout":
        out[sl] -= magnitude * sigma
    else:
        raise ValueError(f"unknown region distortion {kind!r}")
    return out


def occlusion_recovery_bench(
    dataset: Sequence[Sequence[float]],
    trials: int,
    seed: int = 0,
    magnitude: Tuple[float, float] = (4.0, 6.0),
    kinds: Sequence[str] = REGION_KINDS,
) -> RecoveryReport:
    """Corrupt random exemplars and check where the occlusion search points.

    Locations are drawn from ``[0, m/2)`` and lengths from ``[0, m/4]``. The
    nearest neighbor excludes the donor exemplar.

    Exemplars are z-normalized once, before corruption, the way archive
    exemplars arrive; the corrupted copy is not renormalized, so its clean
    part still lines up with the neighbor.
    """
    data = np.asarray(dataset, dtype=float)
    if data.ndim != 2 or data.shape[0] < 2:
        raise ValueError("need at least 2 exemplars of equal length")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    count, m = data.shape
    zdata = np.array([znormalize(row) for row in data])
    rep = RecoveryReport(trials, [], [], [], [], [])
    for trial in range(trials):
        rng = np.random.default_rng((seed, trial))
        donor = int(rng.integers(count))
        kind = str(kinds[int(rng.integers(len(kinds)))])
        loc = int(rng.integers(0, m // 2))
        length = int(rng.integers(0, m // 4 + 1))
        mag = float(rng.uniform(*magnitude))
        anomaly = distort_region(zdata[donor], kind, loc, length, mag, rng)
        best, nn = math.inf, -1
        for k in range(count):
            if k == donor:
                continue
            d = euclidean(anomaly, zdata[k])
            if d < best:
                best, nn = d, k
        res = oed(zdata[nn], anomaly)
        rep.kinds.append(kind)
        rep.true_location.append(loc)
        rep.true_length.append(length)
        rep.found_location.append(res.location)
        rep.found_length.append(res.length)
    return rep


# --------------------------------------------------------------------------
# end-to-end benchmark

@dataclass
class TrialOutcome:
    cls: str
    trial: int
    detected: bool
    explained_as: Optional[str] = None
    improvement: Optional[float] = None
    location: Optional[int] = None


@dataclass
class BenchReport:
    classes: List[str]
    operators: List[str]
    confusion: List[List[int]]
    detected: int
    missed: int
    missed_per_class: List[int]
    trials_per_class: int
    per_class_accuracy: List[float]
    overall_accuracy: float
    detection_rate: float
    seed: int
    config: Dict = field(default_factory=dict)

    def top_confusions(self, k: int = 2) -> List[Tuple[str, str, int]]:
        """Most frequent off-target cells as ``(class, operator, count)``."""
        cells = []
        for i, cls in enumerate(self.classes):
            for j, op in enumerate(self.operators):
                if op != EXPECTED_OPERATOR[cls] and self.confusion[i][j] > 0:
                    cells.append((cls, op, self.confusion[i][j]))
        cells.sort(key=lambda c: -c[2])
        return cells[:k]

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    def to_text(self) -> str:
        short = {"UniformScaling": "UScale", "PiecewiseNorm": "PNorm", "LinearTrend": "LTrend",
                 "Occlusion": "Occl", "Smoothing": "Smooth", "Warping": "Warp"}
        heads = [short.get(o, o) for o in self.operators]
        width = max(8, max(len(h) for h in heads) + 1)
        lines = ["injected \\ explained".ljust(20) + "".join(h.rjust(width) for h in heads)
                 + "missed".rjust(width)]
        for i, cls in enumerate(self.classes):
            cells = "".join((str(v) if v else "").rjust(width) for v in self.confusion[i])
            lines.append(cls.ljust(20) + cells + str(self.missed_per_class[i]).rjust(width))
        lines.append("")
        lines.append(f"detected {self.detected} of {self.detected + self.missed} "
                     f"({100 * self.detection_rate:.2f}%)")
        lines.append(f"overall accuracy {100 * self.overall_accuracy:.2f}%")
        return "\n".join(lines) + "\n"


def _source(config: Config, rng: np.random.Generator) -> np.ndarray:
    if config.bench_source == "csv":
        from .io import load_csv

        path = config.bench_source_files[int(rng.integers(len(config.bench_source_files)))]
        values = load_csv(path).values
        if values.size < config.bench_n:
            raise ValueError(f"{path} is shorter than bench_n = {config.bench_n}")
        start = int(rng.integers(0, values.size - config.bench_n + 1))
        return values[start:start + config.bench_n].copy()
    return quasi_periodic(config.bench_n, rng, config.bench_source_noise)


# classes whose natural scale differs from the shared magnitude range:
# added white noise of several sigma buries the signal rather than blurring it
CLASS_MAGNITUDES = {"NoisyGlobal": (0.3, 0.8)}


def trial_spec(cls: str, config: Config, rng: np.random.Generator) -> CorruptionSpec:
    """Draw location, magnitude and seed for one injected corruption."""
    length = config.inject_length
    lo = config.bench_n_train + 1
    hi = config.bench_n - config.window - length // 2
    if cls == "UniformScale":
        hi -= int(math.ceil(0.15 * length)) + 1
    location = int(rng.integers(lo, max(lo + 1, hi)))
    if cls == "Warp":
        # displacement in samples: a sizeable share of the DTW band
        band = config.band_for(config.window)
        magnitude = float(rng.uniform(0.6, 1.0) * band)
    elif cls in CLASS_MAGNITUDES:
        magnitude = float(rng.uniform(*CLASS_MAGNITUDES[cls]))
    else:
        magnitude = float(rng.uniform(config.bench_magnitude_min, config.bench_magnitude_max))
    return CorruptionSpec(cls, location, length, magnitude, int(rng.integers(2**31)))


def run_trial(config: Config, ci: int, trial: int) -> TrialOutcome:
    cls = config.bench_classes[ci]
    rng = np.random.default_rng((config.seed, ci, trial))
    series = _source(config, rng)
    spec = trial_spec(cls, config, rng)
    corrupted, truth = corrupt(series, spec)
    n_train = config.bench_n_train
    m = config.window
    train, test = corrupted[:n_train], corrupted[n_train:]
    threshold = config.threshold or train_threshold(train, m, config.threshold_mode)
    hits = [c for c in find_anomalies(test, train, m, threshold)
            if truth.overlaps(c.location + n_train, c.location + n_train + m)]
    if not hits:
        return TrialOutcome(cls, trial, False)
    cand = max(hits, key=lambda c: c.score)
    try:
        e = explain(cand.window.values, train, config.replace(anomaly_check="off"),
                    anomaly_location=cand.location)
    except ZeroDistanceError:
        return TrialOutcome(cls, trial, False)
    return TrialOutcome(cls, trial, True, e.best.kind.value, e.best.improvement, cand.location)


def _run_chunk(args) -> List[TrialOutcome]:
    config, jobs = args
    return [run_trial(config, ci, t) for ci, t in jobs]


def tally(config: Config, outcomes: Sequence[TrialOutcome]) -> BenchReport:
    classes = list(config.bench_classes)
    ops = list(OPERATOR_NAMES)
    conf = [[0] * len(ops) for _ in classes]
    missed = [0] * len(classes)
    for o in outcomes:
        i = classes.index(o.cls)
        if o.detected:
            conf[i][ops.index(o.explained_as)] += 1
        else:
            missed[i] += 1
    correct = [conf[i][ops.index(EXPECTED_OPERATOR[c])] for i, c in enumerate(classes)]
    detected_pc = [sum(row) for row in conf]
    detected = sum(detected_pc)
    total = len(outcomes)
    return BenchReport(
        classes=classes,
        operators=ops,
        confusion=conf,
        detected=detected,
        missed=total - detected,
        missed_per_class=missed,
        trials_per_class=config.bench_trials_per_class,
        per_class_accuracy=[c / d if d else 0.0 for c, d in zip(correct, detected_pc)],
        overall_accuracy=sum(correct) / detected if detected else 0.0,
        detection_rate=detected / total if total else 0.0,
        seed=config.seed,
        config=config.replace(workers=1).to_dict(),
    )


def run_benchmark(config: Config = Config(), workers: Optional[int] = None) -> BenchReport:
    """Inject, detect and explain ``bench_trials_per_class`` corruptions per class.

    Each trial draws from its own generator seeded by ``(seed, class, trial)``,
    so the report does not depend on the number of workers.
    """
    workers = config.workers if workers is None else workers
    jobs = [(ci, t) for ci in range(len(config.bench_classes))
            for t in range(config.bench_trials_per_class)]
    if workers <= 1:
        outcomes = _run_chunk((config, jobs))
    else:
        chunks = [jobs[k::workers] for k in range(workers)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, [(config, c) for c in chunks]))
        outcomes = [o for part in parts for o in part]
        outcomes.sort(key=lambda o: (config.bench_classes.index(o.cls), o.trial))
    return tally(config, outcomes)
