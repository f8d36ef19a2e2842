"""The eight counterfactual operators.

Each operator transforms the anomaly ``A`` (or relaxes the distance) and looks
for the best matching normal window among a set of references: either one
neighbor ``T_N`` or every window of the training data. The improvement ratio
is ``I = best post-operator distance / D0`` where ``D0`` is the plain
z-normalized distance from ``A`` to its nearest reference.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from .config import Config
from .metrics import _exact_sq, _shortlist_tol, dtw, oed, pnd, znorm_windows
from .series import DegenerateInputError, SeriesLike, as_array, fit_line, moving_mean, znormalize


class OperatorKind(str, Enum):
    UNIFORM_SCALING = "UniformScaling"
    OCCLUSION = "Occlusion"
    WARPING = "Warping"
    SMOOTHING = "Smoothing"
    LR_FLIP = "LRFlip"
    UD_FLIP = "UDFlip"
    LINEAR_TREND = "LinearTrend"
    PIECEWISE_NORM = "PiecewiseNorm"


class OcclusionSubkind(str, Enum):
    NOISE = "noise"
    SPIKE = "spike"
    DROPOUT = "dropout"


@dataclass
class OperatorResult:
    kind: OperatorKind
    improvement: float
    distance: float
    neighbor: int
    params: Dict[str, Any] = field(default_factory=dict)
    transformed: Optional[np.ndarray] = None


class ZeroDistanceError(ValueError):
    """The anomaly already matches a reference exactly; no ratio can be formed."""


def znormalize_rows(X: np.ndarray) -> np.ndarray:
    """Row-wise z-normalization (flat rows become zeros); vectorized, not bit-matched
    to ``znormalize``."""
    mu = X.mean(axis=1, keepdims=True)
    sd = X.std(axis=1, keepdims=True)
    scale = np.maximum(1.0, np.abs(X).max(axis=1, keepdims=True))
    flat = sd <= 1e-10 * scale
    out = (X - mu) / np.where(flat, 1.0, sd)
    out[flat[:, 0]] = 0.0
    return out


class References:
    """Candidate normal windows, raw and z-normalized.

    Build from one neighbor (``References.single(T_N)``) or from every
    length-``m`` window of a training series (``References.windows(train, m)``).
    """

    def __init__(self, raw: np.ndarray, Z: np.ndarray, offset: int = 0):
        self.raw = raw
        self.Z = Z
        self.norms = np.einsum("ij,ij->i", Z, Z)
        self.offset = offset

    @classmethod
    def single(cls, T_N: SeriesLike) -> "References":
        t = as_array(T_N)
        return cls(t[None, :], znormalize(t)[None, :])

    @classmethod
    def windows(cls, train: SeriesLike, m: int) -> "References":
        x = as_array(train)
        raw = np.lib.stride_tricks.sliding_window_view(x, m)
        return cls(raw, znorm_windows(x, m))

    @property
    def length(self) -> int:
        return self.Z.shape[1]

    def __len__(self) -> int:
        return self.Z.shape[0]

    def nearest_many(self, C: np.ndarray, Z: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
        """Nearest reference row for each z-normalized query row of ``C``.

        Distances are recomputed exactly for a shortlist; ties go to the lowest row.
        """
        Z = self.Z if Z is None else Z
        norms = self.norms if Z is self.Z else np.einsum("ij,ij->i", Z, Z)
        C = np.atleast_2d(C)
        approx = np.einsum("ij,ij->i", C, C)[:, None] + norms[None, :] - 2.0 * (C @ Z.T)
        rr, cc = np.nonzero(approx <= approx.min(axis=1, keepdims=True) + _shortlist_tol(C.shape[1]))
        exact = _exact_sq(C[rr], Z[cc])
        order = np.lexsort((cc, exact, rr))
        first = np.ones(order.size, dtype=bool)
        first[1:] = rr[order][1:] != rr[order][:-1]
        sel = order[first]
        return cc[sel], np.sqrt(exact[sel])

    def nearest(self, z: np.ndarray, Z: Optional[np.ndarray] = None) -> Tuple[int, float]:
        rows, dists = self.nearest_many(z[None, :], Z)
        return int(rows[0]), float(dists[0])

    def closest(self, z: np.ndarray, k: int) -> np.ndarray:
        """Indices of the ``k`` rows closest to ``z``, nearest first."""
        d = self.norms - 2.0 * (self.Z @ z)
        k = min(k, len(self))
        idx = np.argpartition(d, k - 1)[:k] if k < len(self) else np.arange(len(self))
        return idx[np.lexsort((idx, d[idx]))]


RefsLike = Union[References, SeriesLike]


def _refs(T_N: RefsLike) -> References:
    if isinstance(T_N, References):
        return T_N
    t = as_array(T_N)
    return References.single(t)


def _prepare(A: SeriesLike, T_N: RefsLike, min_len: int = 4):
    a = as_array(A)
    refs = _refs(T_N)
    if a.size != refs.length:
        raise DegenerateInputError(f"anomaly and neighbor lengths differ: {a.size} != {refs.length}")
    if a.size < min_len:
        raise DegenerateInputError(f"operators need length >= {min_len}")
    za = znormalize(a)
    row, d0 = refs.nearest(za)
    if not d0 > 0:
        raise ZeroDistanceError("anomaly is at distance 0 from its neighbor")
    return a, za, refs, row, d0


def base_distance(A: SeriesLike, T_N: RefsLike) -> float:
    """``D0``: z-normalized Euclidean distance to the nearest reference."""
    return _prepare(A, T_N)[4]


def stretch_rows(R: np.ndarray, percent: int) -> np.ndarray:
    """Stretch each row in time by ``percent`` (linear interpolation), keep the
    first ``L`` samples, z-normalize."""
    n = R.shape[1]
    # round-half-up of n * (100 + percent) / 100 in integer arithmetic
    target = (2 * n * (100 + percent) + 100) // 200
    pos = np.arange(n) * ((n - 1) / (target - 1))
    i0 = np.minimum(np.floor(pos).astype(int), n - 2)
    frac = pos - i0
    out = R[:, i0] * (1.0 - frac) + R[:, i0 + 1] * frac
    return znormalize_rows(out)


def uniform_scaling(A: SeriesLike, T_N: RefsLike, config: Config = Config()) -> OperatorResult:
    """Stretch the anomaly or the references, whichever closes the distance.

    ``percent`` is the scaling the anomaly carries: +9 means it is the neighbor
    lengthened by 9% (stretching the neighbor matches it), -9 means it is
    shortened (stretching the anomaly matches it). Stretched series are
    truncated to the original length. The identity cell is always on the
    grid, so the improvement never exceeds 1.
    """
    a, za, refs, row, d0 = _prepare(A, T_N)
    step = config.scaling_step_percent
    up = int(round((config.scaling_max - 1.0) * 100))
    down = int(round((1.0 - config.scaling_min) * 100))
    best = (d0, 0, row, za)
    ups = list(range(step, up + 1, step))
    if ups:
        C = np.vstack([stretch_rows(a[None, :], k) for k in ups])
        rows, dists = refs.nearest_many(C)
        for k, r, d, c in zip(ups, rows, dists, C):
            if d < best[0]:
                best = (d, -k, int(r), c)
    for k in range(step, down + 1, step):
        r, d = refs.nearest(za, stretch_rows(refs.raw, k))
        if d < best[0]:
            best = (d, k, r, za)
    d, pct, r, series = best
    return OperatorResult(OperatorKind.UNIFORM_SCALING, d / d0, d, r, {"percent": pct}, series)


def occlusion_subkind(A: SeriesLike, location: int, length: int) -> Optional[OcclusionSubkind]:
    """Spike / dropout / noise by comparing the occluded mean with the remainder."""
    if length == 0:
        return None
    a = znormalize(as_array(A))
    inside = a[location:location + length]
    rest = np.concatenate((a[:location], a[location + length:]))
    mu_occ = inside.mean()
    mu_rest, sd_rest = rest.mean(), rest.std()
    if mu_occ >= mu_rest + sd_rest:
        return OcclusionSubkind.SPIKE
    if mu_occ <= mu_rest - sd_rest:
        return OcclusionSubkind.DROPOUT
    return OcclusionSubkind.NOISE


def occlusion(A: SeriesLike, T_N: RefsLike, config: Config = Config()) -> OperatorResult:
    a, za, refs, row, d0 = _prepare(A, T_N)
    best, best_row = None, row
    for r in refs.closest(za, config.neighbor_candidates):
        res = oed(refs.Z[r], za)
        if best is None or (res.distance, r) < (best.distance, best_row):
            best, best_row = res, int(r)
    sub = occlusion_subkind(a, best.location, best.length)
    params = {
        "location": best.location,
        "length": best.length,
        "subkind": sub.value if sub else None,
    }
    return OperatorResult(OperatorKind.OCCLUSION, best.distance / d0, best.distance, best_row, params)


def warping(A: SeriesLike, T_N: RefsLike, config: Config = Config()) -> OperatorResult:
    """Banded DTW, scaled by ``L / |path length - L|``.

    A diagonal path is plain Euclidean distance and scores exactly ``D0``.
    """
    a, za, refs, row, d0 = _prepare(A, T_N)
    n = a.size
    band = config.band_for(n)
    best = None
    for r in refs.closest(za, config.neighbor_candidates):
        w = dtw(za, refs.Z[r], band)
        extra = w.path_length - n
        score = d0 if extra == 0 else w.distance * (n / abs(extra))
        if best is None or (score, r) < (best[0], best[1]):
            best = (score, int(r), w)
    score, r, w = best
    params = {
        "band": band,
        "max_deviation": w.max_deviation,
        "path_length": w.path_length,
        "dtw_distance": w.distance,
    }
    return OperatorResult(OperatorKind.WARPING, score / d0, score, r, params)


def smoothing(A: SeriesLike, T_N: RefsLike, config: Config = Config()) -> OperatorResult:
    a, za, refs, row, d0 = _prepare(A, T_N, min_len=max(4, config.smoothing_window))
    sm = znormalize(moving_mean(a, config.smoothing_window))
    r, d = refs.nearest(sm)
    return OperatorResult(OperatorKind.SMOOTHING, d / d0, d, r,
                          {"window": config.smoothing_window}, sm)


def lr_flip(A: SeriesLike, T_N: RefsLike, config: Config = Config()) -> OperatorResult:
    a, za, refs, row, d0 = _prepare(A, T_N)
    flipped = znormalize(a[::-1])
    r, d = refs.nearest(flipped)
    return OperatorResult(OperatorKind.LR_FLIP, d / d0, d, r, {}, flipped)


def ud_flip(A: SeriesLike, T_N: RefsLike, config: Config = Config()) -> OperatorResult:
    a, za, refs, row, d0 = _prepare(A, T_N)
    flipped = znormalize(-a)
    r, d = refs.nearest(flipped)
    return OperatorResult(OperatorKind.UD_FLIP, d / d0, d, r, {}, flipped)


def trend_grid(n: int, config: Config = Config()) -> np.ndarray:
    """Candidate slopes in units of anomaly std per sample; zero sits exactly mid-grid."""
    k = config.trend_grid_size
    smax = config.trend_max_sigma / n
    grid = np.linspace(-smax, smax, k)
    grid[k // 2] = 0.0
    return grid


def linear_trend(A: SeriesLike, T_N: RefsLike, config: Config = Config()) -> OperatorResult:
    """Add the ramp ``slope * (0, 1, ..., L-1)`` to the z-normalized anomaly.

    ``slope`` is searched on a symmetric grid; the slope that removes the
    anomaly's own least squares trend is also tried when it lies within bounds.
    Reported ``rise`` is the trend the anomaly carries (minus the correction)
    over the whole window, in units of its std.
    """
    a, za, refs, row, d0 = _prepare(A, T_N)
    n = a.size
    ramp = np.arange(n, dtype=float)
    grid = trend_grid(n, config)
    slopes = [s for s in grid if s != 0.0]
    own = -fit_line(za).slope
    if abs(own) <= grid[-1] and own != 0.0:
        slopes.append(own)
    C = np.vstack([znormalize(za + s * ramp) for s in slopes])
    rows, dists = refs.nearest_many(C)
    # zero slope is the identity cell and reproduces D0 exactly
    best = (d0, 0.0, row, za)
    for s, r, d, c in zip(slopes, rows, dists, C):
        if (d, abs(s)) < (best[0], abs(best[1])):
            best = (d, float(s), int(r), c)
    d, s, r, series = best
    params = {"slope": s, "rise": -s * (n - 1)}
    return OperatorResult(OperatorKind.LINEAR_TREND, d / d0, d, r, params, series)


def piecewise_norm(A: SeriesLike, T_N: RefsLike, config: Config = Config()) -> OperatorResult:
    a, za, refs, row, d0 = _prepare(A, T_N, min_len=max(4, 2 * config.pnd_min_seg))
    best, best_row = None, row
    for r in refs.closest(za, config.neighbor_candidates):
        res = pnd(a, refs.raw[r], config.pnd_min_seg)
        if best is None or (res.distance, r) < (best.distance, best_row):
            best, best_row = res, int(r)
    k = best.split_index + 1
    transformed = np.concatenate((znormalize(a[:k]), znormalize(a[k:])))
    return OperatorResult(OperatorKind.PIECEWISE_NORM, best.distance / d0, best.distance, best_row,
                          {"split": best.split_index}, transformed)


OPERATORS: Dict[OperatorKind, Callable[..., OperatorResult]] = {
    OperatorKind.UNIFORM_SCALING: uniform_scaling,
    OperatorKind.OCCLUSION: occlusion,
    OperatorKind.WARPING: warping,
    OperatorKind.SMOOTHING: smoothing,
    OperatorKind.LR_FLIP: lr_flip,
    OperatorKind.UD_FLIP: ud_flip,
    OperatorKind.LINEAR_TREND: linear_trend,
    OperatorKind.PIECEWISE_NORM: piecewise_norm,
}


def run_suite(A: SeriesLike, T_N: RefsLike, config: Config = Config()) -> List[OperatorResult]:
    """Evaluate every enabled operator, in configuration order."""
    refs = _refs(T_N)
    return [OPERATORS[OperatorKind(name)](A, refs, config) for name in config.operators]
