"""Distance measures: Euclidean, z-normalized search, banded DTW, piecewise
normalized distance and the occlusion Euclidean distance.

Searches that use a fast approximate pass (Gram matrices) only use it to
shortlist candidates; every reported distance is recomputed with the same
sequential arithmetic a naive scan would use, so results match the naive scan
exactly.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .series import DegenerateInputError, SeriesLike, as_array, seq_sum, znormalize


class LengthMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class WarpResult:
    distance: float
    path: List[Tuple[int, int]]

    @property
    def path_length(self) -> int:
        return len(self.path)

    @property
    def max_deviation(self) -> int:
        return max(abs(i - j) for i, j in self.path)


@dataclass(frozen=True)
class OcclusionResult:
    distance: float
    location: int
    length: int


@dataclass(frozen=True)
class SplitResult:
    distance: float
    split_index: int


def _pair(a: SeriesLike, b: SeriesLike) -> Tuple[np.ndarray, np.ndarray]:
    x, y = as_array(a), as_array(b)
    if x.size != y.size:
        raise LengthMismatchError(f"lengths differ: {x.size} != {y.size}")
    return x, y


def euclidean(a: SeriesLike, b: SeriesLike) -> float:
    x, y = _pair(a, b)
    d = x - y
    return math.sqrt(seq_sum(d * d))


def znorm_euclidean(a: SeriesLike, b: SeriesLike) -> float:
    x, y = _pair(a, b)
    return euclidean(znormalize(x), znormalize(y))


def znorm_windows(s: SeriesLike, m: int) -> np.ndarray:
    """Row ``i`` is ``znormalize(s[i:i+m])``, computed window by window."""
    x = as_array(s)
    n = x.size - m + 1
    if n < 1:
        raise DegenerateInputError(f"series of length {x.size} has no window of length {m}")
    out = np.empty((n, m))
    for i in range(n):
        out[i] = znormalize(x[i:i + m])
    return out


def _shortlist_tol(m: int) -> float:
    # generous bound on Gram-matrix rounding error in squared distance units
    return 1e-8 * (2 * m + 1)


def _exact_sq(za: np.ndarray, zb: np.ndarray) -> np.ndarray:
    d = za - zb
    return np.cumsum(d * d, axis=-1)[..., -1]


def nn_search(query: SeriesLike, train: SeriesLike) -> Tuple[int, float]:
    """Nearest neighbor of ``query`` among all windows of ``train`` under
    z-normalized Euclidean distance. Ties go to the smallest start index."""
    q = as_array(query)
    t = as_array(train)
    m = q.size
    if m < 2:
        raise DegenerateInputError("query needs at least 2 samples")
    if t.size < m:
        raise DegenerateInputError("training series is shorter than the query")
    zq = znormalize(q)
    Z = znorm_windows(t, m)
    approx = np.sum(Z * Z, axis=1) + np.dot(zq, zq) - 2.0 * (Z @ zq)
    cand = np.flatnonzero(approx <= approx.min() + _shortlist_tol(m))
    exact = _exact_sq(Z[cand], zq)
    k = int(np.argmin(exact))
    return int(cand[k]), math.sqrt(exact[k])


def dtw(a: SeriesLike, b: SeriesLike, band: int) -> WarpResult:
    """Sakoe-Chiba banded DTW on z-normalized inputs, with the warping path.

    The distance is the square root of the accumulated squared differences.
    Backtracking prefers the diagonal, then ``(i-1, j)``, then ``(i, j-1)``.
    """
    x, y = _pair(a, b)
    n = x.size
    if band < 0 or band > n:
        raise ValueError(f"band must lie in [0, {n}]")
    xs = znormalize(x).tolist()
    ys = znormalize(y).tolist()
    inf = math.inf
    D = [[inf] * n for _ in range(n)]
    for i in range(n):
        xi = xs[i]
        row = D[i]
        prev = D[i - 1] if i else None
        for j in range(max(0, i - band), min(n, i + band + 1)):
            d = xi - ys[j]
            c = d * d
            if i == 0 and j == 0:
                row[j] = c
                continue
            best = inf
            if i and j:
                best = prev[j - 1]
            if i and prev[j] < best:
                best = prev[j]
            if j and row[j - 1] < best:
                best = row[j - 1]
            row[j] = c + best
    path = [(n - 1, n - 1)]
    i = j = n - 1
    while i or j:
        if i and j:
            step = (i - 1, j - 1)
            best = D[i - 1][j - 1]
            if D[i - 1][j] < best:
                step, best = (i - 1, j), D[i - 1][j]
            if D[i][j - 1] < best:
                step = (i, j - 1)
        elif i:
            step = (i - 1, j)
        else:
            step = (i, j - 1)
        i, j = step
        path.append(step)
    path.reverse()
    return WarpResult(math.sqrt(D[n - 1][n - 1]), path)


def pnd_at(a: SeriesLike, b: SeriesLike, split: int) -> float:
    """Piecewise normalized distance for one split; ``split`` is the last left index."""
    x, y = _pair(a, b)
    k = split + 1
    left = _exact_sq(znormalize(x[:k]), znormalize(y[:k]))
    right = _exact_sq(znormalize(x[k:]), znormalize(y[k:]))
    return math.sqrt(float(left) + float(right))


def pnd(a: SeriesLike, b: SeriesLike, min_seg: int = 3) -> SplitResult:
    """Best split under piecewise normalization; both sides keep at least
    ``min_seg`` samples. Ties go to the smallest split index."""
    x, y = _pair(a, b)
    n = x.size
    if min_seg < 2 or n < 2 * min_seg:
        raise DegenerateInputError(f"need min_seg >= 2 and length >= {2 * min_seg}")
    best = SplitResult(math.inf, -1)
    for split in range(min_seg - 1, n - min_seg):
        d = pnd_at(x, y, split)
        if d < best.distance:
            best = SplitResult(d, split)
    return best


def occlusion_scale(n: int) -> np.ndarray:
    """Penalty per occlusion length; entry ``k`` applies to length ``k`` (entry 0 unused)."""
    half = n // 2
    return np.concatenate(([0.0], np.linspace(0.0, 2.0, half)))


def oed_surface(t: SeriesLike, a: SeriesLike) -> np.ndarray:
    """Full occlusion score grid, shape ``(L//2 + 1, L + 1)`` indexed by
    ``[length, location]``; inadmissible cells are ``inf``. Row 0 holds the plain
    Euclidean distance at location 0."""
    x, y = _pair(t, a)
    n = x.size
    if n < 4:
        raise DegenerateInputError("occlusion search needs length >= 4")
    d = x - y
    sq = d * d
    pre_sq = np.concatenate(([0.0], np.cumsum(sq)))
    pre_sum = np.concatenate(([0.0], np.cumsum(d)))
    # forward sums from each start so that suffixes add in the same order as a loop
    suf_sq = np.zeros(n + 1)
    suf_sum = np.zeros(n + 1)
    for start in range(n):
        suf_sq[start] = np.cumsum(sq[start:])[-1]
        suf_sum[start] = np.cumsum(d[start:])[-1]
    scale = occlusion_scale(n)
    half = n // 2
    out = np.full((half + 1, n + 1), np.inf)
    out[0, 0] = math.sqrt(pre_sq[n])
    with np.errstate(invalid="ignore", divide="ignore"):
        for olen in range(1, half + 1):
            loc = np.arange(0, n - olen + 1)
            after_start = loc + olen
            n_before = loc
            n_after = n - after_start
            before = np.sqrt(pre_sq[loc])
            after = np.sqrt(suf_sq[after_start])
            m1 = np.abs(pre_sum[loc] / n_before)
            m2 = np.abs(suf_sum[after_start] / n_after)
            m1 = np.where(n_before == 0, m2, m1)
            m2 = np.where(n_after == 0, m1, m2)
            penalty = ((m1 + m2) * 0.5) * olen
            out[olen, loc] = before + after + penalty + scale[olen]
    return out


def oed(t: SeriesLike, a: SeriesLike) -> OcclusionResult:
    """Occlusion Euclidean distance: best (length, location) to ignore.

    Both inputs are expected to be z-normalized already. Ties go to the
    smallest ``(length, location)``.
    """
    surf = oed_surface(t, a)
    flat = int(np.argmin(surf))
    olen, loc = divmod(flat, surf.shape[1])
    return OcclusionResult(float(surf[olen, loc]), int(loc), int(olen))
