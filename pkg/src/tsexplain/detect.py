"""Left matrix profile, training-derived thresholds and anomaly extraction."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from .metrics import _exact_sq, _shortlist_tol, nn_search, znorm_windows
from .series import DegenerateInputError, SeriesLike, TimeSeries, as_array

_BLOCK = 512


@dataclass(frozen=True)
class MatrixProfile:
    distances: np.ndarray
    indices: np.ndarray
    window: int
    exclusion: int


@dataclass(frozen=True)
class AnomalyCandidate:
    location: int
    window: TimeSeries
    score: float
    neighbor_location: int
    neighbor_distance: float


def _profile_rows(
    Z: np.ndarray,
    rows: np.ndarray,
    admissible: Callable[[np.ndarray, np.ndarray], np.ndarray],
) -> tuple[np.ndarray, np.ndarray]:
    """Exact nearest neighbor for each row in ``rows`` over admissible columns.

    A Gram-matrix pass shortlists columns; shortlisted pairs are rescored with
    the same sequential arithmetic as ``znorm_euclidean``.
    """
    m = Z.shape[1]
    tol = _shortlist_tol(m)
    norms = np.einsum("ij,ij->i", Z, Z)
    cols = np.arange(Z.shape[0])
    dist = np.full(rows.size, np.inf)
    idx = np.full(rows.size, -1, dtype=np.int64)
    for lo in range(0, rows.size, _BLOCK):
        r = rows[lo:lo + _BLOCK]
        approx = norms[r, None] + norms[None, :] - 2.0 * (Z[r] @ Z.T)
        approx[~admissible(r[:, None], cols[None, :])] = np.inf
        best = approx.min(axis=1)
        ok = np.isfinite(best)
        rr, cc = np.nonzero((approx <= (best + tol)[:, None]) & ok[:, None])
        if rr.size == 0:
            continue
        exact = _exact_sq(Z[r[rr]], Z[cc])
        # per row: smallest exact value, then smallest column
        order = np.lexsort((cc, exact, rr))
        first = np.ones(order.size, dtype=bool)
        first[1:] = rr[order][1:] != rr[order][:-1]
        sel = order[first]
        dist[lo + rr[sel]] = np.sqrt(exact[sel])
        idx[lo + rr[sel]] = cc[sel]
    return dist, idx


def left_matrix_profile(
    s: SeriesLike, m: int, exclusion: Optional[int] = None, start: int = 0
) -> MatrixProfile:
    """Distance from each window to its nearest strictly-earlier window.

    Window ``i`` may match window ``j`` only when ``j <= i - exclusion``
    (default ``exclusion = m``). Windows without any admissible neighbor get
    ``inf`` and index -1. Entries before ``start`` are left as ``nan``.
    """
    x = as_array(s)
    if m < 4:
        raise DegenerateInputError("window must be >= 4")
    if x.size < 2 * m:
        raise DegenerateInputError(f"series of length {x.size} too short for window {m}")
    excl = m if exclusion is None else exclusion
    Z = znorm_windows(x, m)
    n = Z.shape[0]
    rows = np.arange(start, n)
    d, j = _profile_rows(Z, rows, lambda r, c: c <= r - excl)
    distances = np.full(n, np.nan)
    indices = np.full(n, -1, dtype=np.int64)
    distances[start:] = d
    indices[start:] = j
    return MatrixProfile(distances, indices, m, excl)


def self_join_profile(s: SeriesLike, m: int, exclusion: Optional[int] = None) -> MatrixProfile:
    """Two-sided profile: neighbors anywhere outside the exclusion zone."""
    x = as_array(s)
    excl = m if exclusion is None else exclusion
    Z = znorm_windows(x, m)
    d, j = _profile_rows(Z, np.arange(Z.shape[0]), lambda r, c: np.abs(r - c) >= excl)
    return MatrixProfile(d, j, m, excl)


def threshold_from_distances(distances, mode: str = "max_plus_sigma") -> float:
    """``mu_sigma``: mean + 3 std. ``max_plus_sigma``: max + std. Population std."""
    d = np.asarray(distances, dtype=float)
    d = d[np.isfinite(d)]
    if d.size == 0:
        raise DegenerateInputError("no finite distances to derive a threshold from")
    if mode == "mu_sigma":
        return float(d.mean() + 3.0 * d.std())
    if mode == "max_plus_sigma":
        return float(d.max() + d.std())
    raise ValueError(f"unknown threshold mode {mode!r}")


def train_threshold(train: SeriesLike, m: int, mode: str = "max_plus_sigma") -> float:
    x = as_array(train)
    if x.size - m + 1 < 10 or x.size < 2 * m:
        raise DegenerateInputError("training data yields fewer than 10 windows")
    prof = self_join_profile(x, m)
    return threshold_from_distances(prof.distances, mode)


def _merge_excursions(starts: np.ndarray, scores: np.ndarray, m: int) -> List[int]:
    """Group above-threshold windows whose spans overlap; keep each group's peak."""
    peaks = []
    group_lo = 0
    for k in range(1, starts.size + 1):
        if k == starts.size or starts[k] - starts[k - 1] >= m:
            seg = scores[group_lo:k]
            peaks.append(int(starts[group_lo + int(np.argmax(seg))]))
            group_lo = k
    return peaks


def find_anomalies(
    test: SeriesLike, train: SeriesLike, m: int, threshold: float
) -> List[AnomalyCandidate]:
    """Windows of ``test`` whose left-profile distance exceeds ``threshold``.

    Left context is the training data followed by the earlier part of the test
    series. Overlapping excursions collapse to their peak window.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    tr, te = as_array(train), as_array(test)
    if te.size < m or tr.size < m:
        raise DegenerateInputError("train and test must each hold at least one window")
    full = np.concatenate((tr, te))
    prof = left_matrix_profile(full, m, start=tr.size)
    scores = prof.distances[tr.size:]
    starts = np.flatnonzero(scores > threshold)
    if starts.size == 0:
        return []
    test_ts = test if isinstance(test, TimeSeries) else TimeSeries(te)
    out = []
    for peak in _merge_excursions(starts, scores[starts], m):
        window = test_ts[peak:peak + m]
        loc, dist = nn_search(window.values, tr)
        out.append(AnomalyCandidate(peak, window, float(scores[peak]), loc, dist))
    return out
