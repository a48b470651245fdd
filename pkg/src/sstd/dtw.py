"""Subsequence dynamic-time-warping search over feature matrices.

dtw_distance() is the classic full-grid alignment with steps
{(1,0),(0,1),(1,1)}; the returned score is the accumulated cost of the
optimal path divided by the path length in cells (ties on cost resolved
toward the shorter path). subsequence_search() finds the utterance span
whose slice minimizes that same normalized cost: it runs the identical
column-restricted recurrence from every candidate start, so its result is
exactly min over spans [s, e) of dtw_distance(query, utterance[s:e]).
Equal-score spans prefer the earliest start, then the latest end (the
widest covering span).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numba import njit

from .errors import DimensionMismatch, EmptyCollection, EmptyInput
from .features import FeatureMatrix

DISTANCE_METRICS = ("euclidean", "cosine")


@dataclass(frozen=True)
class DtwParams:
    n_best: int = 5
    band_width: Optional[int] = None  # Sakoe-Chiba radius in frames
    distance: str = "euclidean"
    # Matches with a higher normalized cost are dropped before ranking.
    max_score: Optional[float] = None

    def __post_init__(self):
        if self.n_best < 1:
            raise ValueError("n_best must be >= 1")
        if self.band_width is not None and self.band_width < 1:
            raise ValueError("band_width must be >= 1 when given")
        if self.distance not in DISTANCE_METRICS:
            raise ValueError(f"distance must be one of {DISTANCE_METRICS}")


@dataclass(frozen=True)
class DtwMatch:
    query_id: str
    utterance_id: str
    start_frame: int
    end_frame: int  # exclusive
    score: float
    query_speaker: str = ""
    matched_speaker: str = ""


def cost_matrix(a: np.ndarray, b: np.ndarray, metric: str = "euclidean") -> np.ndarray:
    """Pairwise frame distances, computed per pair (no BLAS reductions) so
    that values are bit-identical under row slicing of either input."""
    if metric == "euclidean":
        delta = a[:, None, :] - b[None, :, :]
        return np.sqrt((delta * delta).sum(axis=-1))
    if metric == "cosine":
        dots = (a[:, None, :] * b[None, :, :]).sum(axis=-1)
        norm_a = np.sqrt((a * a).sum(axis=-1))
        norm_b = np.sqrt((b * b).sum(axis=-1))
        zero_a = norm_a < 1e-12
        zero_b = norm_b < 1e-12
        denom = np.where(zero_a, 1.0, norm_a)[:, None] * np.where(zero_b, 1.0, norm_b)[None, :]
        sim = dots / denom
        # Zero vectors: identical to another zero vector, max-dissimilar otherwise.
        both_zero = zero_a[:, None] & zero_b[None, :]
        either_zero = zero_a[:, None] | zero_b[None, :]
        sim = np.where(both_zero, 1.0, np.where(either_zero, 0.0, sim))
        return 1.0 - sim
    raise ValueError(f"unknown metric {metric!r}")


@njit(cache=True, nogil=True)
def _accumulate(cost: np.ndarray, band: int):  # pragma: no cover - jitted
    """Full-grid DP; returns (accumulated cost, path length in cells) of the
    optimal path, with minimum-length tie-breaking. band <= 0 disables the
    (slope-corrected) Sakoe-Chiba band."""
    n, m = cost.shape
    inf = np.inf
    acc = np.full((n, m), inf)
    plen = np.zeros((n, m), dtype=np.int64)
    slope = (n - 1.0) / (m - 1.0) if m > 1 else 0.0
    for i in range(n):
        for j in range(m):
            if band > 0 and abs(i - j * slope) > band:
                continue
            if i == 0 and j == 0:
                acc[0, 0] = cost[0, 0]
                plen[0, 0] = 1
                continue
            best = inf
            blen = 0
            if i > 0 and acc[i - 1, j] < inf:
                if acc[i - 1, j] < best or (acc[i - 1, j] == best and plen[i - 1, j] < blen):
                    best = acc[i - 1, j]
                    blen = plen[i - 1, j]
            if j > 0 and acc[i, j - 1] < inf:
                if acc[i, j - 1] < best or (acc[i, j - 1] == best and plen[i, j - 1] < blen):
                    best = acc[i, j - 1]
                    blen = plen[i, j - 1]
            if i > 0 and j > 0 and acc[i - 1, j - 1] < inf:
                if acc[i - 1, j - 1] < best or (
                    acc[i - 1, j - 1] == best and plen[i - 1, j - 1] < blen
                ):
                    best = acc[i - 1, j - 1]
                    blen = plen[i - 1, j - 1]
            if best < inf:
                acc[i, j] = cost[i, j] + best
                plen[i, j] = blen + 1
    return acc[n - 1, m - 1], plen[n - 1, m - 1]


@njit(cache=True, nogil=True)
def _subsequence_scan(cost: np.ndarray, band: int):  # pragma: no cover - jitted
    """Best span by normalized cost over all (start, end) pairs.

    For each start column s this runs the same recurrence _accumulate would
    run on cost[:, s:e], reading candidates off the last row, so candidate
    values are bit-identical to full DTW on the slice. band > 0 restricts
    each span's grid to |column offset - row| <= band.

    Returns (score, start, end_exclusive, accumulated, path_length);
    score is inf when no span is reachable (over-tight band).
    """
    n, m = cost.shape
    inf = np.inf
    best_score = inf
    best_s = 0
    best_e = 0
    best_acc = inf
    best_len = 0
    acc_prev = np.empty(m)
    len_prev = np.zeros(m, dtype=np.int64)
    acc_cur = np.empty(m)
    len_cur = np.zeros(m, dtype=np.int64)
    for s in range(m):
        jmax = m - 1
        if band > 0 and s + n - 1 + band < jmax:
            jmax = s + n - 1 + band
        for i in range(n):
            for j in range(s, jmax + 1):
                jj = j - s
                if band > 0 and abs(jj - i) > band:
                    acc_cur[j] = inf
                    len_cur[j] = 0
                    continue
                if i == 0 and j == s:
                    acc_cur[j] = cost[0, s]
                    len_cur[j] = 1
                    continue
                best = inf
                blen = 0
                if i > 0 and acc_prev[j] < inf:
                    if acc_prev[j] < best or (acc_prev[j] == best and len_prev[j] < blen):
                        best = acc_prev[j]
                        blen = len_prev[j]
                if j > s and acc_cur[j - 1] < inf:
                    if acc_cur[j - 1] < best or (acc_cur[j - 1] == best and len_cur[j - 1] < blen):
                        best = acc_cur[j - 1]
                        blen = len_cur[j - 1]
                if i > 0 and j > s and acc_prev[j - 1] < inf:
                    if acc_prev[j - 1] < best or (
                        acc_prev[j - 1] == best and len_prev[j - 1] < blen
                    ):
                        best = acc_prev[j - 1]
                        blen = len_prev[j - 1]
                if best < inf:
                    acc_cur[j] = cost[i, j] + best
                    len_cur[j] = blen + 1
                else:
                    acc_cur[j] = inf
                    len_cur[j] = 0
            for j in range(s, jmax + 1):
                acc_prev[j] = acc_cur[j]
                len_prev[j] = len_cur[j]
        # Row n-1 now sits in acc_prev; each reachable column is a span end.
        for j in range(s, jmax + 1):
            if acc_prev[j] == inf:
                continue
            score = acc_prev[j] / len_prev[j]
            e = j + 1
            if score < best_score or (score == best_score and s == best_s and e > best_e):
                best_score = score
                best_s = s
                best_e = e
                best_acc = acc_prev[j]
                best_len = len_prev[j]
    return best_score, best_s, best_e, best_acc, best_len


def _as_cost(a: FeatureMatrix, b: FeatureMatrix, metric: str) -> np.ndarray:
    if a.frames.size == 0 or b.frames.size == 0:
        raise EmptyInput("empty feature matrix")
    if a.dim != b.dim:
        raise DimensionMismatch(f"dim {a.dim} vs {b.dim}")
    return np.ascontiguousarray(cost_matrix(a.frames, b.frames, metric))


def dtw_distance(a: FeatureMatrix, b: FeatureMatrix, params: DtwParams = DtwParams()) -> float:
    """Normalized full-alignment cost between two feature matrices."""
    cost = _as_cost(a, b, params.distance)
    band = params.band_width or 0
    acc, plen = _accumulate(cost, band)
    if not np.isfinite(acc):
        return float("inf")  # band disconnected the grid
    return float(acc / plen)


def subsequence_search(
    query: FeatureMatrix, utterance: FeatureMatrix, params: DtwParams = DtwParams()
) -> DtwMatch:
    """Best-matching utterance span for the query (open begin and end).

    A query longer than the utterance is fine: the span may warp the whole
    utterance onto the query.
    """
    cost = _as_cost(query, utterance, params.distance)
    band = params.band_width or 0
    score, s, e, _, _ = _subsequence_scan(cost, band)
    return DtwMatch(
        query_id=query.utterance_id,
        utterance_id=utterance.utterance_id,
        start_frame=int(s),
        end_frame=int(e) if np.isfinite(score) else int(s),
        score=float(score),
    )


def rank_candidates(
    query: FeatureMatrix,
    collection: Sequence[FeatureMatrix],
    params: DtwParams = DtwParams(),
    matches: Optional[Sequence[DtwMatch]] = None,
) -> list[DtwMatch]:
    """Top n_best matches over the collection, one candidate per utterance.

    Sorted ascending by score, ties by (utterance_id, start_frame). Accepts
    precomputed per-utterance matches so callers may parallelize the searches.
    """
    if matches is None:
        if not collection:
            raise EmptyCollection("no utterances to search")
        matches = [subsequence_search(query, utt, params) for utt in collection]
    elif not matches:
        raise EmptyCollection("no utterances to search")
    candidates = list(matches)
    if params.max_score is not None:
        candidates = [m for m in candidates if m.score <= params.max_score]
    candidates.sort(key=lambda m: (m.score, m.utterance_id, m.start_frame))
    return candidates[: params.n_best]
