"""Mining of spatially overlapping clip pairs for cross-time supervision.

A source window of ``window`` consecutive panoramas is matched against a
candidate segment by an optimal monotone assignment: each source frame is
assigned a candidate frame, assignment indices never decrease, and the
mean assigned distance is minimized. Windows whose optimal mean distance
is at most ``epsilon_m`` and whose closest matched frames are at least
``min_time_separation_s`` apart in capture time form a mined pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInput
from .pano_index import PanoramaStore, SpatialIndex, TrajectorySegment


@dataclass(frozen=True)
class PairMiningParams:
    window: int = 73
    window_stride: int = 16
    epsilon_m: float = 5.0
    min_time_separation_s: float = 3600.0


@dataclass(frozen=True)
class MinedPair:
    src_segment_id: str
    src_start: int  # frame index of the window within the source segment
    src_pano_ids: tuple[str, ...]
    cand_segment_id: str
    cand_indices: tuple[int, ...]  # monotone assignment into the candidate
    cand_span_ids: tuple[str, ...]  # contiguous candidate frames touched
    mean_dist_m: float
    time_gap_s: float

    @property
    def key(self) -> tuple[str, int, str]:
        return (self.src_segment_id, self.src_start, self.cand_segment_id)


def align_window(src: np.ndarray, cand: np.ndarray) -> tuple[float, np.ndarray]:
    """Optimal monotone assignment of src rows onto cand rows.

    Returns (mean distance, assignment) where assignment[i] is the cand
    row matched to src row i and assignment is non-decreasing. Runs in
    O(N*M) via prefix minima over the previous row. Ties break toward the
    smallest candidate index, so the result is deterministic.
    """
    src = np.asarray(src, dtype=np.float64)
    cand = np.asarray(cand, dtype=np.float64)
    if src.ndim != 2 or cand.ndim != 2 or src.shape[1] != cand.shape[1]:
        raise DegenerateInput("alignment inputs must be (N,d) and (M,d)")
    n, m = src.shape[0], cand.shape[0]
    if n == 0 or m == 0:
        raise DegenerateInput("alignment inputs must be non-empty")

    cost = np.linalg.norm(src[:, None, :] - cand[None, :, :], axis=2)

    dp = cost[0].copy()
    parents = np.zeros((n, m), dtype=np.int64)
    idx = np.arange(m)
    for i in range(1, n):
        pm_vals = np.minimum.accumulate(dp)
        # Earliest index attaining each running minimum: a position only
        # registers when it strictly improves on the prefix before it.
        shifted = np.concatenate(([np.inf], pm_vals[:-1]))
        pm_arg = np.maximum.accumulate(np.where(dp < shifted, idx, 0))
        parents[i] = pm_arg
        dp = cost[i] + pm_vals

    j = int(np.argmin(dp))
    total = float(dp[j])
    assignment = np.empty(n, dtype=np.int64)
    assignment[n - 1] = j
    for i in range(n - 1, 0, -1):
        j = int(parents[i][j])
        assignment[i - 1] = j
    return total / n, assignment


def window_starts(segment_len: int, params: PairMiningParams) -> list[int]:
    if segment_len < params.window:
        return []
    return list(range(0, segment_len - params.window + 1, params.window_stride))


def mine_pairs(store: PanoramaStore, segments: list[TrajectorySegment],
               params: PairMiningParams = PairMiningParams(),
               index: SpatialIndex | None = None) -> list[MinedPair]:
    """Mine all (source window, candidate segment) pairs in a corpus.

    Every segment acts as a source; every other segment is a candidate.
    The spatial index only prunes: a pair with mean distance <= epsilon
    necessarily has one matched frame within epsilon, so any candidate
    segment with no pano within epsilon of any window pano can be skipped
    without changing the result.
    """
    if index is None:
        index = store.build_index()
    seg_by_id = {s.segment_id: s for s in segments}
    seg_of_pano: dict[str, str] = {}
    for seg in segments:
        for pid in seg.pano_ids:
            seg_of_pano[pid] = seg.segment_id

    pos = {s.segment_id: store.positions_of(s.pano_ids) for s in segments}
    times = {
        s.segment_id: np.array([store.get(p).capture_time for p in s.pano_ids])
        for s in segments
    }

    pairs: list[MinedPair] = []
    for src_seg in segments:
        src_pos_all = pos[src_seg.segment_id]
        src_t_all = times[src_seg.segment_id]
        for start in window_starts(len(src_seg), params):
            end = start + params.window
            w_pos = src_pos_all[start:end]
            w_t = src_t_all[start:end]

            cand_ids: set[str] = set()
            for p in w_pos:
                for rec in index.query_radius(p, params.epsilon_m):
                    sid = seg_of_pano.get(rec.id)
                    if sid is not None and sid != src_seg.segment_id:
                        cand_ids.add(sid)

            for cand_id in sorted(cand_ids):
                cand_seg = seg_by_id[cand_id]
                mean_dist, assign = align_window(w_pos, pos[cand_id])
                if mean_dist > params.epsilon_m:
                    continue
                gap = float(np.min(np.abs(w_t - times[cand_id][assign])))
                if gap < params.min_time_separation_s:
                    continue
                lo, hi = int(assign[0]), int(assign[-1])
                pairs.append(MinedPair(
                    src_segment_id=src_seg.segment_id,
                    src_start=start,
                    src_pano_ids=tuple(src_seg.pano_ids[start:end]),
                    cand_segment_id=cand_id,
                    cand_indices=tuple(int(a) for a in assign),
                    cand_span_ids=tuple(cand_seg.pano_ids[lo:hi + 1]),
                    mean_dist_m=mean_dist,
                    time_gap_s=gap,
                ))
    pairs.sort(key=lambda p: p.key)
    return pairs
