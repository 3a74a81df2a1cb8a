"""Conditioning-path planning over indexed captures.

Given a user path, assemble an ordered sequence of panoramas drawn from
trajectory segments near the path, switching segments only where needed,
so the sequence can condition autoregressive generation. Planning is a
pure function of an immutable index snapshot.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, DegeneratePath, NoCoverage
from .geodesy import (GeodeticCoord, ecef_heading_deg, geodetic_to_ecef,
                      heading_mismatch_deg, pose_distance)
from .pano_index import PanoramaStore, SpatialIndex, TrajectorySegment

HEADING_WEIGHT_PER_DEG = 0.05

# Hits of one pano on two polyline legs that meet at a vertex land at the
# same arc length up to coordinate round-off (~1e-9 m); cluster well above
# that noise and far below any plausible capture spacing.
VERTEX_CLUSTER_TOL_M = 1e-6


@dataclass(frozen=True)
class UserPath:
    """Ordered waypoints; consecutive waypoints must be distinct."""

    waypoints: tuple[GeodeticCoord, ...]

    def __post_init__(self):
        if len(self.waypoints) < 2:
            raise DegeneratePath("need at least 2 waypoints")
        pts = self.ecef()
        if np.any(np.linalg.norm(pts[1:] - pts[:-1], axis=1) == 0.0):
            raise DegeneratePath("consecutive waypoints must be distinct")

    def ecef(self) -> np.ndarray:
        return np.array([geodetic_to_ecef(w) for w in self.waypoints])

    def total_length_m(self) -> float:
        pts = self.ecef()
        return float(np.linalg.norm(pts[1:] - pts[:-1], axis=1).sum())


@dataclass(frozen=True)
class PlannerParams:
    corridor_m: float = 10.0
    heading_tol_deg: float = 45.0
    min_run: int = 8
    switch_penalty: float = 25.0
    gap_max_m: float = 8.0
    heading_weight: float = HEADING_WEIGHT_PER_DEG

    def __post_init__(self):
        for name in ("corridor_m", "heading_tol_deg", "switch_penalty",
                     "gap_max_m", "heading_weight"):
            if getattr(self, name) <= 0:
                raise DegenerateInput(f"{name} must be positive")
        if self.min_run < 1:
            raise DegenerateInput("min_run must be positive")


@dataclass(frozen=True)
class Candidate:
    """One pano admitted to the corridor, projected onto the path."""

    pano_id: str
    segment_id: str
    s: float
    lateral_m: float
    heading_mismatch_deg: float


@dataclass(frozen=True)
class PlanStep:
    pano_id: str
    segment_id: str
    s: float
    lateral_m: float
    heading_mismatch_deg: float


@dataclass(frozen=True)
class RetrievalPlan:
    steps: tuple[PlanStep, ...]
    switch_points: tuple[int, ...]  # step indices where segment_id changes
    total_cost: float
    path_length_m: float

    def __len__(self) -> int:
        return len(self.steps)


@dataclass
class PlanDiagnostics:
    max_gap_m: float
    coverage_fraction: float
    switch_discontinuities_m: list[float] = field(default_factory=list)


def _segment_headings(store: PanoramaStore, segments: list[TrajectorySegment],
                      ) -> dict[str, float]:
    """Travel heading per pano, from its segment's local direction.

    Camera rotations may face sideways; direction of travel is what the
    planner must match, so headings come from consecutive positions (the
    last frame reuses the previous heading; singletons get none).
    """
    headings: dict[str, float] = {}
    for seg in segments:
        pos = store.positions_of(seg.pano_ids)
        n = len(seg.pano_ids)
        if n < 2:
            continue
        prev = None
        for i, pid in enumerate(seg.pano_ids):
            if i < n - 1:
                h = ecef_heading_deg(pos[i], pos[i + 1])
            else:
                h = prev
            headings[pid] = h
            prev = h
    return headings


def corridor_candidates(store: PanoramaStore, index: SpatialIndex,
                        segments: list[TrajectorySegment], path: UserPath,
                        params: PlannerParams) -> list[Candidate]:
    """Corridor hits filtered by travel-heading tolerance, ordered by s.

    The path tangent at a hit is the direction of its polyline segment;
    a candidate whose travel heading mismatches the tangent by more than
    heading_tol_deg is excluded.
    """
    pts = path.ecef()
    seg_vec = pts[1:] - pts[:-1]
    tangents = [ecef_heading_deg(a, b) for a, b in zip(pts[:-1], pts[1:])]
    headings = _segment_headings(store, segments)
    seg_of_pano = {pid: s.segment_id for s in segments for pid in s.pano_ids}

    by_pano: dict[str, list] = {}
    for hit in index.query_corridor(pts, params.corridor_m):
        pid = hit.record.id
        if pid in headings and pid in seg_of_pano:
            by_pano.setdefault(pid, []).append(hit)

    out: list[Candidate] = []
    for pid, pano_hits in by_pano.items():
        pano_hits.sort(key=lambda h: (h.s, h.seg_index))
        # Hits at one arc length (shared polyline vertex) describe the same
        # place with different tangents; keep the best-aligned one.
        clusters: list[list] = []
        for h in pano_hits:
            if clusters and abs(h.s - clusters[-1][-1].s) < VERTEX_CLUSTER_TOL_M:
                clusters[-1].append(h)
            else:
                clusters.append([h])
        for cluster in clusters:
            best = min(cluster, key=lambda h: heading_mismatch_deg(
                headings[pid], tangents[h.seg_index]))
            mismatch = heading_mismatch_deg(headings[pid],
                                            tangents[best.seg_index])
            if mismatch > params.heading_tol_deg:
                continue
            out.append(Candidate(
                pano_id=pid,
                segment_id=seg_of_pano[pid],
                s=best.s,
                lateral_m=best.lateral_m,
                heading_mismatch_deg=mismatch,
            ))
    out.sort(key=lambda c: (c.s, c.segment_id, c.pano_id))
    return out


def _uncovered_intervals(cands: list[Candidate], length: float,
                         gap_max: float) -> list[list[float]]:
    """Arc-length intervals no feasible chain can bridge."""
    out: list[list[float]] = []
    ss = sorted(c.s for c in cands)
    if not ss:
        return [[0.0, length]]
    if ss[0] > gap_max:
        out.append([0.0, ss[0]])
    for a, b in zip(ss, ss[1:]):
        if b - a > gap_max:
            out.append([a, b])
    if length - ss[-1] > gap_max:
        out.append([ss[-1], length])
    return out


def _step_cost(c: Candidate, params: PlannerParams) -> float:
    return c.lateral_m + params.heading_weight * c.heading_mismatch_deg


def plan_condition_path(store: PanoramaStore, index: SpatialIndex,
                        segments: list[TrajectorySegment], path: UserPath,
                        params: PlannerParams = PlannerParams(),
                        ) -> RetrievalPlan:
    """Minimum-cost monotone chain of corridor candidates along the path.

    Feasibility: arc length strictly increases; every consecutive spacing
    is at most gap_max_m; the chain starts within gap_max_m of the path
    start and ends within gap_max_m of the path end; every run on one
    segment has at least min_run steps, except the final run. Cost is the
    sum of per-step (lateral + heading_weight * mismatch) plus
    switch_penalty per segment change. Solved exactly by DP over states
    (candidate, run length capped at min_run); ties break toward the
    earlier candidate in (s, segment_id, pano_id) order, so plans are
    deterministic.
    """
    if len(index) == 0:
        raise NoCoverage("index is empty", detail={"uncovered": []})
    length = path.total_length_m()
    cands = corridor_candidates(store, index, segments, path, params)
    uncovered = _uncovered_intervals(cands, length, params.gap_max_m)
    if uncovered:
        raise NoCoverage("path has arc-length intervals with no usable candidate",
                         detail={"uncovered": uncovered})

    n = len(cands)
    cap = params.min_run
    INF = float("inf")
    # dp[i][r-1]: min cost of a feasible prefix ending at candidate i whose
    # current run has length r (capped at min_run). parent[i][r-1] is the
    # (j, r_prev) achieving it.
    dp = np.full((n, cap), INF)
    parent: list[list[tuple[int, int] | None]] = [[None] * cap for _ in range(n)]
    s_arr = np.array([c.s for c in cands])
    costs = np.array([_step_cost(c, params) for c in cands])

    for i in range(n):
        if s_arr[i] <= params.gap_max_m:
            r = min(1, cap) - 1
            if costs[i] < dp[i][r]:
                dp[i][r] = costs[i]
                parent[i][r] = None

    for i in range(n):
        ci = cands[i]
        lo = np.searchsorted(s_arr, s_arr[i] - params.gap_max_m, side="left")
        for j in range(int(lo), i):
            if not (s_arr[j] < s_arr[i]):
                continue
            cj = cands[j]
            if cj.segment_id == ci.segment_id:
                for r in range(cap):
                    if dp[j][r] == INF:
                        continue
                    nr = min(r + 1, cap - 1)
                    val = dp[j][r] + costs[i]
                    if val < dp[i][nr]:
                        dp[i][nr] = val
                        parent[i][nr] = (j, r)
            else:
                # A switch is only legal once the previous run is complete.
                if dp[j][cap - 1] < INF:
                    val = dp[j][cap - 1] + params.switch_penalty + costs[i]
                    if val < dp[i][0]:
                        dp[i][0] = val
                        parent[i][0] = (j, cap - 1)

    # Terminal: within gap_max of the path end; the final run is exempt
    # from min_run, so any run length qualifies.
    best: tuple[float, int, int] | None = None
    for i in range(n):
        if length - s_arr[i] > params.gap_max_m:
            continue
        for r in range(cap):
            if dp[i][r] == INF:
                continue
            if best is None or dp[i][r] < best[0]:
                best = (float(dp[i][r]), i, r)
    if best is None:
        # Candidates exist everywhere but no chain satisfies the run and
        # spacing rules together; report the reachable frontier.
        reach = 0.0
        for i in range(n):
            if np.isfinite(dp[i]).any():
                reach = max(reach, float(s_arr[i]))
        raise NoCoverage("no feasible chain under run and spacing constraints",
                         detail={"uncovered": [[reach, length]]})

    total, i, r = best
    rev: list[int] = []
    state: tuple[int, int] | None = (i, r)
    while state is not None:
        rev.append(state[0])
        state = parent[state[0]][state[1]]
    order = rev[::-1]

    steps = tuple(PlanStep(
        pano_id=cands[k].pano_id,
        segment_id=cands[k].segment_id,
        s=float(cands[k].s),
        lateral_m=float(cands[k].lateral_m),
        heading_mismatch_deg=float(cands[k].heading_mismatch_deg),
    ) for k in order)
    switches = tuple(
        k for k in range(1, len(steps))
        if steps[k].segment_id != steps[k - 1].segment_id)
    return RetrievalPlan(steps=steps, switch_points=switches,
                         total_cost=float(total), path_length_m=length)


def validate_plan(plan: RetrievalPlan, store: PanoramaStore,
                  params: PlannerParams = PlannerParams()) -> PlanDiagnostics:
    """Gap, coverage, and per-switch discontinuity diagnostics."""
    steps = plan.steps
    if not steps:
        raise DegenerateInput("cannot validate an empty plan")
    gaps = [b.s - a.s for a, b in zip(steps, steps[1:])]
    max_gap = max(gaps) if gaps else 0.0

    # Each step covers a half-gap neighborhood; coverage is the clipped
    # union of those neighborhoods over the path length.
    half = params.gap_max_m / 2.0
    L = plan.path_length_m
    covered = 0.0
    prev_hi = 0.0
    for st in steps:
        lo = max(st.s - half, prev_hi, 0.0)
        hi = min(st.s + half, L)
        if hi > lo:
            covered += hi - lo
            prev_hi = hi
    coverage = covered / L if L > 0 else 0.0

    disc = [
        pose_distance(store.get(steps[k - 1].pano_id).pose,
                      store.get(steps[k].pano_id).pose)
        for k in plan.switch_points
    ]
    return PlanDiagnostics(max_gap_m=float(max_gap),
                           coverage_fraction=float(min(coverage, 1.0)),
                           switch_discontinuities_m=disc)


def chunk_plan(plan: RetrievalPlan, chunk_len: int = 73,
               ) -> list[tuple[PlanStep, ...]]:
    """Split plan steps into chunks sharing exactly one boundary step.

    Chunk k starts at step k*(chunk_len-1); the last chunk may be short.
    Concatenating chunks and dropping each chunk's first step after the
    initial chunk reproduces the plan.
    """
    if chunk_len < 2:
        raise DegenerateInput("chunk_len must be at least 2")
    steps = plan.steps
    if len(steps) <= chunk_len:
        return [steps]
    chunks = []
    start = 0
    while start < len(steps) - 1:
        chunks.append(steps[start:start + chunk_len])
        start += chunk_len - 1
    return chunks


def serialize_plan(plan: RetrievalPlan) -> str:
    """Line-delimited steps: s, pano_id, segment_id, offset, mismatch."""
    lines = ["s\tpano_id\tsegment_id\tlateral_m\theading_mismatch_deg"]
    for st in plan.steps:
        lines.append(f"{st.s:.6f}\t{st.pano_id}\t{st.segment_id}"
                     f"\t{st.lateral_m:.6f}\t{st.heading_mismatch_deg:.6f}")
    return "\n".join(lines) + "\n"
