"""Panorama corpus store, trajectory grouping, and spatial queries.

The manifest format is JSON Lines: one self-describing record per line
with keys {id, lat, lon, alt, qw, qx, qy, qz, t, trajectory_id, city,
image_uri}. Rejected lines are echoed (with reasons) to a sidecar file.

Ingestion is single-writer; ``build_index`` snapshots the store into an
immutable :class:`SpatialIndex` that any number of threads may query.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateInput, DegeneratePath
from .geodesy import SE3Pose, geodetic_to_ecef_arrays

MANIFEST_FIELDS = ("id", "lat", "lon", "alt", "qw", "qx", "qy", "qz", "t",
                   "trajectory_id", "city", "image_uri")

DEFAULT_CELL_M = 64.0


@dataclass(frozen=True)
class PanoRecord:
    """One geo-registered panorama."""

    id: str
    pose: SE3Pose  # body-to-ECEF
    lat: float
    lon: float
    alt: float
    capture_time: float  # unix seconds
    trajectory_id: str
    city: str
    image_uri: str

    @property
    def position(self) -> np.ndarray:
        return self.pose.translation


@dataclass(frozen=True)
class TrajectorySegment:
    """A contiguous, time-ordered run of panoramas from one trajectory."""

    segment_id: str
    trajectory_id: str
    pano_ids: tuple[str, ...]
    mean_spacing_m: float
    start_time: float
    end_time: float

    def __len__(self) -> int:
        return len(self.pano_ids)


@dataclass
class IngestReport:
    accepted: int = 0
    rejected: int = 0
    rejects: list[tuple[int, str]] = field(default_factory=list)  # (line_no, reason)

    def to_text(self) -> str:
        lines = [f"accepted={self.accepted}", f"rejected={self.rejected}"]
        lines.extend(f"line {n}: {reason}" for n, reason in self.rejects)
        return "\n".join(lines) + "\n"


def record_from_row(obj: dict) -> PanoRecord:
    """Validate one manifest row and build its record."""
    if not isinstance(obj, dict):
        raise DegenerateInput("record is not an object")
    missing = [k for k in MANIFEST_FIELDS if k not in obj]
    if missing:
        raise DegenerateInput(f"missing fields: {', '.join(missing)}")
    try:
        lat = float(obj["lat"])
        lon = float(obj["lon"])
        alt = float(obj["alt"])
        q = [float(obj[k]) for k in ("qw", "qx", "qy", "qz")]
        t = float(obj["t"])
    except (TypeError, ValueError):
        raise DegenerateInput("non-numeric pose or timestamp field")
    if not (-90.0 <= lat <= 90.0):
        raise DegenerateInput(f"lat out of range: {lat}")
    if not (-180.0 <= lon < 180.0):
        raise DegenerateInput(f"lon out of range: {lon}")
    if not math.isfinite(alt):
        raise DegenerateInput("alt not finite")
    if t <= 0:
        raise DegenerateInput(f"capture time must be positive: {t}")
    x, y, z = geodetic_to_ecef_arrays(lat, lon, alt)
    pose = SE3Pose.from_quaternion(q[0], q[1], q[2], q[3],
                                   (float(x), float(y), float(z)))
    return PanoRecord(
        id=str(obj["id"]),
        pose=pose,
        lat=lat,
        lon=lon,
        alt=alt,
        capture_time=t,
        trajectory_id=str(obj["trajectory_id"]),
        city=str(obj["city"]),
        image_uri=str(obj["image_uri"]),
    )


def _parse_manifest_line(line: str) -> PanoRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as e:
        raise DegenerateInput(f"invalid json: {e.msg}")
    return record_from_row(obj)


class PanoramaStore:
    """In-memory corpus of panorama records, keyed by id."""

    def __init__(self):
        self._records: dict[str, PanoRecord] = {}

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, pano_id: str) -> bool:
        return pano_id in self._records

    def get(self, pano_id: str) -> PanoRecord:
        return self._records[pano_id]

    def records(self) -> list[PanoRecord]:
        return list(self._records.values())

    def positions_of(self, pano_ids) -> np.ndarray:
        return np.array([self._records[i].position for i in pano_ids])

    def add(self, record: PanoRecord) -> None:
        # Corpora are append-only; a duplicate id is a pipeline bug.
        if record.id in self._records:
            raise DegenerateInput(f"duplicate id: {record.id}")
        self._records[record.id] = record

    def ingest_manifest(self, path, sidecar_path=None) -> IngestReport:
        """Load a JSONL manifest. Malformed lines are rejected, not fatal.

        Rejected lines are echoed with reasons to ``sidecar_path`` when
        given (defaults to ``<path>.rejects``); the report is deterministic
        for a given manifest.
        """
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(str(path))
        sidecar = Path(sidecar_path) if sidecar_path else path.with_suffix(
            path.suffix + ".rejects")
        report = IngestReport()
        echoed: list[str] = []
        with path.open("r", encoding="utf-8") as fh:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line:
                    continue
                try:
                    record = _parse_manifest_line(line)
                    self.add(record)
                except DegenerateInput as e:
                    report.rejected += 1
                    report.rejects.append((line_no, e.message))
                    echoed.append(f"# line {line_no}: {e.message}\n{line}\n")
                else:
                    report.accepted += 1
        if echoed:
            sidecar.write_text("".join(echoed), encoding="utf-8")
        return report

    def group_trajectories(self, max_gap_m: float,
                           target_spacing_m: float | None = None,
                           ) -> list[TrajectorySegment]:
        """Split each trajectory into contiguous segments.

        Records of a trajectory are ordered by capture time; a split is
        forced wherever consecutive spacing exceeds ``max_gap_m`` or the
        timestamps fail to increase. With ``target_spacing_m`` set, frames
        are greedily dropped (never interpolated) so kept spacing is at
        least the target.
        """
        by_traj: dict[str, list[PanoRecord]] = {}
        for rec in self._records.values():
            by_traj.setdefault(rec.trajectory_id, []).append(rec)

        segments: list[TrajectorySegment] = []
        for traj_id in sorted(by_traj):
            recs = sorted(by_traj[traj_id], key=lambda r: (r.capture_time, r.id))
            runs: list[list[PanoRecord]] = [[recs[0]]]
            for prev, cur in zip(recs, recs[1:]):
                gap = float(np.linalg.norm(cur.position - prev.position))
                if gap > max_gap_m or cur.capture_time <= prev.capture_time:
                    runs.append([cur])
                else:
                    runs[-1].append(cur)
            for k, run in enumerate(runs):
                if target_spacing_m is not None:
                    run = _greedy_resample(run, target_spacing_m)
                spacings = [
                    float(np.linalg.norm(b.position - a.position))
                    for a, b in zip(run, run[1:])
                ]
                segments.append(TrajectorySegment(
                    segment_id=f"{traj_id}:{k}",
                    trajectory_id=traj_id,
                    pano_ids=tuple(r.id for r in run),
                    mean_spacing_m=float(np.mean(spacings)) if spacings else 0.0,
                    start_time=run[0].capture_time,
                    end_time=run[-1].capture_time,
                ))
        return segments

    def build_index(self, cell_m: float = DEFAULT_CELL_M) -> "SpatialIndex":
        return SpatialIndex(self.records(), cell_m=cell_m)


def _greedy_resample(run: list[PanoRecord], target_spacing_m: float) -> list[PanoRecord]:
    """Keep the first frame, then every frame >= target away from the last kept."""
    if len(run) <= 1:
        return list(run)
    kept = [run[0]]
    for rec in run[1:]:
        if float(np.linalg.norm(rec.position - kept[-1].position)) >= target_spacing_m:
            kept.append(rec)
    return kept


@dataclass(frozen=True)
class CorridorHit:
    """A record projected onto a query polyline."""

    record: PanoRecord
    s: float  # arc length of the projection, meters
    lateral_m: float
    seg_index: int  # polyline segment the projection landed on


class SpatialIndex:
    """Immutable uniform-grid index over ECEF positions.

    Cell size only affects speed; query results are exact (set-equal to a
    linear scan) because candidates are distance-filtered.
    """

    def __init__(self, records: list[PanoRecord], cell_m: float = DEFAULT_CELL_M):
        self._records = list(records)
        self._cell = float(cell_m)
        self._positions = (np.array([r.position for r in self._records])
                           if self._records else np.zeros((0, 3)))
        self._cells: dict[tuple[int, int, int], list[int]] = {}
        for i, pos in enumerate(self._positions):
            self._cells.setdefault(self._cell_of(pos), []).append(i)

    def __len__(self) -> int:
        return len(self._records)

    def _cell_of(self, p) -> tuple[int, int, int]:
        return (int(math.floor(p[0] / self._cell)),
                int(math.floor(p[1] / self._cell)),
                int(math.floor(p[2] / self._cell)))

    def _candidates_in_box(self, lo, hi) -> list[int]:
        lo_c = self._cell_of(lo)
        hi_c = self._cell_of(hi)
        out: list[int] = []
        for ix in range(lo_c[0], hi_c[0] + 1):
            for iy in range(lo_c[1], hi_c[1] + 1):
                for iz in range(lo_c[2], hi_c[2] + 1):
                    out.extend(self._cells.get((ix, iy, iz), ()))
        return out

    def query_radius(self, center, r: float) -> list[PanoRecord]:
        """All records within ``r`` meters of ``center`` (inclusive)."""
        if not self._records:
            return []
        center = np.asarray(center, dtype=np.float64)
        idx = self._candidates_in_box(center - r, center + r)
        if not idx:
            return []
        idx = np.array(sorted(idx))
        d = np.linalg.norm(self._positions[idx] - center, axis=1)
        return [self._records[i] for i in idx[d <= r]]

    def query_corridor(self, polyline, width: float) -> list[CorridorHit]:
        """All records within ``width`` of the polyline, ordered by arc length.

        Every (record, polyline segment) projection within ``width`` yields
        its own hit: a record near a shared vertex appears once per incident
        segment (same s, different tangent), and callers that care about
        direction pick among them. Hits are sorted by (s, record id,
        segment index) so results are deterministic.
        """
        pts = np.asarray(polyline, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 3:
            raise DegeneratePath("polyline needs at least 2 vertices")
        seg_vec = pts[1:] - pts[:-1]
        seg_len = np.linalg.norm(seg_vec, axis=1)
        if float(seg_len.sum()) <= 0.0:
            raise DegeneratePath("polyline has zero length")
        cum = np.concatenate([[0.0], np.cumsum(seg_len)])

        if not self._records:
            return []
        # Candidate set: all records whose position falls inside the union
        # of inflated per-segment bounding boxes. Superset of the truth.
        cand: set[int] = set()
        for a, b in zip(pts[:-1], pts[1:]):
            lo = np.minimum(a, b) - width
            hi = np.maximum(a, b) + width
            cand.update(self._candidates_in_box(lo, hi))

        hits: list[CorridorHit] = []
        for i in sorted(cand):
            rec = self._records[i]
            p = self._positions[i]
            for k in range(len(seg_vec)):
                if seg_len[k] == 0.0:
                    continue
                t = float(np.dot(p - pts[k], seg_vec[k]) / (seg_len[k] ** 2))
                t = min(1.0, max(0.0, t))
                proj = pts[k] + t * seg_vec[k]
                d = float(np.linalg.norm(p - proj))
                if d <= width:
                    hits.append(CorridorHit(
                        record=rec, s=float(cum[k] + t * seg_len[k]),
                        lateral_m=d, seg_index=k))
        hits.sort(key=lambda h: (h.s, h.record.id, h.seg_index))
        return hits


def write_manifest(records: list[dict], path) -> None:
    """Write manifest rows (dicts with MANIFEST_FIELDS keys) as JSON Lines."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for row in records:
            fh.write(json.dumps(row, sort_keys=True) + "\n")
