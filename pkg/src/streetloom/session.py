"""Autoregressive generation sessions over retrieval plans.

A session walks a retrieval plan chunk by chunk: each step assembles a
ConditionPackage (first image, relative poses, geospatial crops), hands
it to a pluggable generator backend, then carries the segment's last
frame and the chunk's last pose into the next step. Steps are strictly
sequential per session; a failed or canceled backend call leaves the
state exactly as it was, so the step can be retried.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (BackendFailure, DegenerateInput, FrameCountMismatch,
                     SessionStateError)
from .geodesy import SE3Pose, ecef_heading_deg, pose_distance, to_relative_poses
from .pano_index import PanoramaStore, SpatialIndex, TrajectorySegment
from .planner import (PlannerParams, PlanStep, RetrievalPlan, UserPath,
                      chunk_plan, plan_condition_path)
from .projection import (AugmentationParams, CONDITION_LENGTHS,
                         crop_perspective, validate_image)

DEFAULT_CHUNK_LEN = 73


@dataclass(frozen=True)
class ConditionPackage:
    """Everything one generation call conditions on."""

    first_image: np.ndarray
    relative_poses: tuple[SE3Pose, ...]
    geo_frames: tuple[np.ndarray, ...]
    seed: int
    chunk_index: int
    drop_pose: bool = False  # always false at inference
    drop_geo: bool = False

    def __post_init__(self):
        validate_image(self.first_image)
        if not self.relative_poses:
            raise DegenerateInput("package needs at least one pose")
        if not self.relative_poses[0].is_identity():
            raise DegenerateInput("relative pose head must be identity")
        n_geo = len(self.geo_frames)
        # Trained lengths are the admissible set; a short final chunk is
        # also fine as long as frames and poses agree one-to-one.
        if n_geo not in CONDITION_LENGTHS and n_geo != len(self.relative_poses):
            raise DegenerateInput(
                f"geo frame count {n_geo} neither an admissible condition "
                f"length nor equal to the pose count")


@dataclass(frozen=True)
class BackendCapability:
    backend_id: str
    max_frames: int


class GeneratorBackend:
    """Interface: generate exactly one frame per pose in the package."""

    def capability(self) -> BackendCapability:
        raise NotImplementedError

    def generate(self, package: ConditionPackage) -> list[np.ndarray]:
        raise NotImplementedError


class EchoBackend(GeneratorBackend):
    """Resamples the geo frames to the pose count by nearest index.

    Deterministic; with as many geo frames as poses it returns them
    unchanged, so condition crops pass through bit-exactly.
    """

    def capability(self) -> BackendCapability:
        return BackendCapability(backend_id="mock-echo", max_frames=81)

    def generate(self, package: ConditionPackage) -> list[np.ndarray]:
        n = len(package.relative_poses)
        m = len(package.geo_frames)
        if n == 1 or m == 1:
            return [package.geo_frames[0].copy() for _ in range(n)]
        idx = [round(i * (m - 1) / (n - 1)) for i in range(n)]
        return [package.geo_frames[j].copy() for j in idx]


class PoseStampBackend(GeneratorBackend):
    """Synthesizes frames that encode (frame index, relative pose) in pixels.

    The 13 float64 values [index, R row-major (9), t (3)] are serialized
    little-endian and stored one byte per pixel (value = byte/255) along
    the top row of the red channel. PNG quantization at 255 levels is
    lossless for these values, so the round trip is exact.
    """

    N_BYTES = 13 * 8

    def capability(self) -> BackendCapability:
        return BackendCapability(backend_id="mock-pose-stamp", max_frames=81)

    def generate(self, package: ConditionPackage) -> list[np.ndarray]:
        h, w = package.first_image.shape[0], package.first_image.shape[1]
        if w < self.N_BYTES:
            raise BackendFailure(f"frame width {w} cannot hold the stamp")
        frames = []
        for i, pose in enumerate(package.relative_poses):
            frames.append(stamp_pose_frame(i, pose, h, w))
        return frames


def stamp_pose_frame(index: int, pose: SE3Pose, h: int, w: int) -> np.ndarray:
    vals = np.concatenate([[float(index)],
                           pose.rotation.reshape(-1),
                           pose.translation])
    raw = np.frombuffer(vals.astype("<f8").tobytes(), dtype=np.uint8)
    frame = np.zeros((h, w, 3))
    frame[0, :raw.size, 0] = raw / 255.0
    return frame


def decode_pose_frame(frame: np.ndarray) -> tuple[int, SE3Pose]:
    n = PoseStampBackend.N_BYTES
    raw = np.round(frame[0, :n, 0] * 255.0).astype(np.uint8)
    vals = np.frombuffer(raw.tobytes(), dtype="<f8")
    rot = np.array(vals[1:10]).reshape(3, 3)
    return int(vals[0]), SE3Pose(rotation=rot, translation=np.array(vals[10:13]))


BACKENDS = {
    "mock-echo": EchoBackend,
    "mock-pose-stamp": PoseStampBackend,
}


@dataclass
class SessionState:
    session_id: str
    plan: RetrievalPlan
    chunks: list[tuple[PlanStep, ...]]
    yaw_deg: list[float]  # one per plan step, fixed at session start
    seed: int
    start_pose: SE3Pose  # first absolute pose of the first chunk
    current_pose: SE3Pose
    current_first_image: np.ndarray
    next_chunk: int = 0
    status: str = "active"  # active | complete | failed
    segments: list[list[np.ndarray]] = field(default_factory=list)
    backend_ids: list[str] = field(default_factory=list)
    backend_name: str = "mock-echo"

    @property
    def remaining_chunks(self) -> int:
        return len(self.chunks) - self.next_chunk

    def unique_frame_count(self) -> int:
        if not self.segments:
            return 0
        return sum(len(s) for s in self.segments) - (len(self.segments) - 1)


class SessionEngine:
    """Binds a corpus snapshot, an image source, and planner settings.

    ``image_source(record)`` must return the record's equirectangular
    panorama as an HxWx3 array in [0,1].
    """

    def __init__(self, store: PanoramaStore, index: SpatialIndex,
                 segments: list[TrajectorySegment], image_source,
                 planner_params: PlannerParams = PlannerParams(),
                 aug_params: AugmentationParams = AugmentationParams(),
                 chunk_len: int = DEFAULT_CHUNK_LEN):
        self.store = store
        self.index = index
        self.segments = segments
        self.image_source = image_source
        self.planner_params = planner_params
        self.aug_params = aug_params
        self.chunk_len = chunk_len

    def start_session(self, first_image: np.ndarray, path: UserPath,
                      seed: int = 0) -> SessionState:
        """Plan the path, chunk it, and open an active session."""
        validate_image(first_image)
        plan = plan_condition_path(self.store, self.index, self.segments,
                                   path, self.planner_params)
        chunks = chunk_plan(plan, self.chunk_len)
        positions = self.store.positions_of([s.pano_id for s in plan.steps])
        yaw = _plan_yaws(positions)
        start_pose = self.store.get(chunks[0][0].pano_id).pose
        session_id = _session_id(plan, seed)
        return SessionState(
            session_id=session_id,
            plan=plan,
            chunks=chunks,
            yaw_deg=yaw,
            seed=seed,
            start_pose=start_pose,
            current_pose=start_pose,
            current_first_image=np.array(first_image, dtype=np.float64),
        )

    def build_package(self, state: SessionState) -> ConditionPackage:
        if state.status != "active":
            raise SessionStateError(f"session is {state.status}")
        if state.next_chunk >= len(state.chunks):
            raise SessionStateError("no chunks remaining")
        k = state.next_chunk
        chunk = state.chunks[k]
        offset = k * (self.chunk_len - 1)
        poses = to_relative_poses(
            [self.store.get(st.pano_id).pose for st in chunk])
        geo = tuple(
            crop_perspective(self.image_source(self.store.get(st.pano_id)),
                             state.yaw_deg[offset + i], 0.0, self.aug_params)
            for i, st in enumerate(chunk))
        return ConditionPackage(
            first_image=state.current_first_image,
            relative_poses=tuple(poses),
            geo_frames=geo,
            seed=state.seed,
            chunk_index=k,
        )

    def step(self, state: SessionState, backend: GeneratorBackend,
             ) -> list[np.ndarray]:
        """Run one chunk through the backend and advance the session.

        State is mutated only after the backend returns a valid segment;
        a BackendFailure (or cancellation) leaves it untouched.
        """
        package = self.build_package(state)
        cap = backend.capability()
        if len(package.relative_poses) > cap.max_frames:
            raise BackendFailure(
                f"chunk of {len(package.relative_poses)} frames exceeds "
                f"backend limit {cap.max_frames}")
        frames = backend.generate(package)
        if len(frames) != len(package.relative_poses):
            raise FrameCountMismatch(
                f"backend returned {len(frames)} frames for "
                f"{len(package.relative_poses)} poses")
        for f in frames:
            validate_image(f)

        chunk = state.chunks[state.next_chunk]
        state.segments.append([np.array(f, dtype=np.float64) for f in frames])
        state.backend_ids.append(cap.backend_id)
        state.current_first_image = state.segments[-1][-1].copy()
        state.current_pose = self.store.get(chunk[-1].pano_id).pose
        state.next_chunk += 1
        if state.next_chunk == len(state.chunks):
            state.status = "complete"
        return state.segments[-1]

    def run(self, state: SessionState, backend: GeneratorBackend) -> SessionState:
        while state.status == "active":
            self.step(state, backend)
        return state


def loop_closure_error(state: SessionState) -> float:
    """Distance between the session's first and final absolute poses."""
    if state.status != "complete":
        raise SessionStateError("loop closure is defined on complete sessions")
    return pose_distance(state.start_pose, state.current_pose)


def _plan_yaws(positions: np.ndarray) -> list[float]:
    """Path-following viewing yaw per plan step (last repeats previous).

    Computed once over the whole plan so the shared boundary step gets
    the same yaw in both adjacent chunks, making the overlap crop
    bit-identical.
    """
    n = len(positions)
    if n == 1:
        return [0.0]
    yaws = []
    for i in range(n - 1):
        yaws.append(ecef_heading_deg(positions[i], positions[i + 1]))
    yaws.append(yaws[-1])
    return yaws


def _session_id(plan: RetrievalPlan, seed: int) -> str:
    # Content-derived so identical inputs name identical sessions.
    digest = hashlib.sha256()
    digest.update(str(seed).encode())
    for st in plan.steps:
        digest.update(st.pano_id.encode())
        digest.update(b"\x00")
    return digest.hexdigest()[:16]


def save_state(state: SessionState, session_dir) -> Path:
    """Persist a session so a restarted service can resume stepping.

    Frames and the working first image are stored as 8-bit rasters, so a
    resumed session continues from the quantized frame (the live process
    keeps full precision until then).
    """
    from .image_io import write_image

    session_dir = Path(session_dir)
    session_dir.mkdir(parents=True, exist_ok=True)
    for k, segment in enumerate(state.segments):
        chunk_dir = session_dir / f"chunk_{k:03d}"
        if chunk_dir.exists():
            continue
        chunk_dir.mkdir()
        for i, frame in enumerate(segment):
            write_image(chunk_dir / f"frame_{i:05d}.png", frame)
    write_image(session_dir / "first_image.png", state.current_first_image)
    payload = {
        "session_id": state.session_id,
        "seed": state.seed,
        "status": state.status,
        "next_chunk": state.next_chunk,
        "backend_ids": state.backend_ids,
        "backend_name": state.backend_name,
        "yaw_deg": [float(y) for y in state.yaw_deg],
        "chunk_len": len(state.chunks[0]) if state.chunks else 0,
        "plan": {
            "steps": [{
                "pano_id": s.pano_id,
                "segment_id": s.segment_id,
                "s": s.s,
                "lateral_m": s.lateral_m,
                "heading_mismatch_deg": s.heading_mismatch_deg,
            } for s in state.plan.steps],
            "switch_points": list(state.plan.switch_points),
            "total_cost": state.plan.total_cost,
            "path_length_m": state.plan.path_length_m,
        },
    }
    path = session_dir / "state.json"
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")
    return path


def load_state(session_dir, store: PanoramaStore,
               chunk_len: int = DEFAULT_CHUNK_LEN) -> SessionState:
    from .image_io import read_image

    session_dir = Path(session_dir)
    payload = json.loads((session_dir / "state.json").read_text(encoding="utf-8"))
    steps = tuple(PlanStep(**s) for s in payload["plan"]["steps"])
    plan = RetrievalPlan(
        steps=steps,
        switch_points=tuple(payload["plan"]["switch_points"]),
        total_cost=payload["plan"]["total_cost"],
        path_length_m=payload["plan"]["path_length_m"],
    )
    chunks = chunk_plan(plan, payload["chunk_len"] or chunk_len)
    segments = []
    for k in range(payload["next_chunk"]):
        chunk_dir = session_dir / f"chunk_{k:03d}"
        frames = [read_image(p) for p in sorted(chunk_dir.glob("frame_*.png"))]
        segments.append(frames)
    done = payload["next_chunk"]
    current = chunks[done - 1][-1] if done > 0 else chunks[0][0]
    return SessionState(
        session_id=payload["session_id"],
        plan=plan,
        chunks=chunks,
        yaw_deg=payload["yaw_deg"],
        seed=payload["seed"],
        start_pose=store.get(chunks[0][0].pano_id).pose,
        current_pose=store.get(current.pano_id).pose,
        current_first_image=read_image(session_dir / "first_image.png"),
        next_chunk=done,
        status=payload["status"],
        segments=segments,
        backend_ids=list(payload["backend_ids"]),
        backend_name=payload.get("backend_name", "mock-echo"),
    )


def export_session(state: SessionState, out_dir, store: PanoramaStore,
                   ) -> Path:
    """Write deduplicated frames and a deterministic session manifest.

    Frames are numbered across chunks with each chunk's first frame
    dropped after the initial chunk (it duplicates the previous chunk's
    last frame). Returns the manifest path.
    """
    from .image_io import write_image

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    frames_dir = out_dir / "frames"
    frames_dir.mkdir(exist_ok=True)

    pano_ids = [st.pano_id for st in state.plan.steps]
    boundaries = []
    frame_no = 0
    for k, segment in enumerate(state.segments):
        boundaries.append(frame_no if k == 0 else frame_no - 1)
        start = 0 if k == 0 else 1
        for f in segment[start:]:
            write_image(frames_dir / f"frame_{frame_no:05d}.png", f)
            frame_no += 1

    manifest = {
        "session_id": state.session_id,
        "seed": state.seed,
        "status": state.status,
        "backend_ids": state.backend_ids,
        "chunk_len": len(state.chunks[0]) if state.chunks else 0,
        "chunk_boundaries": boundaries,
        "frame_count": frame_no,
        "pano_ids": pano_ids,
        "yaw_deg": [float(y) for y in state.yaw_deg],
        "poses": [
            [float(v) for v in store.get(p).pose.matrix().reshape(-1)]
            for p in pano_ids
        ],
        "switch_points": list(state.plan.switch_points),
        "loop_closure_error_m": (loop_closure_error(state)
                                 if state.status == "complete" else None),
    }
    manifest_path = out_dir / "session.json"
    manifest_path.write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n",
        encoding="utf-8")
    return manifest_path
