"""HTTP gateway: corpus browsing, planning, sessions, and metrics.

Every response is either a declared success schema or a structured
error {code, message, detail}. The service holds an immutable index
snapshot; the only mutable state is the session store (an on-disk
directory), guarded by one lock per session so at most one step per
session is in flight.
"""

from __future__ import annotations

import hashlib
import io
import math
import threading
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from . import session as session_mod
from .errors import StreetloomError
from .geodesy import GeodeticCoord
from .metrics import fid_from_features, video_metrics
from .pano_index import PanoramaStore, SpatialIndex, TrajectorySegment
from .planner import PlannerParams, UserPath, plan_condition_path, validate_plan
from .projection import AugmentationParams, crop_perspective
from .session import (BACKENDS, SessionEngine, SessionState,
                      loop_closure_error, save_state, load_state)

API_VERSION = "1"

# HTTP status per error code; anything unlisted is a 500.
_STATUS_BY_CODE = {
    "bad_request": 400,
    "degenerate_input": 400,
    "parse_error": 400,
    "duplicate_record": 400,
    "degenerate_path": 400,
    "empty_trajectory": 400,
    "bad_aspect": 400,
    "pitch_out_of_range": 400,
    "incompatible_dims": 400,
    "condition_too_short": 400,
    "dim_mismatch": 400,
    "all_masked": 400,
    "too_small": 400,
    "frame_count_mismatch": 400,
    "no_coverage": 422,
    "not_found": 404,
    "session_busy": 409,
    "session_state": 409,
    "backend_failure": 502,
}


class ApiError(Exception):
    def __init__(self, code: str, message: str, detail=None):
        super().__init__(message)
        self.code = code
        self.message = message
        self.detail = detail


class PlanRequest(BaseModel):
    waypoints: list[list[float]] = Field(min_length=2)  # [lat, lon, alt]
    corridor_m: float | None = None
    gap_max_m: float | None = None


class SessionRequest(BaseModel):
    waypoints: list[list[float]] = Field(min_length=2)
    seed: int = 0
    backend: str = "mock-echo"
    corridor_m: float | None = None
    gap_max_m: float | None = None
    chunk_len: int | None = None


class MetricsRequest(BaseModel):
    gen: list | None = None
    gt: list | None = None
    masks: list | None = None
    features_real: list[list[float]] | None = None
    features_gen: list[list[float]] | None = None


def _ground_altitude(store: PanoramaStore, lat: float, lon: float) -> float:
    """Altitude of the capture horizontally nearest to (lat, lon).

    Map clients draw paths in lat/lon only; a fixed sea-level default
    would hold the whole path metres above or below the corpus and push
    every candidate outside the corridor. Nearest-capture altitude keeps
    2-D paths at street level even on sloping corpora.
    """
    records = store.records()
    if not records:
        return 0.0
    scale = math.cos(math.radians(lat))
    nearest = min(records, key=lambda r: (r.lat - lat) ** 2
                  + ((r.lon - lon) * scale) ** 2)
    return nearest.alt


def _path_from_waypoints(store: PanoramaStore,
                         waypoints: list[list[float]]) -> UserPath:
    coords = []
    for w in waypoints:
        if len(w) == 3:
            coords.append(GeodeticCoord(w[0], w[1], w[2]))
        elif len(w) == 2:
            coords.append(GeodeticCoord(
                w[0], w[1], _ground_altitude(store, w[0], w[1])))
        else:
            raise ApiError("bad_request", "waypoints must be [lat, lon, alt?]")
    return UserPath(waypoints=tuple(coords))


def _planner_params(base: PlannerParams, corridor_m, gap_max_m) -> PlannerParams:
    kwargs = {}
    if corridor_m is not None:
        kwargs["corridor_m"] = corridor_m
    if gap_max_m is not None:
        kwargs["gap_max_m"] = gap_max_m
    if not kwargs:
        return base
    from dataclasses import replace
    return replace(base, **kwargs)


def _plan_payload(store: PanoramaStore, plan, diagnostics) -> dict:
    return {
        "api_version": API_VERSION,
        "steps": [{
            "pano_id": s.pano_id,
            "segment_id": s.segment_id,
            "s": s.s,
            "lateral_m": s.lateral_m,
            "heading_mismatch_deg": s.heading_mismatch_deg,
            "lat": store.get(s.pano_id).lat,
            "lon": store.get(s.pano_id).lon,
        } for s in plan.steps],
        "switch_points": list(plan.switch_points),
        "total_cost": plan.total_cost,
        "path_length_m": plan.path_length_m,
        "diagnostics": {
            "max_gap_m": diagnostics.max_gap_m,
            "coverage_fraction": diagnostics.coverage_fraction,
            "switch_discontinuities_m": diagnostics.switch_discontinuities_m,
        },
    }


def _session_payload(store: PanoramaStore, state: SessionState) -> dict:
    chunk_len = len(state.chunks[0]) if state.chunks else 0
    boundaries = [k * (chunk_len - 1) for k in range(1, state.next_chunk)]
    return {
        "api_version": API_VERSION,
        "session_id": state.session_id,
        "status": state.status,
        "seed": state.seed,
        "chunk_len": chunk_len,
        "chunks_total": len(state.chunks),
        "chunks_done": state.next_chunk,
        "frame_count": state.unique_frame_count(),
        "chunk_boundaries": boundaries,
        "switch_points": list(state.plan.switch_points),
        "backend_ids": state.backend_ids,
        "backend_name": state.backend_name,
        "steps": [{
            "pano_id": s.pano_id,
            "segment_id": s.segment_id,
            "s": s.s,
            "lat": store.get(s.pano_id).lat,
            "lon": store.get(s.pano_id).lon,
        } for s in state.plan.steps],
        "loop_closure_error_m": (loop_closure_error(state)
                                 if state.status == "complete" else None),
    }


def _frame_digest(frame: np.ndarray) -> str:
    """Content fingerprint of a frame at the served 8-bit depth.

    Clients only ever see frames quantized to 8 bits (the PNG endpoint
    and on-disk persistence both quantize), so the digest is taken at
    that depth: equal digests mean the frames are bit-identical as far
    as any client can observe.
    """
    data = np.round(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8)
    return hashlib.sha256(data.tobytes()).hexdigest()


def _global_frame(state: SessionState, idx: int) -> np.ndarray:
    """Frame by deduped global index (chunk overlaps collapsed)."""
    if idx < 0:
        raise ApiError("not_found", f"frame {idx} out of range")
    pos = idx
    for k, segment in enumerate(state.segments):
        n = len(segment) if k == 0 else len(segment) - 1
        if pos < n:
            return segment[pos] if k == 0 else segment[pos + 1]
        pos -= n
    raise ApiError("not_found", f"frame {idx} out of range")


def create_app(store: PanoramaStore, index: SpatialIndex,
               segments: list[TrajectorySegment], image_source,
               session_dir, planner_params: PlannerParams = PlannerParams(),
               aug_params: AugmentationParams = AugmentationParams(),
               chunk_len: int = session_mod.DEFAULT_CHUNK_LEN) -> FastAPI:
    app = FastAPI(title="streetloom gateway")
    # The map console is a static page typically served from a different
    # origin than the gateway; the API is unauthenticated, so a blanket
    # allow is fine.
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["*"], allow_headers=["*"])
    session_dir = Path(session_dir)
    session_dir.mkdir(parents=True, exist_ok=True)

    sessions: dict[str, SessionState] = {}
    locks: dict[str, threading.Lock] = {}
    registry_lock = threading.Lock()

    @app.exception_handler(StreetloomError)
    async def domain_error(request: Request, exc: StreetloomError):
        status = _STATUS_BY_CODE.get(exc.code, 500)
        return JSONResponse(status_code=status, content={
            "code": exc.code, "message": exc.message, "detail": exc.detail})

    @app.exception_handler(ApiError)
    async def api_error(request: Request, exc: ApiError):
        status = _STATUS_BY_CODE.get(exc.code, 500)
        return JSONResponse(status_code=status, content={
            "code": exc.code, "message": exc.message, "detail": exc.detail})

    @app.exception_handler(RequestValidationError)
    async def invalid_body(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={
            "code": "bad_request", "message": "malformed request body",
            "detail": exc.errors()})

    def get_session(session_id: str) -> SessionState:
        with registry_lock:
            if session_id in sessions:
                return sessions[session_id]
        disk = session_dir / session_id
        if (disk / "state.json").exists():
            state = load_state(disk, store, chunk_len)
            with registry_lock:
                sessions.setdefault(session_id, state)
                locks.setdefault(session_id, threading.Lock())
                return sessions[session_id]
        raise ApiError("not_found", f"unknown session: {session_id}")

    @app.get("/captures")
    def captures(min_lat: float = -90.0, max_lat: float = 90.0,
                 min_lon: float = -180.0, max_lon: float = 180.0):
        found = [{
            "id": r.id, "lat": r.lat, "lon": r.lon,
            "trajectory_id": r.trajectory_id, "t": r.capture_time,
        } for r in store.records()
            if min_lat <= r.lat <= max_lat and min_lon <= r.lon <= max_lon]
        found.sort(key=lambda r: r["id"])
        return {"api_version": API_VERSION, "captures": found}

    @app.post("/plan")
    def plan(req: PlanRequest):
        path = _path_from_waypoints(store, req.waypoints)
        params = _planner_params(planner_params, req.corridor_m, req.gap_max_m)
        result = plan_condition_path(store, index, segments, path, params)
        diagnostics = validate_plan(result, store, params)
        return _plan_payload(store, result, diagnostics)

    @app.post("/sessions")
    def create_session(req: SessionRequest):
        if req.backend not in BACKENDS:
            raise ApiError("bad_request", f"unknown backend: {req.backend}",
                           detail={"known": sorted(BACKENDS)})
        path = _path_from_waypoints(store, req.waypoints)
        params = _planner_params(planner_params, req.corridor_m, req.gap_max_m)
        eng = SessionEngine(store, index, segments, image_source, params,
                            aug_params, req.chunk_len or chunk_len)
        # Default first image: the street-level crop at the plan's start,
        # looking along the path.
        plan = plan_condition_path(store, index, segments, path, params)
        start = plan.steps[0]
        positions = store.positions_of([s.pano_id for s in plan.steps[:2]])
        from .geodesy import ecef_heading_deg
        yaw0 = (ecef_heading_deg(positions[0], positions[1])
                if len(plan.steps) > 1 else 0.0)
        first_image = crop_perspective(image_source(store.get(start.pano_id)),
                                       yaw0, 0.0, aug_params)
        state = eng.start_session(first_image, path, req.seed)
        state.backend_name = req.backend
        with registry_lock:
            sessions[state.session_id] = state
            locks[state.session_id] = threading.Lock()
        save_state(state, session_dir / state.session_id)
        return _session_payload(store, state)

    @app.post("/sessions/{session_id}/step")
    def step_session(session_id: str):
        state = get_session(session_id)
        lock = locks[session_id]
        if not lock.acquire(blocking=False):
            raise ApiError("session_busy", "a step is already in flight")
        try:
            eng = SessionEngine(
                store, index, segments, image_source, planner_params,
                aug_params, len(state.chunks[0]) if state.chunks else chunk_len)
            backend = BACKENDS[state.backend_name]()
            previous_last = (state.segments[-1][-1].copy()
                             if state.segments else None)
            segment = eng.step(state, backend)
            # Compare at the persisted 8-bit depth: frames reloaded after a
            # restart are quantized, and a healthy resume must still read
            # as matching. Live chunks are bit-identical, which survives
            # the quantization unchanged.
            boundary_ok = (bool(np.array_equal(
                np.round(previous_last * 255.0),
                np.round(segment[0] * 255.0)))
                if previous_last is not None else None)
            save_state(state, session_dir / session_id)
            return {
                "api_version": API_VERSION,
                "session_id": session_id,
                "chunk_index": state.next_chunk - 1,
                "segment_frames": len(segment),
                "boundary_matches_previous": boundary_ok,
                # First/last frame fingerprints let a client verify
                # boundary equality itself: the previous step's
                # last_frame_digest must equal this step's
                # first_frame_digest. (The frames endpoint collapses the
                # duplicate, so the digests are the only way a client
                # can compare both copies.)
                "first_frame_digest": _frame_digest(segment[0]),
                "last_frame_digest": _frame_digest(segment[-1]),
                "status": state.status,
                "frame_count": state.unique_frame_count(),
                "loop_closure_error_m": (loop_closure_error(state)
                                         if state.status == "complete" else None),
            }
        finally:
            lock.release()

    @app.get("/sessions/{session_id}")
    def session_state(session_id: str):
        return _session_payload(store, get_session(session_id))

    @app.get("/sessions/{session_id}/frames/{frame_idx}")
    def session_frame(session_id: str, frame_idx: int):
        from PIL import Image

        state = get_session(session_id)
        frame = _global_frame(state, frame_idx)
        data = np.round(np.clip(frame, 0.0, 1.0) * 255.0).astype(np.uint8)
        buf = io.BytesIO()
        Image.fromarray(data).save(buf, format="PNG")
        return Response(content=buf.getvalue(), media_type="image/png")

    @app.post("/metrics")
    def metrics(req: MetricsRequest):
        out: dict = {"api_version": API_VERSION}
        if req.gen is not None or req.gt is not None:
            if req.gen is None or req.gt is None:
                raise ApiError("bad_request", "need both gen and gt frames")
            gen = [np.asarray(f, dtype=np.float64) for f in req.gen]
            gt = [np.asarray(f, dtype=np.float64) for f in req.gt]
            masks = ([np.asarray(m) for m in req.masks]
                     if req.masks is not None else None)
            report = video_metrics(gen, gt, masks)
            out.update({k: getattr(report, k)
                        for k in ("psnr", "ssim", "psnr_s", "ssim_s")})
            out["skipped_frames"] = list(report.skipped_frames)
        if req.features_real is not None or req.features_gen is not None:
            if req.features_real is None or req.features_gen is None:
                raise ApiError("bad_request", "need both feature sets")
            fid, regularized = fid_from_features(
                np.asarray(req.features_real), np.asarray(req.features_gen))
            out["fid"] = fid
            out["fid_regularized"] = regularized
        if len(out) == 1:
            raise ApiError("bad_request", "no metric inputs given")
        return out

    return app


def serve(app: FastAPI, host: str = "127.0.0.1", port: int = 8008) -> None:
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="warning")
