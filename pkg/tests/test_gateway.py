"""HTTP gateway behavior: payloads, error mapping, concurrency, resume."""

import hashlib
import io
import threading
import time

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from streetloom import synthetic as syn
from streetloom.pano_index import PanoramaStore
from streetloom.planner import PlannerParams
from streetloom.projection import AugmentationParams
from streetloom.server import create_app
from streetloom.session import BACKENDS, BackendCapability, EchoBackend

SMALL_AUG = AugmentationParams(out_w=120, out_h=64)


def _waypoints(path):
    return [[w.lat, w.lon, w.alt] for w in path.waypoints]


def _make_client(rows, path, params, tmp, chunk_len=73):
    store = syn.build_store(rows)
    segments = store.group_trajectories(max_gap_m=8.0)
    index = store.build_index()
    app = create_app(store, index, segments, syn.pano_source(64), tmp,
                     planner_params=params, aug_params=SMALL_AUG,
                     chunk_len=chunk_len)
    return TestClient(app), _waypoints(path)


@pytest.fixture(scope="module")
def ring_client(tmp_path_factory):
    return _make_client(
        syn.ring_rows(), syn.ring_path(),
        PlannerParams(corridor_m=2.0, gap_max_m=1.2),
        tmp_path_factory.mktemp("ring-sessions"))


@pytest.fixture(scope="module")
def junction_client(tmp_path_factory):
    return _make_client(
        syn.junction_rows(), syn.junction_path(), PlannerParams(),
        tmp_path_factory.mktemp("junction-sessions"))


class TestCaptures:
    def test_bbox_filter_and_order(self, ring_client):
        client, _ = ring_client
        r = client.get("/captures")
        assert r.status_code == 200
        caps = r.json()["captures"]
        assert len(caps) == 145
        assert [c["id"] for c in caps] == sorted(c["id"] for c in caps)

        lats = [c["lat"] for c in caps]
        mid = (min(lats) + max(lats)) / 2.0
        r = client.get("/captures", params={"max_lat": mid})
        subset = r.json()["captures"]
        assert 0 < len(subset) < 145
        assert all(c["lat"] <= mid for c in subset)

    def test_cross_origin_allowed(self, ring_client):
        # The console is served from a different origin than the gateway.
        client, _ = ring_client
        r = client.get("/captures", headers={"Origin": "http://example.test"})
        assert r.headers["access-control-allow-origin"] == "*"


class TestPlanEndpoint:
    def test_ring_plan_payload(self, ring_client):
        client, waypoints = ring_client
        r = client.post("/plan", json={"waypoints": waypoints})
        assert r.status_code == 200
        body = r.json()
        assert len(body["steps"]) == 145
        assert body["switch_points"] == []
        assert body["diagnostics"]["max_gap_m"] <= 1.2
        step = body["steps"][0]
        assert {"pano_id", "segment_id", "s", "lat", "lon"} <= set(step)

    def test_junction_plan_has_one_stitch(self, junction_client):
        client, waypoints = junction_client
        r = client.post("/plan", json={"waypoints": waypoints})
        assert r.status_code == 200
        body = r.json()
        assert len(body["switch_points"]) == 1
        k = body["switch_points"][0]
        assert body["steps"][k]["segment_id"] != \
            body["steps"][k - 1]["segment_id"]

    def test_parameter_override(self, junction_client):
        client, waypoints = junction_client
        r = client.post("/plan", json={"waypoints": waypoints,
                                       "gap_max_m": 3.0})
        assert r.status_code == 200
        s = [st["s"] for st in r.json()["steps"]]
        assert max(np.diff(s)) <= 3.0

    def test_two_element_waypoints_plan_at_street_level(self, junction_client):
        # Map clients submit [lat, lon] only; the gateway must fill in
        # ground level from the corpus (which sits well above alt 0)
        # rather than planning metres below every capture.
        client, waypoints = junction_client
        flat = [[lat, lon] for lat, lon, _ in waypoints]
        r = client.post("/plan", json={"waypoints": flat})
        assert r.status_code == 200
        full = client.post("/plan", json={"waypoints": waypoints}).json()
        body = r.json()
        assert [s["pano_id"] for s in body["steps"]] == \
            [s["pano_id"] for s in full["steps"]]
        assert body["switch_points"] == full["switch_points"]

    def test_one_waypoint_rejected(self, ring_client):
        client, waypoints = ring_client
        r = client.post("/plan", json={"waypoints": waypoints[:1]})
        assert r.status_code == 400
        assert r.json()["code"] == "bad_request"

    def test_identical_waypoints_rejected(self, ring_client):
        client, waypoints = ring_client
        r = client.post("/plan", json={"waypoints": [waypoints[0]] * 2})
        assert r.status_code == 400
        assert r.json()["code"] == "degenerate_path"

    def test_malformed_waypoint_rejected(self, ring_client):
        client, _ = ring_client
        r = client.post("/plan", json={"waypoints": [[1, 2, 3, 4], [5, 6]]})
        assert r.status_code == 400
        assert r.json()["code"] == "bad_request"

    def test_uncovered_path_maps_to_422(self, ring_client):
        client, _ = ring_client
        away = syn.path_from_en([(5000.0, 0.0), (5100.0, 0.0)])
        r = client.post("/plan", json={"waypoints": _waypoints(away)})
        assert r.status_code == 422
        body = r.json()
        assert body["code"] == "no_coverage"
        assert body["detail"]["uncovered"]


class TestSessionEndpoints:
    def test_lifecycle(self, ring_client):
        client, waypoints = ring_client
        r = client.post("/sessions", json={"waypoints": waypoints, "seed": 1})
        assert r.status_code == 200
        body = r.json()
        sid = body["session_id"]
        assert body["status"] == "active"
        assert body["chunks_total"] == 2
        assert body["chunks_done"] == 0
        assert body["frame_count"] == 0

        r = client.post(f"/sessions/{sid}/step")
        assert r.status_code == 200
        body = r.json()
        assert body["chunk_index"] == 0
        assert body["segment_frames"] == 73
        assert body["boundary_matches_previous"] is None
        assert body["status"] == "active"

        r = client.post(f"/sessions/{sid}/step")
        body = r.json()
        assert body["boundary_matches_previous"] is True
        assert body["status"] == "complete"
        assert body["frame_count"] == 145
        assert body["loop_closure_error_m"] == 0.0

        r = client.get(f"/sessions/{sid}")
        body = r.json()
        assert body["chunks_done"] == 2
        assert body["chunk_boundaries"] == [72]
        assert body["loop_closure_error_m"] == 0.0

        r = client.post(f"/sessions/{sid}/step")
        assert r.status_code == 409
        assert r.json()["code"] == "session_state"

    def test_frame_fetch(self, ring_client):
        client, waypoints = ring_client
        sid = client.post("/sessions", json={"waypoints": waypoints,
                                             "seed": 2}).json()["session_id"]
        client.post(f"/sessions/{sid}/step")
        r = client.get(f"/sessions/{sid}/frames/0")
        assert r.status_code == 200
        assert r.headers["content-type"] == "image/png"
        img = np.asarray(Image.open(io.BytesIO(r.content)))
        assert img.shape == (64, 120, 3)

        assert client.get(f"/sessions/{sid}/frames/73").status_code == 404
        assert client.get(f"/sessions/{sid}/frames/-1").status_code == 404

    def test_frames_dedup_across_chunks(self, ring_client):
        client, waypoints = ring_client
        sid = client.post("/sessions", json={"waypoints": waypoints,
                                             "seed": 3}).json()["session_id"]
        client.post(f"/sessions/{sid}/step")
        boundary_before = client.get(f"/sessions/{sid}/frames/72").content
        client.post(f"/sessions/{sid}/step")
        assert client.get(f"/sessions/{sid}/frames/72").content == \
            boundary_before

    def test_step_frame_digests_chain_across_chunks(self, ring_client):
        # A client holding only step responses can verify boundary
        # equality itself: chunk k's last digest == chunk k+1's first.
        client, waypoints = ring_client
        sid = client.post("/sessions", json={"waypoints": waypoints,
                                             "seed": 4}).json()["session_id"]
        first = client.post(f"/sessions/{sid}/step").json()
        second = client.post(f"/sessions/{sid}/step").json()
        assert len(first["first_frame_digest"]) == 64
        assert second["first_frame_digest"] == first["last_frame_digest"]
        assert second["last_frame_digest"] != second["first_frame_digest"]

        # Digests name the same bytes the frames endpoint serves.
        png = client.get(f"/sessions/{sid}/frames/72").content
        pixels = np.asarray(Image.open(io.BytesIO(png)))
        assert hashlib.sha256(pixels.tobytes()).hexdigest() == \
            first["last_frame_digest"]
        assert client.get(f"/sessions/{sid}/frames/144").status_code == 200
        assert client.get(f"/sessions/{sid}/frames/145").status_code == 404

    def test_unknown_session_404(self, ring_client):
        client, _ = ring_client
        assert client.get("/sessions/deadbeef").status_code == 404
        assert client.post("/sessions/deadbeef/step").status_code == 404

    def test_unknown_backend_rejected(self, ring_client):
        client, waypoints = ring_client
        r = client.post("/sessions", json={"waypoints": waypoints,
                                           "backend": "gpt"})
        assert r.status_code == 400
        assert "mock-echo" in r.json()["detail"]["known"]

    def test_pose_stamp_backend_selectable(self, ring_client):
        client, waypoints = ring_client
        r = client.post("/sessions", json={"waypoints": waypoints, "seed": 4,
                                           "backend": "mock-pose-stamp"})
        sid = r.json()["session_id"]
        assert r.json()["backend_name"] == "mock-pose-stamp"
        r = client.post(f"/sessions/{sid}/step")
        assert r.status_code == 200

    def test_concurrent_step_rejected_as_busy(self, ring_client):
        client, waypoints = ring_client

        class GluedEcho(EchoBackend):
            started = threading.Event()
            release = threading.Event()

            def capability(self):
                return BackendCapability(backend_id="glued-echo",
                                         max_frames=81)

            def generate(self, package):
                type(self).started.set()
                assert type(self).release.wait(timeout=10.0)
                return super().generate(package)

        BACKENDS["glued-echo"] = GluedEcho
        try:
            sid = client.post("/sessions", json={
                "waypoints": waypoints, "seed": 5,
                "backend": "glued-echo"}).json()["session_id"]
            results = {}

            def long_step():
                results["first"] = client.post(f"/sessions/{sid}/step")

            t = threading.Thread(target=long_step)
            t.start()
            assert GluedEcho.started.wait(timeout=10.0)
            blocked = client.post(f"/sessions/{sid}/step")
            assert blocked.status_code == 409
            assert blocked.json()["code"] == "session_busy"
            GluedEcho.release.set()
            t.join(timeout=10.0)
            assert results["first"].status_code == 200
        finally:
            del BACKENDS["glued-echo"]
            GluedEcho.release.set()

    def test_resume_from_disk(self, tmp_path):
        rows = syn.ring_rows()
        params = PlannerParams(corridor_m=2.0, gap_max_m=1.2)
        client1, waypoints = _make_client(rows, syn.ring_path(), params,
                                          tmp_path)
        sid = client1.post("/sessions", json={"waypoints": waypoints,
                                              "seed": 6}).json()["session_id"]
        client1.post(f"/sessions/{sid}/step")

        # A fresh service over the same session directory picks it up.
        client2, _ = _make_client(rows, syn.ring_path(), params, tmp_path)
        r = client2.get(f"/sessions/{sid}")
        assert r.status_code == 200
        assert r.json()["chunks_done"] == 1

        r = client2.post(f"/sessions/{sid}/step")
        assert r.status_code == 200
        body = r.json()
        assert body["status"] == "complete"
        assert body["boundary_matches_previous"] is True
        assert body["loop_closure_error_m"] == 0.0


class TestMetricsEndpoint:
    def test_image_metrics(self, ring_client):
        client, _ = ring_client
        rng = np.random.default_rng(0)
        gen = rng.random((2, 16, 16, 3)).tolist()
        r = client.post("/metrics", json={"gen": gen, "gt": gen})
        assert r.status_code == 200
        body = r.json()
        assert body["psnr"] == 99.0
        assert body["ssim"] == pytest.approx(1.0)
        assert body["psnr_s"] is None

    def test_feature_metrics(self, ring_client):
        client, _ = ring_client
        feats = np.random.default_rng(1).normal(size=(40, 4)).tolist()
        r = client.post("/metrics", json={"features_real": feats,
                                          "features_gen": feats})
        assert r.status_code == 200
        assert r.json()["fid"] == pytest.approx(0.0, abs=1e-6)
        assert r.json()["fid_regularized"] is False

    def test_masked_metrics(self, ring_client):
        client, _ = ring_client
        rng = np.random.default_rng(2)
        gen = rng.random((2, 16, 16, 3))
        masks = np.zeros((2, 16, 16), dtype=int)
        masks[1] = 1  # second frame fully dynamic -> skipped
        with pytest.warns(UserWarning, match="frame 1"):
            r = client.post("/metrics", json={
                "gen": gen.tolist(), "gt": gen.tolist(),
                "masks": masks.tolist()})
        assert r.status_code == 200
        assert r.json()["skipped_frames"] == [1]
        assert r.json()["psnr_s"] == 99.0

    def test_empty_request_rejected(self, ring_client):
        client, _ = ring_client
        assert client.post("/metrics", json={}).status_code == 400

    def test_partial_inputs_rejected(self, ring_client):
        client, _ = ring_client
        gen = np.zeros((1, 16, 16, 3)).tolist()
        r = client.post("/metrics", json={"gen": gen})
        assert r.status_code == 400
        feats = np.zeros((4, 2)).tolist()
        r = client.post("/metrics", json={"features_real": feats})
        assert r.status_code == 400

    def test_domain_error_mapped(self, ring_client):
        client, _ = ring_client
        gen = np.zeros((1, 16, 16, 3)).tolist()
        gt = np.zeros((1, 16, 18, 3)).tolist()
        r = client.post("/metrics", json={"gen": gen, "gt": gt})
        assert r.status_code == 400
        assert r.json()["code"] == "dim_mismatch"
