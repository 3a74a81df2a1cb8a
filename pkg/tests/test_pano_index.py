"""Corpus store, manifest ingestion, trajectory grouping, spatial queries."""

import json

import numpy as np
import pytest

from streetloom import synthetic as syn
from streetloom.errors import DegenerateInput, DegeneratePath
from streetloom.pano_index import (PanoramaStore, SpatialIndex,
                                   record_from_row, write_manifest)

from oracles import corridor_scan, radius_scan


def valid_row(**overrides) -> dict:
    row = {
        "id": "p-0", "lat": 37.0, "lon": -122.0, "alt": 10.0,
        "qw": 1.0, "qx": 0.0, "qy": 0.0, "qz": 0.0,
        "t": 1_700_000_000.0, "trajectory_id": "t0", "city": "x",
        "image_uri": "mem://p-0",
    }
    row.update(overrides)
    return row


def scatter_store(seed: int, n: int = 200, extent: float = 300.0):
    rng = np.random.default_rng(seed)
    xy = rng.uniform(0.0, extent, (n, 2))
    rows = syn.rows_for_trajectory("scatter", xy, syn.BASE_TIME)
    return syn.build_store(rows)


class TestRecordValidation:
    def test_valid_row_parses(self):
        rec = record_from_row(valid_row())
        assert rec.id == "p-0"
        assert rec.capture_time == 1_700_000_000.0
        assert rec.position.shape == (3,)

    @pytest.mark.parametrize("overrides", [
        {"lat": 90.5}, {"lat": -90.5}, {"lon": 180.0}, {"lon": -181.0},
        {"t": 0.0}, {"t": -1.0}, {"alt": float("inf")}, {"lat": "north"},
    ])
    def test_bad_values_rejected(self, overrides):
        with pytest.raises(DegenerateInput):
            record_from_row(valid_row(**overrides))

    def test_missing_field_rejected(self):
        row = valid_row()
        del row["qw"]
        with pytest.raises(DegenerateInput, match="qw"):
            record_from_row(row)


class TestIngest:
    def test_rejects_are_reported_not_fatal(self, tmp_path):
        manifest = tmp_path / "m.jsonl"
        rows = [valid_row(id="a"), valid_row(id="b", lat=95.0),
                valid_row(id="c")]
        with manifest.open("w") as fh:
            for row in rows:
                fh.write(json.dumps(row) + "\n")
            fh.write("this is not json\n")
        store = PanoramaStore()
        report = store.ingest_manifest(manifest)
        assert report.accepted == 2
        assert report.rejected == 2
        assert len(store) == 2
        sidecar = tmp_path / "m.jsonl.rejects"
        assert sidecar.exists()
        assert "lat out of range" in sidecar.read_text()

    def test_duplicate_id_rejected_on_ingest(self, tmp_path):
        manifest = tmp_path / "m.jsonl"
        write_manifest([valid_row(id="a"), valid_row(id="a")], manifest)
        store = PanoramaStore()
        report = store.ingest_manifest(manifest)
        assert report.accepted == 1
        assert report.rejected == 1

    def test_duplicate_add_raises(self):
        store = PanoramaStore()
        store.add(record_from_row(valid_row()))
        with pytest.raises(DegenerateInput, match="duplicate"):
            store.add(record_from_row(valid_row()))

    def test_missing_manifest_raises(self):
        with pytest.raises(FileNotFoundError):
            PanoramaStore().ingest_manifest("/does/not/exist.jsonl")

    def test_report_text_lists_line_numbers(self, tmp_path):
        manifest = tmp_path / "m.jsonl"
        write_manifest([valid_row(lat=99.0)], manifest)
        report = PanoramaStore().ingest_manifest(manifest)
        assert "line 1" in report.to_text()


class TestTrajectoryGrouping:
    def test_splits_on_spatial_gap(self):
        pos = [(0.0, 0.0), (2.0, 0.0), (4.0, 0.0), (40.0, 0.0), (42.0, 0.0)]
        store = syn.build_store(syn.rows_for_trajectory("t", pos, syn.BASE_TIME))
        segments = store.group_trajectories(max_gap_m=8.0)
        assert [len(s) for s in segments] == [3, 2]
        assert [s.segment_id for s in segments] == ["t:0", "t:1"]

    def test_splits_on_non_increasing_time(self):
        rows = syn.rows_for_trajectory(
            "t", [(0.0, 0.0), (2.0, 0.0), (4.0, 0.0)], syn.BASE_TIME)
        rows[2]["t"] = rows[0]["t"]  # time goes backwards mid-run
        store = syn.build_store(rows)
        segments = store.group_trajectories(max_gap_m=8.0)
        # Re-sorted by time, the stale frame leads; the run restarts there.
        assert sum(len(s) for s in segments) == 3
        assert len(segments) == 2

    def test_orders_by_capture_time(self):
        rows = syn.rows_for_trajectory(
            "t", [(0.0, 0.0), (2.0, 0.0), (4.0, 0.0)], syn.BASE_TIME)
        store = syn.build_store(rows[::-1])  # insertion order scrambled
        (seg,) = store.group_trajectories(max_gap_m=8.0)
        assert list(seg.pano_ids) == ["t-0000", "t-0001", "t-0002"]
        assert seg.start_time < seg.end_time

    def test_target_spacing_resamples(self):
        pos = [(float(x), 0.0) for x in range(0, 21)]  # 1 m spacing
        store = syn.build_store(syn.rows_for_trajectory("t", pos, syn.BASE_TIME))
        (seg,) = store.group_trajectories(max_gap_m=8.0, target_spacing_m=2.0)
        kept = store.positions_of(seg.pano_ids)
        spacing = np.linalg.norm(np.diff(kept, axis=0), axis=1)
        assert np.all(spacing >= 2.0 - 1e-9)
        assert seg.pano_ids[0] == "t-0000"

    def test_mean_spacing_recorded(self):
        pos = [(0.0, 0.0), (2.0, 0.0), (4.0, 0.0)]
        store = syn.build_store(syn.rows_for_trajectory("t", pos, syn.BASE_TIME))
        (seg,) = store.group_trajectories(max_gap_m=8.0)
        assert seg.mean_spacing_m == pytest.approx(2.0, abs=1e-6)


class TestRadiusQuery:
    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_matches_linear_scan(self, seed):
        store = scatter_store(seed)
        index = store.build_index()
        rng = np.random.default_rng(seed + 100)
        for _ in range(20):
            center = syn.en_to_ecef([rng.uniform(0, 300, 2)])[0]
            r = float(rng.uniform(5, 120))
            got = {rec.id for rec in index.query_radius(center, r)}
            assert got == radius_scan(store.records(), center, r)

    def test_boundary_is_inclusive(self):
        store = syn.build_store(syn.rows_for_trajectory(
            "t", [(0.0, 0.0), (5.0, 0.0)], syn.BASE_TIME))
        index = store.build_index()
        center = store.get("t-0000").position
        d = float(np.linalg.norm(store.get("t-0001").position - center))
        assert {r.id for r in index.query_radius(center, d + 1e-9)} == \
            {"t-0000", "t-0001"}
        assert {r.id for r in index.query_radius(center, d - 1e-6)} == \
            {"t-0000"}

    def test_cell_size_does_not_change_results(self):
        store = scatter_store(3)
        center = syn.en_to_ecef([(150.0, 150.0)])[0]
        results = []
        for cell in (16.0, 64.0, 256.0):
            index = store.build_index(cell_m=cell)
            results.append({r.id for r in index.query_radius(center, 80.0)})
        assert results[0] == results[1] == results[2]

    def test_empty_index(self):
        index = SpatialIndex([])
        assert index.query_radius([0.0, 0.0, 0.0], 100.0) == []


class TestCorridorQuery:
    def test_matches_projection_scan(self):
        store = scatter_store(4)
        index = store.build_index()
        pts = syn.en_to_ecef([(0.0, 0.0), (150.0, 10.0), (300.0, 0.0)])
        hits = index.query_corridor(pts, 25.0)
        got = {(h.record.id, h.seg_index) for h in hits}
        assert got == corridor_scan(store.records(), pts, 25.0)

    def test_hits_sorted_and_s_in_range(self):
        store = scatter_store(5)
        index = store.build_index()
        pts = syn.en_to_ecef([(0.0, 0.0), (300.0, 0.0)])
        hits = index.query_corridor(pts, 40.0)
        keys = [(h.s, h.record.id, h.seg_index) for h in hits]
        assert keys == sorted(keys)
        length = float(np.linalg.norm(pts[1] - pts[0]))
        assert all(0.0 <= h.s <= length + 1e-9 for h in hits)
        assert all(0.0 <= h.lateral_m <= 40.0 for h in hits)

    def test_vertex_pano_hits_both_incident_segments(self):
        # A pano exactly at the corner of an L projects to the end of the
        # first leg and the start of the second: same s, two tangents.
        store = syn.build_store(syn.rows_for_trajectory(
            "t", [(50.0, 0.0)], syn.BASE_TIME))
        index = store.build_index()
        pts = syn.en_to_ecef([(0.0, 0.0), (50.0, 0.0), (50.0, 50.0)])
        hits = index.query_corridor(pts, 5.0)
        assert len(hits) == 2
        assert {h.seg_index for h in hits} == {0, 1}
        assert abs(hits[0].s - hits[1].s) < 1e-6

    def test_degenerate_polylines_rejected(self):
        index = SpatialIndex([])
        p = syn.en_to_ecef([(0.0, 0.0)])[0]
        with pytest.raises(DegeneratePath):
            index.query_corridor([p], 5.0)
        with pytest.raises(DegeneratePath):
            index.query_corridor([p, p], 5.0)


class TestManifestRoundtrip:
    def test_write_then_ingest(self, tmp_path):
        rows = syn.straight_street_rows(length_m=10.0, spacing_m=2.0)
        manifest = tmp_path / "m.jsonl"
        write_manifest(rows, manifest)
        store = PanoramaStore()
        report = store.ingest_manifest(manifest)
        assert report.rejected == 0
        assert len(store) == len(rows)
        rec = store.get(rows[0]["id"])
        assert rec.lat == pytest.approx(rows[0]["lat"])
