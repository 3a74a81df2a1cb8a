"""Synthetic corpora and analytic panoramas for tests and demos.

Fixture geometry is laid out in a local east/north plane anchored at a
fixed mid-latitude origin and converted exactly (orthonormal basis) to
ECEF, so planar distances carry over to the meter thresholds used by
mining and planning. Manifest rows round-trip through the same parsing
path as real corpora.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .geodesy import (GeodeticCoord, ecef_to_geodetic, enu_rotation_at,
                      geodetic_to_ecef)
from .pano_index import MANIFEST_FIELDS, PanoramaStore, record_from_row
from .planner import UserPath

ORIGIN = GeodeticCoord(37.3861, -122.0839, 12.0)
BASE_TIME = 1_700_000_000.0
FRAME_DT_S = 0.2  # ~10 m/s at 2 m spacing
PASS_DT_S = 7200.0


def en_to_ecef(xy, origin: GeodeticCoord = ORIGIN) -> np.ndarray:
    """Map local (east, north[, up]) meters to ECEF."""
    xy = np.atleast_2d(np.asarray(xy, dtype=np.float64))
    if xy.shape[1] == 2:
        xy = np.hstack([xy, np.zeros((len(xy), 1))])
    basis = enu_rotation_at(origin)  # columns E, N, U
    return geodetic_to_ecef(origin)[None, :] + xy @ basis.T


def en_to_geodetic(xy, origin: GeodeticCoord = ORIGIN) -> list[GeodeticCoord]:
    return [ecef_to_geodetic(p) for p in en_to_ecef(xy, origin)]


def path_from_en(waypoints_xy, origin: GeodeticCoord = ORIGIN) -> UserPath:
    return UserPath(waypoints=tuple(en_to_geodetic(waypoints_xy, origin)))


def line_positions(start_xy, end_xy, spacing_m: float) -> np.ndarray:
    """Evenly spaced points including both endpoints."""
    start = np.asarray(start_xy, dtype=np.float64)
    end = np.asarray(end_xy, dtype=np.float64)
    n = int(round(np.linalg.norm(end - start) / spacing_m)) + 1
    return np.linspace(start, end, n)


def rows_for_trajectory(traj_id: str, positions_en, t0: float,
                        city: str = "gridville", dt_s: float = FRAME_DT_S,
                        origin: GeodeticCoord = ORIGIN) -> list[dict]:
    rows = []
    for k, coord in enumerate(en_to_geodetic(positions_en, origin)):
        rows.append({
            "id": f"{traj_id}-{k:04d}",
            "lat": coord.lat,
            "lon": coord.lon,
            "alt": coord.alt,
            "qw": 1.0, "qx": 0.0, "qy": 0.0, "qz": 0.0,
            "t": t0 + k * dt_s,
            "trajectory_id": traj_id,
            "city": city,
            "image_uri": f"mem://{traj_id}-{k:04d}",
        })
    return rows


def build_store(rows: list[dict]) -> PanoramaStore:
    store = PanoramaStore()
    for row in rows:
        store.add(record_from_row(row))
    return store


def two_pass_street_rows(offset_m: float, length_m: float = 160.0,
                         spacing_m: float = 2.0, jitter_m: float = 0.0,
                         dt_between_passes_s: float = PASS_DT_S,
                         seed: int = 0) -> list[dict]:
    """One street captured twice, the second pass laterally offset.

    With offset 0 the passes coincide (a mineable pair); with 6 m every
    point of one pass is at least 6 m from the other, past the 5 m gate.
    """
    rng = np.random.default_rng(seed)
    rows = []
    for p, offset in enumerate((0.0, offset_m)):
        pos = line_positions((0.0, 0.0), (length_m, 0.0), spacing_m)
        pos = pos + np.array([0.0, offset])
        if jitter_m > 0:
            pos = pos + rng.uniform(-jitter_m, jitter_m, pos.shape)
        rows.extend(rows_for_trajectory(
            f"street-p{p}", pos, BASE_TIME + p * dt_between_passes_s))
    return rows


def grid_city_rows(seed: int, n_streets: int = 3, block_m: float = 80.0,
                   spacing_m: float = 2.0, passes: int = 2,
                   jitter_m: float = 0.15,
                   close_time_street: int | None = None) -> list[dict]:
    """A block grid captured by several per-street passes.

    Each pass gets a random lateral offset drawn from {0, ~0.4, 6} m, so
    corpora contain both mineable and rejected revisits. When
    ``close_time_street`` names a street index, its second pass starts
    only 600 s after the first, exercising the time-separation gate.
    """
    rng = np.random.default_rng(seed)
    extent = (n_streets - 1) * block_m
    streets: list[tuple[np.ndarray, np.ndarray]] = []
    for j in range(n_streets):
        y = j * block_m
        streets.append((np.array([0.0, y]), np.array([extent, y])))
    for i in range(n_streets):
        x = i * block_m
        streets.append((np.array([x, 0.0]), np.array([x, extent])))

    rows = []
    pass_no = 0
    for si, (a, b) in enumerate(streets):
        for p in range(passes):
            offset = float(rng.choice([0.0, 0.4, 6.0], p=[0.5, 0.3, 0.2]))
            normal = b - a
            normal = np.array([-normal[1], normal[0]]) / np.linalg.norm(normal)
            start, end = (a, b) if rng.random() < 0.5 else (b, a)
            pos = line_positions(start, end, spacing_m) + offset * normal
            pos = pos + rng.uniform(-jitter_m, jitter_m, pos.shape)
            if close_time_street is not None and si == close_time_street and p == 1:
                t0 = BASE_TIME + (pass_no - 1) * PASS_DT_S + 600.0
            else:
                t0 = BASE_TIME + pass_no * PASS_DT_S
            rows.extend(rows_for_trajectory(f"s{si}-p{p}", pos, t0))
            pass_no += 1
    return rows


def random_corridor_rows(seed: int) -> tuple[list[dict], float]:
    """Random multi-pass coverage of one straight street.

    Each pass draws its own span, spacing, lateral offset, and jitter, so
    the corridor contains gaps, overlaps, and competing lateral costs —
    the regime where retrieval planning is nontrivial. Returns the rows
    and the street length to plan over.
    """
    rng = np.random.default_rng(seed)
    length = float(rng.uniform(40.0, 60.0))
    rows = []
    for t in range(int(rng.integers(2, 6))):
        start = float(rng.uniform(0.0, 8.0))
        span = float(rng.uniform(length * 0.5, length + 8.0))
        spacing = float(rng.uniform(1.5, 3.0))
        lateral = float(rng.uniform(-4.0, 4.0))
        n = max(2, int(span / spacing))
        pts = [(start + k * spacing + float(rng.normal(0.0, 0.1)),
                lateral + float(rng.normal(0.0, 0.2)))
               for k in range(n)]
        rows.extend(rows_for_trajectory(f"t{t}", pts, BASE_TIME + 1000.0 * t))
    return rows, length


def straight_street_rows(length_m: float = 120.0, spacing_m: float = 1.0,
                         traj_id: str = "straight") -> list[dict]:
    pos = line_positions((0.0, 0.0), (length_m, 0.0), spacing_m)
    return rows_for_trajectory(traj_id, pos, BASE_TIME)


def junction_rows(arm_m: float = 40.0, overshoot_m: float = 5.0,
                  spacing_m: float = 1.0) -> list[dict]:
    """Two perpendicular captures through one intersection.

    Trajectory A heads east along y=0, B heads north along x=0; both run
    a little past the junction so each covers it.
    """
    a = line_positions((-arm_m - overshoot_m, 0.0), (overshoot_m, 0.0), spacing_m)
    b = line_positions((0.0, -overshoot_m), (0.0, arm_m + overshoot_m), spacing_m)
    rows = rows_for_trajectory("east-arm", a, BASE_TIME)
    rows += rows_for_trajectory("north-arm", b, BASE_TIME + PASS_DT_S)
    return rows


def junction_path(arm_m: float = 40.0) -> UserPath:
    return path_from_en([(-arm_m, 0.0), (0.0, 0.0), (0.0, arm_m)])


RING_CORNERS = ((0.0, 0.0), (40.0, 0.0), (40.0, 32.0), (0.0, 32.0))
RING_OVERHANG_M = 0.7


def ring_rows(spacing_m: float = 1.0) -> list[dict]:
    """A closed rectangular loop; the final record re-occupies the start.

    Perimeter 144 m at 1 m spacing gives 145 records, which plans into
    two 73-step chunks sharing one boundary step.
    """
    corners = [np.asarray(c, dtype=np.float64) for c in RING_CORNERS]
    corners.append(corners[0])
    pos = []
    for a, b in zip(corners[:-1], corners[1:]):
        seg = line_positions(a, b, spacing_m)
        pos.extend(seg[:-1])
    pos.append(corners[0])
    return rows_for_trajectory("ring", np.array(pos), BASE_TIME)


def ring_path(overhang_m: float = RING_OVERHANG_M) -> UserPath:
    """The loop path, extended a little past both ends of the coverage.

    The overhang (smaller than the planning gap limit) pins the chain to
    the outermost panos: no candidate other than the first pano lies
    within gap_max of the path start, and likewise at the end, so the
    planned chain spans the full loop and closes on the duplicated
    start/end record.
    """
    x0, y0 = RING_CORNERS[0]
    pts = [(x0 - overhang_m, y0)] + list(RING_CORNERS[1:]) + [(x0, y0 - overhang_m)]
    return path_from_en(pts)


def street_path(length_m: float, overhang_m: float = RING_OVERHANG_M) -> UserPath:
    """Straight path overhanging a street fixture on both ends."""
    return path_from_en([(-overhang_m, 0.0), (length_m + overhang_m, 0.0)])


# ---------------------------------------------------------------------------
# Analytic panoramas


def _az_el_grids(height: int) -> tuple[np.ndarray, np.ndarray]:
    width = 2 * height
    az = (np.arange(width) + 0.5) / width * 360.0
    el = 90.0 - (np.arange(height) + 0.5) / height * 180.0
    return np.meshgrid(az, el)


def azimuth_pano(height: int = 256) -> np.ndarray:
    """Azimuth encoded in R (sin) and G (cos); elevation ramp in B.

    Decoding a pixel: az = atan2(2R-1, 2G-1). Because sin/cos are smooth
    and periodic, bilinear resampling keeps the decoded azimuth accurate
    to far below a pixel, with no seam discontinuity.
    """
    az, el = _az_el_grids(height)
    azr = np.radians(az)
    return np.stack([
        0.5 + 0.5 * np.sin(azr),
        0.5 + 0.5 * np.cos(azr),
        (90.0 - el) / 180.0,
    ], axis=-1)


def decode_azimuth(pixel: np.ndarray) -> float:
    s = 2.0 * float(pixel[0]) - 1.0
    c = 2.0 * float(pixel[1]) - 1.0
    return float(np.degrees(np.arctan2(s, c)) % 360.0)


def checker_pano(height: int = 64, cell_deg: float = 15.0) -> np.ndarray:
    az, el = _az_el_grids(height)
    pattern = ((np.floor(az / cell_deg) + np.floor((el + 90.0) / cell_deg)) % 2)
    return np.repeat(pattern[..., None], 3, axis=-1).astype(np.float64)


def smooth_pano(height: int = 64, seed: int = 0) -> np.ndarray:
    """Band-limited pano: a few low harmonics, periodic in azimuth."""
    rng = np.random.default_rng(seed)
    az, el = _az_el_grids(height)
    azr, elr = np.radians(az), np.radians(el)
    img = np.empty((height, 2 * height, 3))
    for c in range(3):
        val = 0.5 * np.ones_like(azr)
        for _ in range(3):
            ka = int(rng.integers(1, 4))
            ke = int(rng.integers(1, 3))
            phase = rng.uniform(0, 2 * np.pi)
            amp = rng.uniform(0.05, 0.15)
            val = val + amp * np.sin(ka * azr + phase) * np.cos(ke * elr)
        img[..., c] = val
    return np.clip(img, 0.0, 1.0)


def _stable_seed(text: str) -> int:
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:4], "big")


def pano_source(height: int = 64):
    """Deterministic record -> panorama mapping for in-memory sessions."""
    cache: dict[str, np.ndarray] = {}

    def source(record) -> np.ndarray:
        if record.id not in cache:
            cache[record.id] = smooth_pano(height, _stable_seed(record.id))
        return cache[record.id]

    return source


def write_corpus(rows: list[dict], out_dir, pano_height: int = 64) -> Path:
    """Write a manifest plus one synthetic pano file per record.

    Rewrites each row's image_uri to the written file. Returns the
    manifest path.
    """
    from .image_io import write_image

    out_dir = Path(out_dir)
    pano_dir = out_dir / "panos"
    pano_dir.mkdir(parents=True, exist_ok=True)
    manifest = out_dir / "manifest.jsonl"
    with manifest.open("w", encoding="utf-8") as fh:
        for row in rows:
            pano_path = pano_dir / f"{row['id']}.png"
            write_image(pano_path, smooth_pano(pano_height,
                                               _stable_seed(row["id"])))
            row = dict(row, image_uri=str(pano_path))
            fh.write(json.dumps({k: row[k] for k in MANIFEST_FIELDS},
                                sort_keys=True) + "\n")
    return manifest
