"""WGS84 geodesy and rigid-transform math.

All functions are pure and operate on immutable values; they are safe to
call concurrently. Positions are either geodetic (degrees / meters above
the WGS84 ellipsoid) or Earth-Centered Earth-Fixed Cartesian in meters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInput, EmptyTrajectory

# WGS84 ellipsoid
WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_B = WGS84_A * (1.0 - WGS84_F)
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)  # first eccentricity squared

# Below this geocentric radius the geodetic inverse is ill-conditioned.
MIN_ECEF_RADIUS_M = 1_000_000.0

_ORTHONORMAL_TOL = 1e-9


@dataclass(frozen=True)
class GeodeticCoord:
    """Latitude/longitude in degrees, altitude in meters above the ellipsoid."""

    lat: float
    lon: float
    alt: float = 0.0

    def __post_init__(self):
        if not (-90.0 <= self.lat <= 90.0):
            raise DegenerateInput(f"latitude {self.lat} outside [-90, 90]")
        if not (-180.0 <= self.lon < 180.0):
            raise DegenerateInput(f"longitude {self.lon} outside [-180, 180)")
        if not math.isfinite(self.alt):
            raise DegenerateInput("altitude must be finite")


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SE3Pose:
    """Rigid transform: 3x3 rotation plus translation in meters."""

    rotation: np.ndarray = field(default_factory=lambda: _freeze(np.eye(3)))
    translation: np.ndarray = field(default_factory=lambda: _freeze(np.zeros(3)))

    def __post_init__(self):
        r = _freeze(self.rotation)
        t = _freeze(self.translation)
        if r.shape != (3, 3) or t.shape != (3,):
            raise DegenerateInput("pose needs a 3x3 rotation and a 3-vector")
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(t)):
            raise DegenerateInput("pose entries must be finite")
        if np.abs(r.T @ r - np.eye(3)).max() > _ORTHONORMAL_TOL:
            raise DegenerateInput("rotation is not orthonormal")
        if abs(np.linalg.det(r) - 1.0) > _ORTHONORMAL_TOL:
            raise DegenerateInput("rotation determinant must be +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "SE3Pose":
        return cls(_freeze(np.eye(3)), _freeze(np.zeros(3)))

    @classmethod
    def from_quaternion(cls, qw: float, qx: float, qy: float, qz: float,
                        translation) -> "SE3Pose":
        """Build from a (w, x, y, z) quaternion; normalized before use."""
        n = math.sqrt(qw * qw + qx * qx + qy * qy + qz * qz)
        if n < 1e-12:
            raise DegenerateInput("zero-norm quaternion")
        w, x, y, z = qw / n, qx / n, qy / n, qz / n
        r = np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])
        return cls(r, np.asarray(translation, dtype=np.float64))

    @classmethod
    def from_matrix(cls, m) -> "SE3Pose":
        m = np.asarray(m, dtype=np.float64)
        if m.shape != (4, 4):
            raise DegenerateInput("expected a 4x4 matrix")
        return cls(m[:3, :3], m[:3, 3])

    def matrix(self) -> np.ndarray:
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    def inverse(self) -> "SE3Pose":
        rt = self.rotation.T
        return SE3Pose(rt.copy(), -(rt @ self.translation))

    def compose(self, other: "SE3Pose") -> "SE3Pose":
        """Return self ∘ other (apply ``other`` first)."""
        return SE3Pose(self.rotation @ other.rotation,
                       self.rotation @ other.translation + self.translation)

    def apply(self, p) -> np.ndarray:
        return self.rotation @ np.asarray(p, dtype=np.float64) + self.translation

    def is_identity(self) -> bool:
        return (np.array_equal(self.rotation, np.eye(3))
                and np.array_equal(self.translation, np.zeros(3)))


def geodetic_to_ecef_arrays(lat_deg, lon_deg, alt_m):
    """Vectorized geodetic -> ECEF. Accepts scalars or arrays, returns x, y, z."""
    lat = np.radians(np.asarray(lat_deg, dtype=np.float64))
    lon = np.radians(np.asarray(lon_deg, dtype=np.float64))
    alt = np.asarray(alt_m, dtype=np.float64)
    sin_lat, cos_lat = np.sin(lat), np.cos(lat)
    sin_lon, cos_lon = np.sin(lon), np.cos(lon)
    n = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
    x = (n + alt) * cos_lat * cos_lon
    y = (n + alt) * cos_lat * sin_lon
    z = (n * (1.0 - WGS84_E2) + alt) * sin_lat
    return x, y, z


def ecef_to_geodetic_arrays(x, y, z, iterations: int = 10):
    """Vectorized ECEF -> geodetic (lat deg, lon deg, alt m).

    Fixed-point iteration on latitude; converges to well below 1e-6 m of
    position error for |alt| <= 10 km.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    p = np.hypot(x, y)
    lon = np.arctan2(y, x)
    lat = np.arctan2(z, p * (1.0 - WGS84_E2))
    for _ in range(iterations):
        sin_lat = np.sin(lat)
        n = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
        # Robust at all latitudes, including the poles.
        alt = p * np.cos(lat) + z * sin_lat - WGS84_A * np.sqrt(
            1.0 - WGS84_E2 * sin_lat * sin_lat)
        lat = np.arctan2(z, p * (1.0 - WGS84_E2 * n / (n + alt)))
    sin_lat = np.sin(lat)
    n = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sin_lat * sin_lat)
    alt = p * np.cos(lat) + z * sin_lat - WGS84_A * np.sqrt(
        1.0 - WGS84_E2 * sin_lat * sin_lat)
    lat_deg = np.degrees(lat)
    lon_deg = np.degrees(lon)
    # Keep longitude in [-180, 180).
    lon_deg = np.where(lon_deg >= 180.0, lon_deg - 360.0, lon_deg)
    return lat_deg, lon_deg, alt


def geodetic_to_ecef(c: GeodeticCoord) -> np.ndarray:
    """Geodetic coordinate -> ECEF position (meters)."""
    x, y, z = geodetic_to_ecef_arrays(c.lat, c.lon, c.alt)
    return np.array([float(x), float(y), float(z)])


def ecef_to_geodetic(p) -> GeodeticCoord:
    """ECEF position -> geodetic coordinate.

    Raises DegenerateInput for points near the geocenter, where the
    inverse is meaningless.
    """
    p = np.asarray(p, dtype=np.float64)
    if p.shape != (3,):
        raise DegenerateInput("expected a 3-vector")
    if float(np.linalg.norm(p)) < MIN_ECEF_RADIUS_M:
        raise DegenerateInput("position too close to the geocenter")
    lat, lon, alt = ecef_to_geodetic_arrays(p[0], p[1], p[2])
    lat = float(np.clip(lat, -90.0, 90.0))
    return GeodeticCoord(lat=lat, lon=float(lon), alt=float(alt))


def to_relative_poses(absolute: list[SE3Pose]) -> list[SE3Pose]:
    """Re-express a pose sequence relative to its first pose.

    The head of the result is the identity by construction (not a computed
    product), so downstream consumers can rely on it bit-exactly.
    """
    if not absolute:
        raise EmptyTrajectory("cannot take relative poses of an empty sequence")
    inv0 = absolute[0].inverse()
    out = [SE3Pose.identity()]
    out.extend(inv0.compose(pose) for pose in absolute[1:])
    return out


def pose_distance(a: SE3Pose, b: SE3Pose) -> float:
    """Euclidean distance between camera centers, meters. Rotation is ignored."""
    return float(np.linalg.norm(a.translation - b.translation))


def enu_rotation_at(c: GeodeticCoord) -> np.ndarray:
    """Local East/North/Up frame at a geodetic point, as matrix columns [E N U]."""
    lat = math.radians(c.lat)
    lon = math.radians(c.lon)
    sin_lat, cos_lat = math.sin(lat), math.cos(lat)
    sin_lon, cos_lon = math.sin(lon), math.cos(lon)
    east = np.array([-sin_lon, cos_lon, 0.0])
    north = np.array([-sin_lat * cos_lon, -sin_lat * sin_lon, cos_lat])
    up = np.array([cos_lat * cos_lon, cos_lat * sin_lon, sin_lat])
    return np.column_stack([east, north, up])


def compass_heading_deg(east: float, north: float) -> float:
    """Compass azimuth of a local ENU direction: 0 = north, 90 = east."""
    return math.degrees(math.atan2(east, north)) % 360.0


def ecef_heading_deg(p, q) -> float:
    """Compass heading of travel from ECEF point ``p`` toward ``q``."""
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    frame = enu_rotation_at(ecef_to_geodetic(p))
    local = frame.T @ (q - p)
    return compass_heading_deg(float(local[0]), float(local[1]))


def wrap_angle_deg(angle: float) -> float:
    """Wrap an angular difference into (-180, 180]."""
    a = math.fmod(angle, 360.0)
    if a > 180.0:
        a -= 360.0
    elif a <= -180.0:
        a += 360.0
    return a


def heading_mismatch_deg(a: float, b: float) -> float:
    """Absolute circular difference of two compass headings, in [0, 180]."""
    return abs(wrap_angle_deg(a - b))
