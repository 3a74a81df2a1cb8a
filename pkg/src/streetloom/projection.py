"""Panorama cropping, view augmentation, and conditioning manifests.

Everything that turns a mined pair or a retrieval plan into concrete
model inputs lives here: equirectangular to pinhole resampling, the
yaw-augmentation schedule, condition-length and dropout sampling, and
latent shape arithmetic.

Azimuth follows the compass convention: 0 deg = north, 90 deg = east,
increasing clockwise. In the local east/north/up basis a unit ray at
azimuth ``az`` and elevation ``el`` is

    [sin(az) * cos(el), cos(az) * cos(el), sin(el)]

A panorama of width W covers the full 360 deg with column centers at
azimuth (x + 0.5) / W * 360 and row centers at elevation
90 - (y + 0.5) / H * 180, top row up.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (BadAspect, ConditionTooShort, DegenerateInput,
                     IncompatibleDims, PitchOutOfRange)
from .geodesy import ecef_heading_deg, to_relative_poses

DEFAULT_HFOV_DEG = 65.0
DEFAULT_OUT_W = 832
DEFAULT_OUT_H = 480
CONDITION_LENGTHS = (61, 65, 69, 73, 77, 81)


@dataclass(frozen=True)
class AugmentationParams:
    fov_deg: float = DEFAULT_HFOV_DEG
    out_w: int = DEFAULT_OUT_W
    out_h: int = DEFAULT_OUT_H
    start_yaw_range: tuple[float, float] = (0.0, 360.0)
    per_frame_rot_range: tuple[float, float] = (0.0, 2.0)
    cond_len_range: tuple[int, ...] = CONDITION_LENGTHS

    def __post_init__(self):
        if not 0.0 < self.fov_deg < 180.0:
            raise DegenerateInput(f"fov must lie in (0,180): {self.fov_deg}")
        if self.out_w < 1 or self.out_h < 1:
            raise DegenerateInput("output dims must be positive")
        if any(n % 4 != 1 for n in self.cond_len_range):
            raise DegenerateInput("condition lengths must be 1 mod 4")


@dataclass(frozen=True)
class DropoutPolicy:
    p_pose: float = 0.10
    p_geo: float = 0.10

    def __post_init__(self):
        if not (0.0 <= self.p_pose <= 1.0 and 0.0 <= self.p_geo <= 1.0):
            raise DegenerateInput("dropout probabilities must lie in [0,1]")


def validate_image(img: np.ndarray) -> np.ndarray:
    """Check an HxWx3 buffer of [0,1] values; returns the array unchanged."""
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] < 1 or img.shape[1] < 1:
        raise DegenerateInput(f"expected HxWx3 image, got shape {img.shape}")
    if float(img.min()) < 0.0 or float(img.max()) > 1.0:
        raise DegenerateInput("image values must lie in [0,1]")
    return img


def canonical_yaw_deg(yaw_deg: float) -> float:
    """Wrap to [0,360) without precision loss (fmod is exact)."""
    y = math.fmod(float(yaw_deg), 360.0)
    return y + 360.0 if y < 0.0 else y


def direction_from_compass(az_deg, el_deg) -> np.ndarray:
    """Unit ray(s) in east/north/up for compass azimuth and elevation."""
    az = np.radians(az_deg)
    el = np.radians(el_deg)
    return np.stack([
        np.sin(az) * np.cos(el),
        np.cos(az) * np.cos(el),
        np.sin(el),
    ], axis=-1)


def compass_from_direction(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`direction_from_compass`; azimuth in [0, 360)."""
    d = np.asarray(d, dtype=np.float64)
    az = np.degrees(np.arctan2(d[..., 0], d[..., 1])) % 360.0
    r = np.hypot(d[..., 0], d[..., 1])
    el = np.degrees(np.arctan2(d[..., 2], r))
    return az, el


def bilinear_sample(pano: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Bilinear lookup at continuous pixel coords (u = column, v = row).

    Columns wrap (the panorama is periodic in azimuth); rows clamp.
    """
    h, w = pano.shape[0], pano.shape[1]
    u0 = np.floor(u).astype(np.int64)
    v0 = np.floor(v).astype(np.int64)
    fu = u - u0
    fv = v - v0

    u1 = (u0 + 1) % w
    u0 = u0 % w
    v1 = np.clip(v0 + 1, 0, h - 1)
    v0 = np.clip(v0, 0, h - 1)

    if pano.ndim == 3:
        fu = fu[..., None]
        fv = fv[..., None]
    top = pano[v0, u0] * (1.0 - fu) + pano[v0, u1] * fu
    bot = pano[v1, u0] * (1.0 - fu) + pano[v1, u1] * fu
    return top * (1.0 - fv) + bot * fv


def crop_perspective(pano: np.ndarray, yaw_deg: float, pitch_deg: float = 0.0,
                     params: AugmentationParams = AugmentationParams(),
                     ) -> np.ndarray:
    """Resample a pinhole crop looking at (yaw, pitch) from a panorama.

    Pixels are square; the vertical field of view follows from the
    horizontal one and the output aspect. The output center ray points at
    (yaw, pitch) exactly (up to bilinear quantization of the lookup).
    Yaw is wrapped, so yaw and yaw + 360 produce bit-identical crops.
    """
    pano = np.asarray(pano, dtype=np.float64)
    if pano.ndim not in (2, 3):
        raise BadAspect("panorama must be HxW or HxWxC")
    h, w = pano.shape[0], pano.shape[1]
    if w != 2 * h:
        raise BadAspect(f"equirectangular panorama needs W == 2H, got {w}x{h}")
    pitch_limit = 90.0 - params.fov_deg / 2.0
    if not -pitch_limit < pitch_deg < pitch_limit:
        raise PitchOutOfRange(
            f"pitch must lie in (-{pitch_limit}, {pitch_limit}): {pitch_deg}")

    yaw_deg = canonical_yaw_deg(yaw_deg)
    forward = direction_from_compass(yaw_deg, pitch_deg)
    right = direction_from_compass(yaw_deg + 90.0, 0.0)
    up = direction_from_compass(yaw_deg, pitch_deg + 90.0)

    # Focal scale for square pixels: the image plane spans 2*tan(fov/2)
    # horizontally at unit focal distance.
    scale = 2.0 * math.tan(math.radians(params.fov_deg) / 2.0) / params.out_w
    px = (np.arange(params.out_w) + 0.5 - params.out_w / 2.0) * scale
    py = (np.arange(params.out_h) + 0.5 - params.out_h / 2.0) * scale
    px, py = np.meshgrid(px, py)

    rays = (forward[None, None, :]
            + px[..., None] * right[None, None, :]
            - py[..., None] * up[None, None, :])
    az, el = compass_from_direction(rays)

    u = az / 360.0 * w - 0.5
    v = (90.0 - el) / 180.0 * h - 0.5
    return bilinear_sample(pano, u, v)


def sample_yaw_schedule(n_frames: int, headings, rng: np.random.Generator,
                        params: AugmentationParams = AugmentationParams(),
                        ) -> np.ndarray:
    """Per-frame viewing yaws: a random start plus drifting increments.

    yaw[0] = heading[0] + u with u ~ U over start_yaw_range, wrapped to
    [0, 360); yaw[k] = yaw[k-1] + (heading[k] - heading[k-1]) + delta_k
    with delta_k ~ U over per_frame_rot_range. Draw order is start offset
    first, then the n-1 increments, so results are seed-deterministic.
    """
    if n_frames < 1:
        raise DegenerateInput("need at least one frame")
    headings = np.asarray(headings, dtype=np.float64)
    if headings.shape != (n_frames,):
        raise DegenerateInput("headings must have one entry per frame")
    yaw = np.empty(n_frames)
    u = rng.uniform(*params.start_yaw_range)
    yaw[0] = canonical_yaw_deg(headings[0] + u)
    for k in range(1, n_frames):
        delta = rng.uniform(*params.per_frame_rot_range)
        yaw[k] = yaw[k - 1] + (headings[k] - headings[k - 1]) + delta
    return yaw


def sample_condition_length(rng: np.random.Generator,
                            params: AugmentationParams = AugmentationParams(),
                            ) -> int:
    """Uniform draw from the admissible condition lengths."""
    return int(params.cond_len_range[int(rng.integers(len(params.cond_len_range)))])


def sample_dropout_flags(policy: DropoutPolicy, rng: np.random.Generator,
                         ) -> tuple[bool, bool]:
    """(drop_pose, drop_geo), each independent with its own probability."""
    drop_pose = bool(rng.random() < policy.p_pose)
    drop_geo = bool(rng.random() < policy.p_geo)
    return drop_pose, drop_geo


def compute_latent_shape(t_frames: int, h_px: int, w_px: int,
                         ) -> tuple[int, int, int]:
    """Latent grid dims after 4x temporal, 8x spatial reduction, patch 2."""
    if t_frames < 1 or t_frames % 4 != 1:
        raise IncompatibleDims(f"frame count must be 1 mod 4: {t_frames}")
    if h_px < 16 or h_px % 16 != 0 or w_px < 16 or w_px % 16 != 0:
        raise IncompatibleDims(f"spatial dims must be multiples of 16: {h_px}x{w_px}")
    return ((t_frames - 1) // 4, h_px // 16, w_px // 16)


def build_training_example(store, pair, rng: np.random.Generator,
                           params: AugmentationParams = AugmentationParams(),
                           policy: DropoutPolicy = DropoutPolicy()) -> dict:
    """Assemble one training-example manifest from a mined pair.

    The target is the source window; the condition is the contiguous span
    of candidate frames touched by the alignment, center-truncated to the
    sampled condition length. Draw order: condition length, dropout flags,
    yaw schedule.
    """
    target_ids = list(pair.src_pano_ids)
    n = len(target_ids)
    positions = store.positions_of(target_ids)
    headings = np.empty(n)
    for i in range(n - 1):
        headings[i] = ecef_heading_deg(positions[i], positions[i + 1])
    headings[n - 1] = headings[n - 2] if n > 1 else 0.0

    span = len(pair.cand_span_ids)
    min_len = min(params.cond_len_range)
    if span < min_len:
        raise ConditionTooShort(
            f"aligned condition span {span} < minimum length {min_len}")

    length = sample_condition_length(rng, params)
    if length > span:
        # Span admits at least the minimum length; take the largest that fits.
        length = max(v for v in params.cond_len_range if v <= span)
    start = (span - length) // 2
    condition_ids = list(pair.cand_span_ids[start:start + length])

    drop_pose, drop_geo = sample_dropout_flags(policy, rng)
    poses = to_relative_poses([store.get(i).pose for i in target_ids])
    yaw = sample_yaw_schedule(n, headings, rng, params)

    return {
        "target": target_ids,
        "poses": [[float(v) for v in p.matrix().reshape(-1)] for p in poses],
        "yaw_deg": [float(y) for y in yaw],
        "condition": condition_ids,
        "condition_length": int(length),
        "drop_pose": drop_pose,
        "drop_geo": drop_geo,
        "src_segment": pair.src_segment_id,
        "cand_segment": pair.cand_segment_id,
        "mean_dist_m": float(pair.mean_dist_m),
        "time_gap_s": float(pair.time_gap_s),
    }
