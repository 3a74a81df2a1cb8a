"""Raster and feature-file I/O.

Images travel as HxWx3 float arrays in [0,1]; on disk they are 8-bit
PNGs (quantization: round(v*255)). Feature sets use a small binary
format: magic ``FEAT``, uint32 n, uint32 d, then n*d little-endian
float32 values row-major.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DegenerateInput

FEATURE_MAGIC = b"FEAT"


def write_image(path, img: np.ndarray) -> None:
    arr = np.asarray(img, dtype=np.float64)
    data = np.round(np.clip(arr, 0.0, 1.0) * 255.0).astype(np.uint8)
    Image.fromarray(data).save(Path(path), format="PNG")


def read_image(path) -> np.ndarray:
    with Image.open(Path(path)) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float64)
    return arr / 255.0


def read_mask(path) -> np.ndarray:
    """Single-channel raster; any nonzero pixel counts as dynamic."""
    with Image.open(Path(path)) as im:
        arr = np.asarray(im.convert("L"))
    return (arr > 0).astype(np.uint8)


def write_mask(path, mask: np.ndarray) -> None:
    data = (np.asarray(mask) > 0).astype(np.uint8) * 255
    Image.fromarray(data, mode="L").save(Path(path), format="PNG")


def write_features(path, feats: np.ndarray) -> None:
    feats = np.asarray(feats, dtype=np.float32)
    if feats.ndim != 2:
        raise DegenerateInput("feature set must be a 2-D array")
    n, d = feats.shape
    with Path(path).open("wb") as fh:
        fh.write(FEATURE_MAGIC)
        fh.write(struct.pack("<II", n, d))
        fh.write(feats.astype("<f4").tobytes(order="C"))


def read_features(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != FEATURE_MAGIC:
        raise DegenerateInput(f"not a feature file: {path}")
    n, d = struct.unpack("<II", raw[4:12])
    expected = 12 + 4 * n * d
    if len(raw) != expected:
        raise DegenerateInput(
            f"feature file length {len(raw)} != expected {expected}")
    return np.frombuffer(raw[12:], dtype="<f4").reshape(n, d).astype(np.float64)
