"""Reference-grade evaluation metrics: PSNR, SSIM, static-masked
variants, and Frechet distance over externally computed features.

Images are HxWx3 arrays in [0,1]; data range is fixed at 1. Masks mark
dynamic pixels with 1; metrics run over static (unmasked) pixels only.
Masked and unmasked calls share one code path, so an all-zero mask
reproduces the unmasked value bit for bit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import AllMasked, DegenerateInput, DimMismatch, SqrtNonConvergence, TooSmall

PSNR_CAP_DB = 99.0
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_SIGMA = 1.5
SSIM_TRUNCATE = 3.5  # radius = int(truncate * sigma + 0.5) = 5, window 11
COV_EPS = 1e-6
SQRT_RESIDUAL_TOL = 1e-8


@dataclass
class MetricReport:
    psnr: float | None = None
    ssim: float | None = None
    psnr_s: float | None = None
    ssim_s: float | None = None
    fid: float | None = None
    fid_regularized: bool = False
    skipped_frames: tuple[int, ...] = ()

    def to_text(self) -> str:
        lines = []
        for key in ("psnr", "ssim", "psnr_s", "ssim_s", "fid"):
            val = getattr(self, key)
            if val is not None:
                lines.append(f"{key}={val:.6f}")
        if self.fid_regularized:
            lines.append("fid_regularized=true")
        if self.skipped_frames:
            lines.append("skipped_frames=" + ",".join(map(str, self.skipped_frames)))
        return "\n".join(lines) + "\n"


def _check_pair(a: np.ndarray, b: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimMismatch(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def _check_mask(mask, shape) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.shape != shape[:2]:
        raise DimMismatch(f"mask shape {mask.shape} != image plane {shape[:2]}")
    vals = np.unique(mask)
    if not np.all(np.isin(vals, (0, 1))):
        raise DegenerateInput("mask values must be 0 or 1")
    return mask.astype(bool)


def psnr(a: np.ndarray, b: np.ndarray, mask=None) -> float:
    """10*log10(1/MSE) over static pixels; zero MSE capped at 99 dB."""
    a, b = _check_pair(a, b)
    static = ~_check_mask(mask if mask is not None else
                          np.zeros(a.shape[:2], dtype=np.uint8), a.shape)
    if not static.any():
        raise AllMasked("every pixel is dynamic")
    diff = (a - b)[static]
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(1.0 / mse))


def _gaussian_kernel(sigma: float, truncate: float) -> np.ndarray:
    radius = int(truncate * sigma + 0.5)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    # Separable valid-mode correlation (the kernel is symmetric).
    tmp = sliding_window_view(img, kernel.size, axis=0) @ kernel
    return sliding_window_view(tmp, kernel.size, axis=1) @ kernel


def _ssim_map(x: np.ndarray, y: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    c1 = SSIM_K1 ** 2
    c2 = SSIM_K2 ** 2
    ux = _filter_valid(x, kernel)
    uy = _filter_valid(y, kernel)
    uxx = _filter_valid(x * x, kernel)
    uyy = _filter_valid(y * y, kernel)
    uxy = _filter_valid(x * y, kernel)
    vx = uxx - ux * ux
    vy = uyy - uy * uy
    vxy = uxy - ux * uy
    return (((2.0 * ux * uy + c1) * (2.0 * vxy + c2))
            / ((ux * ux + uy * uy + c1) * (vx + vy + c2)))


def ssim(a: np.ndarray, b: np.ndarray, mask=None) -> float:
    """Mean local SSIM (Gaussian 11x11 window, sigma 1.5) per channel.

    Window means come from windows fully inside the image; with a mask,
    only windows whose center pixel is static contribute. The channel
    values are averaged equally.
    """
    a, b = _check_pair(a, b)
    kernel = _gaussian_kernel(SSIM_SIGMA, SSIM_TRUNCATE)
    pad = kernel.size // 2
    if a.shape[0] < kernel.size or a.shape[1] < kernel.size:
        raise TooSmall(f"images must be at least {kernel.size} pixels per side")
    static = ~_check_mask(mask if mask is not None else
                          np.zeros(a.shape[:2], dtype=np.uint8), a.shape)
    center_static = static[pad:a.shape[0] - pad, pad:a.shape[1] - pad]
    if not center_static.any():
        raise AllMasked("no window center is static")

    if a.ndim == 2:
        a = a[..., None]
        b = b[..., None]
    vals = [
        float(_ssim_map(a[..., c], b[..., c], kernel)[center_static].mean())
        for c in range(a.shape[2])
    ]
    return float(np.mean(vals))


def masked_video_metrics(gen_frames, gt_frames, masks) -> MetricReport:
    """Per-frame masked PSNR/SSIM averaged over frames.

    Masks come from the ground-truth frames' segmentation. Frames whose
    mask covers everything are skipped with a warning and recorded.
    """
    if len(gen_frames) != len(gt_frames) or len(gen_frames) != len(masks):
        raise DimMismatch("frame and mask counts must match")
    if not gen_frames:
        raise DegenerateInput("need at least one frame")
    psnr_vals, ssim_vals = [], []
    skipped = []
    for i, (g, t, m) in enumerate(zip(gen_frames, gt_frames, masks)):
        try:
            psnr_vals.append(psnr(g, t, m))
            ssim_vals.append(ssim(g, t, m))
        except AllMasked:
            warnings.warn(f"frame {i}: fully dynamic, skipped", stacklevel=2)
            skipped.append(i)
    if not psnr_vals:
        raise AllMasked("every frame is fully dynamic")
    return MetricReport(
        psnr_s=float(np.mean(psnr_vals)),
        ssim_s=float(np.mean(ssim_vals)),
        skipped_frames=tuple(skipped),
    )


def video_metrics(gen_frames, gt_frames, masks=None) -> MetricReport:
    """Unmasked means, plus static-masked means when masks are given."""
    if len(gen_frames) != len(gt_frames):
        raise DimMismatch("frame counts must match")
    if not gen_frames:
        raise DegenerateInput("need at least one frame")
    report = MetricReport(
        psnr=float(np.mean([psnr(g, t) for g, t in zip(gen_frames, gt_frames)])),
        ssim=float(np.mean([ssim(g, t) for g, t in zip(gen_frames, gt_frames)])),
    )
    if masks is not None:
        masked = masked_video_metrics(gen_frames, gt_frames, masks)
        report.psnr_s = masked.psnr_s
        report.ssim_s = masked.ssim_s
        report.skipped_frames = masked.skipped_frames
    return report


def _sqrtm_psd(m: np.ndarray) -> np.ndarray:
    """Square root of a symmetric PSD matrix via eigendecomposition."""
    vals, vecs = np.linalg.eigh(m)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid_from_features(real: np.ndarray, gen: np.ndarray,
                      ) -> tuple[float, bool]:
    """Frechet distance between Gaussian fits of two feature sets.

    Returns (fid, regularized). The cross-covariance square root uses
    tr((Sr Sg)^1/2) = tr(sqrt(A Sg A)) with A = sqrt(Sr), which keeps the
    computation in symmetric matrices; the root must reproduce its square
    to a 1e-8 relative residual or the computation is rejected. A value
    that comes out negative by rounding is clamped to 0.
    """
    real = np.asarray(real, dtype=np.float64)
    gen = np.asarray(gen, dtype=np.float64)
    if real.ndim != 2 or gen.ndim != 2:
        raise DegenerateInput("feature sets must be 2-D (n, d)")
    if real.shape[1] != gen.shape[1]:
        raise DimMismatch(
            f"feature dims differ: {real.shape[1]} vs {gen.shape[1]}")
    if real.shape[0] < 2 or gen.shape[0] < 2:
        raise TooSmall("need at least 2 feature vectors per set")

    d = real.shape[1]
    mu_r, mu_g = real.mean(axis=0), gen.mean(axis=0)
    cov_r = np.atleast_2d(np.cov(real, rowvar=False))
    cov_g = np.atleast_2d(np.cov(gen, rowvar=False))
    regularized = False
    if real.shape[0] <= d or gen.shape[0] <= d:
        cov_r = cov_r + COV_EPS * np.eye(d)
        cov_g = cov_g + COV_EPS * np.eye(d)
        regularized = True

    a = _sqrtm_psd(cov_r)
    inner = a @ cov_g @ a
    inner = (inner + inner.T) / 2.0
    root = _sqrtm_psd(inner)
    residual = np.linalg.norm(root @ root - inner)
    if residual > SQRT_RESIDUAL_TOL * max(1.0, np.linalg.norm(inner)):
        raise SqrtNonConvergence(
            f"matrix square root residual {residual:.3e} too large")

    dmu = mu_r - mu_g
    fid = float(dmu @ dmu + np.trace(cov_r) + np.trace(cov_g)
                - 2.0 * np.trace(root))
    return max(fid, 0.0), regularized
