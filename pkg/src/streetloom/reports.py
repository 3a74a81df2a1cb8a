"""Report figures rendered next to the delimited outputs.

Every CLI report path writes its machine-readable output (JSONL, TSV,
key-value text) plus a PNG figure of the same content; plotting is
headless (Agg) and deterministic apart from matplotlib versioning.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .geodesy import ecef_to_geodetic, enu_rotation_at

_DPI = 150


def _local_en(store, pano_ids) -> np.ndarray:
    """Positions projected into an east/north plane at the first record."""
    ref = store.get(pano_ids[0]).position
    basis = enu_rotation_at(ecef_to_geodetic(ref))
    pos = store.positions_of(pano_ids)
    return (pos - ref) @ basis[:, :2]


def save_corpus_figure(store, segments, out_png) -> Path:
    fig, ax = plt.subplots(figsize=(7, 7))
    all_ids = [pid for seg in segments for pid in seg.pano_ids]
    if all_ids:
        en = _local_en(store, all_ids)
        offset = 0
        for seg in segments:
            n = len(seg.pano_ids)
            xy = en[offset:offset + n]
            offset += n
            ax.plot(xy[:, 0], xy[:, 1], ".", markersize=2, label=seg.segment_id)
        if len(segments) <= 12:
            ax.legend(fontsize=7, loc="best")
    ax.set_xlabel("east (m)")
    ax.set_ylabel("north (m)")
    ax.set_title(f"{len(store)} panoramas, {len(segments)} segments")
    ax.set_aspect("equal")
    fig.savefig(out_png, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return Path(out_png)


def save_pairs_figure(pairs, out_png) -> Path:
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    if pairs:
        ax1.hist([p.mean_dist_m for p in pairs], bins=20, color="steelblue")
        ax2.hist([p.time_gap_s / 3600.0 for p in pairs], bins=20,
                 color="darkseagreen")
    ax1.set_xlabel("mean aligned distance (m)")
    ax1.set_ylabel("pairs")
    ax2.set_xlabel("time gap (h)")
    fig.suptitle(f"{len(pairs)} mined pairs")
    fig.savefig(out_png, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return Path(out_png)


def save_plan_figure(store, path, plan, out_png, candidates=None) -> Path:
    fig, ax = plt.subplots(figsize=(7, 7))
    ref = path.ecef()[0]
    basis = enu_rotation_at(ecef_to_geodetic(ref))

    def to_en(pts):
        return (np.atleast_2d(pts) - ref) @ basis[:, :2]

    wp = to_en(path.ecef())
    ax.plot(wp[:, 0], wp[:, 1], "k--", linewidth=1, label="requested path")
    if candidates:
        cand_en = to_en(store.positions_of([c.pano_id for c in candidates]))
        ax.plot(cand_en[:, 0], cand_en[:, 1], ".", color="0.8", markersize=3,
                label="corridor candidates", zorder=1)

    seg_ids = sorted({s.segment_id for s in plan.steps})
    cmap = plt.get_cmap("tab10")
    for k, seg_id in enumerate(seg_ids):
        ids = [s.pano_id for s in plan.steps if s.segment_id == seg_id]
        en = to_en(store.positions_of(ids))
        ax.plot(en[:, 0], en[:, 1], ".", markersize=4,
                color=cmap(k % 10), label=seg_id, zorder=2)
    for idx in plan.switch_points:
        en = to_en(store.positions_of([plan.steps[idx].pano_id]))
        ax.plot(en[0, 0], en[0, 1], "x", color="red", markersize=10,
                markeredgewidth=2, zorder=3,
                label="switch" if idx == plan.switch_points[0] else None)
    ax.set_xlabel("east (m)")
    ax.set_ylabel("north (m)")
    ax.set_title(f"{len(plan.steps)} steps, {len(plan.switch_points)} switches, "
                 f"cost {plan.total_cost:.2f}")
    ax.legend(fontsize=7, loc="best")
    ax.set_aspect("equal")
    fig.savefig(out_png, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return Path(out_png)


def save_session_figure(store, state, out_png) -> Path:
    from .session import loop_closure_error

    fig, ax = plt.subplots(figsize=(7, 7))
    ids = [s.pano_id for s in state.plan.steps]
    en = _local_en(store, ids)
    ax.plot(en[:, 0], en[:, 1], "-", color="steelblue", linewidth=1)
    chunk_len = len(state.chunks[0]) if state.chunks else 0
    boundaries = [k * (chunk_len - 1) for k in range(1, len(state.chunks))]
    for b in boundaries:
        ax.plot(en[b, 0], en[b, 1], "o", color="orange", markersize=8,
                label="chunk boundary" if b == boundaries[0] else None)
    ax.plot(en[0, 0], en[0, 1], "^", color="green", markersize=10, label="start")
    ax.plot(en[-1, 0], en[-1, 1], "v", color="red", markersize=10, label="end")
    title = f"session {state.session_id}: {len(ids)} steps, {state.status}"
    if state.status == "complete":
        title += f", loop closure {loop_closure_error(state):.3f} m"
    ax.set_title(title)
    ax.set_xlabel("east (m)")
    ax.set_ylabel("north (m)")
    ax.legend(fontsize=8, loc="best")
    ax.set_aspect("equal")
    fig.savefig(out_png, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return Path(out_png)


def save_metrics_figure(per_frame_psnr, per_frame_ssim, out_png,
                        psnr_s=None, ssim_s=None) -> Path:
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(8, 6), sharex=True)
    frames = np.arange(len(per_frame_psnr))
    ax1.plot(frames, per_frame_psnr, "-o", markersize=3, color="steelblue",
             label="psnr")
    if psnr_s is not None:
        ax1.plot(frames[:len(psnr_s)], psnr_s, "-s", markersize=3,
                 color="darkorange", label="psnr-s")
    ax1.set_ylabel("PSNR (dB)")
    ax1.legend(fontsize=8)
    ax2.plot(frames, per_frame_ssim, "-o", markersize=3, color="steelblue",
             label="ssim")
    if ssim_s is not None:
        ax2.plot(frames[:len(ssim_s)], ssim_s, "-s", markersize=3,
                 color="darkorange", label="ssim-s")
    ax2.set_ylabel("SSIM")
    ax2.set_xlabel("frame")
    ax2.legend(fontsize=8)
    fig.savefig(out_png, dpi=_DPI, bbox_inches="tight")
    plt.close(fig)
    return Path(out_png)
