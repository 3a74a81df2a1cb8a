"""Command-line surface: ingest | mine-pairs | crop | plan | session-run
| eval | serve.

Every report-producing subcommand writes its delimited output and a
rendered figure side by side. Domain failures print their machine code
and message, then exit 2.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import reports
from .errors import DegenerateInput, StreetloomError
from .geodesy import GeodeticCoord
from .image_io import read_features, read_image, read_mask, write_image
from .metrics import MetricReport, fid_from_features, psnr, ssim, video_metrics
from .pair_mining import PairMiningParams, mine_pairs
from .pano_index import PanoramaStore
from .planner import (PlannerParams, UserPath, chunk_plan, plan_condition_path,
                      serialize_plan, validate_plan)
from .projection import AugmentationParams, crop_perspective
from .session import BACKENDS, SessionEngine, export_session, loop_closure_error

DEFAULT_MAX_GAP_M = 10.0


def _load_corpus(manifest: str, max_gap_m: float):
    store = PanoramaStore()
    report = store.ingest_manifest(manifest)
    segments = store.group_trajectories(max_gap_m=max_gap_m)
    index = store.build_index()
    return store, report, segments, index


def _load_path(path_file: str) -> UserPath:
    payload = json.loads(Path(path_file).read_text(encoding="utf-8"))
    waypoints = payload["waypoints"] if isinstance(payload, dict) else payload
    coords = []
    for w in waypoints:
        if isinstance(w, dict):
            coords.append(GeodeticCoord(w["lat"], w["lon"], w.get("alt", 0.0)))
        else:
            coords.append(GeodeticCoord(w[0], w[1],
                                        w[2] if len(w) > 2 else 0.0))
    return UserPath(waypoints=tuple(coords))


def _disk_image_source(record):
    return read_image(record.image_uri)


def cmd_ingest(args) -> int:
    store, report, segments, _ = _load_corpus(args.manifest, args.max_gap)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "ingest_report.txt").write_text(report.to_text(), encoding="utf-8")
    lines = ["segment_id\ttrajectory_id\tframes\tmean_spacing_m"]
    for seg in segments:
        lines.append(f"{seg.segment_id}\t{seg.trajectory_id}"
                     f"\t{len(seg)}\t{seg.mean_spacing_m:.3f}")
    (out_dir / "segments.tsv").write_text("\n".join(lines) + "\n",
                                          encoding="utf-8")
    reports.save_corpus_figure(store, segments, out_dir / "corpus.png")
    print(f"accepted={report.accepted} rejected={report.rejected} "
          f"segments={len(segments)}")
    return 0


def cmd_mine_pairs(args) -> int:
    store, _, segments, index = _load_corpus(args.manifest, args.max_gap)
    params = PairMiningParams(
        window=args.window, window_stride=args.stride,
        epsilon_m=args.epsilon, min_time_separation_s=args.min_dt)
    pairs = mine_pairs(store, segments, params, index)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with (out_dir / "pairs.jsonl").open("w", encoding="utf-8") as fh:
        for p in pairs:
            fh.write(json.dumps({
                "src_segment_id": p.src_segment_id,
                "src_start": p.src_start,
                "cand_segment_id": p.cand_segment_id,
                "mean_dist_m": p.mean_dist_m,
                "time_gap_s": p.time_gap_s,
                "src_pano_ids": list(p.src_pano_ids),
                "cand_indices": list(p.cand_indices),
            }, sort_keys=True) + "\n")
    reports.save_pairs_figure(pairs, out_dir / "pairs.png")
    print(f"pairs={len(pairs)}")
    return 0


def cmd_crop(args) -> int:
    w, h = (int(v) for v in args.out_size.lower().split("x"))
    params = AugmentationParams(fov_deg=args.fov, out_w=w, out_h=h)
    pano = read_image(args.pano)
    crop = crop_perspective(pano, args.yaw, args.pitch, params)
    write_image(args.output, crop)
    print(f"wrote {args.output}")
    return 0


def cmd_plan(args) -> int:
    store, _, segments, index = _load_corpus(args.manifest, args.max_gap)
    params = PlannerParams(corridor_m=args.corridor, gap_max_m=args.gap_max)
    path = _load_path(args.path)
    plan = plan_condition_path(store, index, segments, path, params)
    diagnostics = validate_plan(plan, store, params)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "plan.tsv").write_text(serialize_plan(plan), encoding="utf-8")
    diag_lines = [
        f"steps={len(plan.steps)}",
        f"switches={len(plan.switch_points)}",
        f"total_cost={plan.total_cost:.6f}",
        f"path_length_m={plan.path_length_m:.3f}",
        f"max_gap_m={diagnostics.max_gap_m:.3f}",
        f"coverage_fraction={diagnostics.coverage_fraction:.4f}",
    ]
    for k, d in zip(plan.switch_points, diagnostics.switch_discontinuities_m):
        diag_lines.append(f"switch_at_step_{k}_discontinuity_m={d:.3f}")
    (out_dir / "diagnostics.txt").write_text("\n".join(diag_lines) + "\n",
                                             encoding="utf-8")
    reports.save_plan_figure(store, path, plan, out_dir / "plan.png")
    print(f"steps={len(plan.steps)} switches={len(plan.switch_points)}")
    return 0


def cmd_session_run(args) -> int:
    store, _, segments, index = _load_corpus(args.manifest, args.max_gap)
    params = PlannerParams(corridor_m=args.corridor, gap_max_m=args.gap_max)
    w, h = (int(v) for v in args.crop_size.lower().split("x"))
    aug = AugmentationParams(out_w=w, out_h=h)
    engine = SessionEngine(store, index, segments, _disk_image_source,
                           params, aug, args.chunk_len)
    path = _load_path(args.path)
    # First image: crop of the first planned pano looking along the path.
    plan = plan_condition_path(store, index, segments, path, params)
    positions = store.positions_of([s.pano_id for s in plan.steps[:2]])
    from .geodesy import ecef_heading_deg
    yaw0 = (ecef_heading_deg(positions[0], positions[1])
            if len(plan.steps) > 1 else 0.0)
    first_pano = crop_perspective(
        _disk_image_source(store.get(plan.steps[0].pano_id)), yaw0, 0.0, aug)

    state = engine.start_session(first_pano, path, args.seed)
    state.backend_name = args.backend
    engine.run(state, BACKENDS[args.backend]())
    out_dir = Path(args.out)
    manifest_path = export_session(state, out_dir, store)
    reports.save_session_figure(store, state, out_dir / "session.png")
    print(f"session={state.session_id} frames={state.unique_frame_count()} "
          f"loop_closure_m={loop_closure_error(state):.6f}")
    print(f"manifest={manifest_path}")
    return 0


def _frames_from_dir(directory: str) -> list[np.ndarray]:
    paths = sorted(Path(directory).glob("*.png"))
    if not paths:
        raise DegenerateInput(f"no frames in {directory}")
    return [read_image(p) for p in paths]


def cmd_eval(args) -> int:
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    report = MetricReport()
    per_frame_psnr: list[float] = []
    per_frame_ssim: list[float] = []
    if args.gen and args.gt:
        gen = _frames_from_dir(args.gen)
        gt = _frames_from_dir(args.gt)
        masks = None
        if args.masks:
            masks = [read_mask(p) for p in sorted(Path(args.masks).glob("*.png"))]
        report = video_metrics(gen, gt, masks)
        per_frame_psnr = [psnr(g, t) for g, t in zip(gen, gt)]
        per_frame_ssim = [ssim(g, t) for g, t in zip(gen, gt)]
    if args.features_real and args.features_gen:
        fid, regularized = fid_from_features(
            read_features(args.features_real), read_features(args.features_gen))
        report.fid = fid
        report.fid_regularized = regularized
    (out_dir / "metrics.txt").write_text(report.to_text(), encoding="utf-8")
    if per_frame_psnr:
        reports.save_metrics_figure(per_frame_psnr, per_frame_ssim,
                                    out_dir / "metrics.png")
    sys.stdout.write(report.to_text())
    return 0


def cmd_serve(args) -> int:
    from .server import create_app, serve

    store, _, segments, index = _load_corpus(args.manifest, args.max_gap)
    params = PlannerParams(corridor_m=args.corridor, gap_max_m=args.gap_max)
    w, h = (int(v) for v in args.crop_size.lower().split("x"))
    aug = AugmentationParams(out_w=w, out_h=h)
    app = create_app(store, index, segments, _disk_image_source,
                     args.session_dir, params, aug, args.chunk_len)
    serve(app, host=args.host, port=args.port)
    return 0


def _add_corpus_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="JSONL corpus manifest")
    p.add_argument("--max-gap", type=float, default=DEFAULT_MAX_GAP_M,
                   dest="max_gap",
                   help="trajectory split threshold, meters")


def _add_planner_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--corridor", type=float, default=10.0,
                   help="corridor half-width, meters")
    p.add_argument("--gap-max", type=float, default=8.0, dest="gap_max",
                   help="max spacing between consecutive plan steps, meters")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="streetloom",
        description="Geo-registered panorama corpus tooling: indexing, "
                    "pair mining, projection, retrieval planning, "
                    "autoregressive sessions, and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a manifest, report, and index")
    _add_corpus_args(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("mine-pairs", help="mine cross-time aligned clip pairs")
    _add_corpus_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--window", type=int, default=73)
    p.add_argument("--stride", type=int, default=16)
    p.add_argument("--epsilon", type=float, default=5.0)
    p.add_argument("--min-dt", type=float, default=3600.0, dest="min_dt")
    p.set_defaults(func=cmd_mine_pairs)

    p = sub.add_parser("crop", help="pinhole crop from an equirect pano")
    p.add_argument("--pano", required=True)
    p.add_argument("--yaw", type=float, required=True)
    p.add_argument("--pitch", type=float, default=0.0)
    p.add_argument("--fov", type=float, default=65.0)
    p.add_argument("--out", default="832x480", dest="out_size",
                   help="output size WxH")
    p.add_argument("--output", required=True, help="output image file")
    p.set_defaults(func=cmd_crop)

    p = sub.add_parser("plan", help="plan a conditioning path")
    _add_corpus_args(p)
    _add_planner_args(p)
    p.add_argument("--path", required=True, help="waypoints JSON file")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("session-run", help="run a full autoregressive session")
    _add_corpus_args(p)
    _add_planner_args(p)
    p.add_argument("--path", required=True, help="waypoints JSON file")
    p.add_argument("--out", required=True)
    p.add_argument("--backend", default="mock-echo",
                   choices=sorted(BACKENDS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--chunk-len", type=int, default=73, dest="chunk_len")
    p.add_argument("--crop-size", default="832x480", dest="crop_size")
    p.set_defaults(func=cmd_session_run)

    p = sub.add_parser("eval", help="metrics over frame directories")
    p.add_argument("--gen", help="generated frames directory")
    p.add_argument("--gt", help="ground-truth frames directory")
    p.add_argument("--masks", help="dynamic-mask directory")
    p.add_argument("--features-real", dest="features_real")
    p.add_argument("--features-gen", dest="features_gen")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP gateway")
    _add_corpus_args(p)
    _add_planner_args(p)
    p.add_argument("--session-dir", required=True, dest="session_dir")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8008)
    p.add_argument("--chunk-len", type=int, default=73, dest="chunk_len")
    p.add_argument("--crop-size", default="832x480", dest="crop_size")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StreetloomError as e:
        print(f"{e.code}: {e.message}", file=sys.stderr)
        if e.detail is not None:
            print(json.dumps(e.detail, default=str), file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"not_found: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
