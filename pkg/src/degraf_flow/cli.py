"""Command-line entry point: ``degraf-flow {detect,flow,eval,bench}``.

Exit codes: 0 success, 2 usage or input error, 1 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import io
from .degraf import detect_grid
from .evaluation import (
    flow_metrics,
    flow_to_color,
    read_flow_kitti,
    write_flow_kitti,
    write_metrics,
)
from .pipeline import BASELINE_DETECTORS, PipelineConfig, StageError, estimate_flow, run_benchmark

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2


class InputError(Exception):
    pass


def _load_gray(path: str) -> np.ndarray:
    try:
        return io.read_gray(path)
    except FileNotFoundError as exc:
        raise InputError(str(exc)) from exc
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _load_flow(path: str):
    try:
        return read_flow_kitti(path)
    except (FileNotFoundError, ValueError) as exc:
        raise InputError(str(exc)) from exc


def _config(args) -> PipelineConfig:
    cfg = PipelineConfig()
    if args.config:
        if not os.path.isfile(args.config):
            raise InputError(f"no such config file: {args.config}")
        try:
            cfg = PipelineConfig.from_json(args.config)
        except (ValueError, TypeError) as exc:
            raise InputError(f"{args.config}: {exc}") from exc
    try:
        return cfg.with_overrides(
            window=args.window, step=args.step, k=args.k, lam=args.lam, sigma=args.sigma,
            levels=args.levels, threads=args.threads, out_dir=args.out_dir,
            fb_filter=False if args.no_fb_filter else None,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _out_dir(cfg: PipelineConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "config.json", "w") as fh:
        json.dump(cfg.to_dict(), fh, indent=2)
    return out


def _overlay(image: np.ndarray, points: np.ndarray) -> np.ndarray:
    rgb = np.repeat(np.clip(np.rint(image), 0, 255).astype(np.uint8)[..., None], 3, axis=2)
    h, w = image.shape
    px = np.clip(np.rint(points[:, 0]).astype(int), 0, w - 1)
    py = np.clip(np.rint(points[:, 1]).astype(int), 0, h - 1)
    rgb[py, px] = (255, 0, 0)
    return rgb


def cmd_detect(args) -> int:
    cfg = _config(args)
    image = _load_gray(args.image)
    try:
        grid = detect_grid(image, cfg.detector)
    except ValueError as exc:
        raise InputError(str(exc)) from exc
    out = _out_dir(cfg)
    io.write_keypoints_csv(out / "keypoints.csv", grid.points)
    if args.overlay:
        io.write_rgb(out / "overlay.png", _overlay(image, grid.points))
    print(f"{len(grid)} keypoints -> {out / 'keypoints.csv'}")
    return EXIT_OK


def cmd_flow(args) -> int:
    cfg = _config(args)
    f1 = _load_gray(args.frame1)
    f2 = _load_gray(args.frame2)
    if f1.shape != f2.shape:
        raise InputError(
            f"frame sizes differ: {args.frame1} is {f1.shape[1]}x{f1.shape[0]}, "
            f"{args.frame2} is {f2.shape[1]}x{f2.shape[0]}"
        )
    points = None
    if args.keypoints:
        try:
            points = io.read_keypoints_csv(args.keypoints)
        except (OSError, ValueError) as exc:
            raise InputError(str(exc)) from exc
    res = estimate_flow(f1, f2, cfg, points=points)
    out = _out_dir(cfg)
    write_flow_kitti(res.flow, out / "flow.png")
    res.sparse.to_csv(out / "sparse.csv")
    if args.color:
        io.write_rgb(out / "flow_color.png", flow_to_color(res.flow))
    timing = dict(res.timings)
    timing["points"] = len(res.sparse)
    timing["valid_points"] = int(res.sparse.valid.sum())
    with open(out / "timing.json", "w") as fh:
        json.dump(timing, fh, indent=2)
    print(json.dumps(timing))
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _config(args)
    pred = _load_flow(args.pred)
    gt_noc = _load_flow(args.gt_noc)
    gt_occ = _load_flow(args.gt_occ) if args.gt_occ else None
    for name, gt in (("gt_noc", gt_noc), ("gt_occ", gt_occ)):
        if gt is not None and gt.shape != pred.shape:
            raise InputError(f"{name} is {gt.shape[1]}x{gt.shape[0]} but prediction is {pred.shape[1]}x{pred.shape[0]}")
    m = flow_metrics(pred, gt_noc, gt_occ)
    out = _out_dir(cfg)
    frame = args.frame or Path(args.pred).stem
    summary = write_metrics(out / "metrics.csv", out / "metrics.json", [(frame, m)])
    print(json.dumps(summary["per_frame"][frame]))
    return EXIT_OK


def _read_pair_list(path: str):
    if not os.path.isfile(path):
        raise InputError(f"no such pair list: {path}")
    base = Path(path).resolve().parent
    pairs = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            row = [c.strip() for c in row if c.strip()]
            if not row or row[0].startswith("#"):
                continue
            if len(row) not in (3, 4):
                raise InputError(f"{path}: expected frame1,frame2,gt_noc[,gt_occ], got {row}")
            pairs.append([str(base / c) for c in row] + [None] * (4 - len(row)))
    if not pairs:
        raise InputError(f"{path}: no frame pairs listed")
    return pairs


def cmd_bench(args) -> int:
    cfg = _config(args)
    listed = _read_pair_list(args.pairs)
    pairs = []
    for f1p, f2p, nocp, occp in listed:
        f1, f2 = _load_gray(f1p), _load_gray(f2p)
        if f1.shape != f2.shape:
            raise InputError(f"frame sizes differ: {f1p} vs {f2p}")
        pairs.append((f1, f2, _load_flow(nocp), _load_flow(occp) if occp else None))

    detectors = [d.strip() for d in args.detectors.split(",") if d.strip()]
    for d in detectors:
        if d not in BASELINE_DETECTORS and not d.startswith("csv:"):
            raise InputError(f"unknown detector {d!r}; choose from {', '.join(BASELINE_DETECTORS)} or csv:PATTERN")

    def load_points(name, i):
        # csv:PATTERN with {stem} replaced by frame1's file stem
        pattern = name[len("csv:"):]
        path = pattern.format(stem=Path(listed[i][0]).stem)
        if not os.path.isfile(path):
            raise InputError(f"no such keypoint file: {path}")
        return io.read_keypoints_csv(path)

    rows = run_benchmark(pairs, cfg, detectors, load_points)
    out = _out_dir(cfg)
    with open(out / "bench.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["detector", "points", "detection_time", "epe", "out"])
        for r in rows:
            writer.writerow([r.detector, f"{r.points:.1f}", f"{r.detection_time:.4f}",
                             "" if r.epe is None else f"{r.epe:.4f}", "" if r.out is None else f"{r.out:.4f}"])
    print(f"{'detector':<16}{'# points':>10}{'EPE':>10}{'det. time (s)':>16}")
    for r in rows:
        epe = "n/a" if r.epe is None else f"{r.epe:.3f}"
        print(f"{r.detector:<16}{r.points:>10.0f}{epe:>10}{r.detection_time:>16.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override its values")
    common.add_argument("--window", type=int, help="DeGraF window size (w = h)")
    common.add_argument("--step", type=int, help="DeGraF step size")
    common.add_argument("--k", type=int, help="neighbors per interpolation fit")
    common.add_argument("--lambda", dest="lam", type=float, help="geodesic edge penalty")
    common.add_argument("--sigma", type=float, help="interpolation kernel width")
    common.add_argument("--levels", type=int, help="tracker pyramid levels")
    common.add_argument("--threads", type=int, help="worker threads (default: all cores)")
    common.add_argument("--out-dir", help="output directory (default: .)")
    common.add_argument("--no-fb-filter", action="store_true", help="skip forward-backward filtering")

    parser = argparse.ArgumentParser(prog="degraf-flow", description="Sparse-to-dense optical flow: detect, track, interpolate and evaluate.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", parents=[common], help="detect DeGraF keypoints")
    p.add_argument("image")
    p.add_argument("--overlay", action="store_true", help="also write overlay.png")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("flow", parents=[common], help="estimate dense flow between two frames")
    p.add_argument("frame1")
    p.add_argument("frame2")
    p.add_argument("--keypoints", help="x,y CSV used instead of the detector")
    p.add_argument("--color", action="store_true", help="also write flow_color.png")
    p.set_defaults(func=cmd_flow)

    p = sub.add_parser("eval", parents=[common], help="score a KITTI flow PNG against ground truth")
    p.add_argument("pred")
    p.add_argument("gt_noc")
    p.add_argument("gt_occ", nargs="?")
    p.add_argument("--frame", help="frame name for the CSV row (default: prediction file stem)")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bench", parents=[common], help="compare keypoint detectors")
    p.add_argument("pairs", help="CSV lines frame1,frame2,gt_noc[,gt_occ]")
    p.add_argument("--detectors", default=",".join(BASELINE_DETECTORS),
                   help="comma list of degraf, grid, gradmax, csv:PATTERN ({stem} = frame1 stem)")
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"degraf-flow {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except StageError as exc:
        print(f"degraf-flow {args.command}: {exc.stage} stage failed: {exc.cause}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception as exc:  # noqa: BLE001
        print(f"degraf-flow {args.command}: internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
