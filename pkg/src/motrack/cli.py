"""Command-line interface: track, interp, eval, gmc subcommands."""

import argparse
import logging
import os
import sys

from . import gmc as gmc_mod
from . import metrics, mot_io, postprocess
from .association import FusionParams
from .tracker import Tracker, TrackerConfig


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motrack",
        description="Tracking over file-supplied detections, with "
        "camera-motion compensation and CLEAR-style evaluation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("track", help="run the tracker on a detection file")
    p.add_argument("--detections", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--embeddings", help="appearance embedding file (enables ReID fusion)")
    p.add_argument(
        "--gmc",
        default="none",
        help="'none', 'file:WARPS', or 'compute:FRAME_DIR' (PGM frames)",
    )
    p.add_argument("--no-cmc-cov", action="store_true",
                   help="skip the covariance part of the warp correction")
    p.add_argument("--pred", action="store_true",
                   help="emit one extrapolated box when a track is first lost")
    p.add_argument("--tau", type=float, default=0.6)
    p.add_argument("--eta", type=float, default=0.7)
    p.add_argument("--low-floor", type=float, default=0.1)
    p.add_argument("--match-first", type=float, default=0.8)
    p.add_argument("--match-second", type=float, default=0.5)
    p.add_argument("--match-unconfirmed", type=float, default=0.7)
    p.add_argument("--proximity", type=float, default=0.5)
    p.add_argument("--appearance", type=float, default=0.2)
    p.add_argument("--buffer", type=int, default=30)
    p.add_argument("--alpha", type=float, default=0.9)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--downscale", type=int, default=1)

    p = sub.add_parser("interp", help="linearly interpolate track gaps")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--max-gap", type=int, default=20)

    p = sub.add_parser("eval", help="evaluate results against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--results", required=True)
    p.add_argument("--cmota-csv", help="write the cumulative-MOTA series here")
    p.add_argument("--iou", type=float, default=0.5)

    p = sub.add_parser("gmc", help="estimate warps from a directory of PGM frames")
    p.add_argument("--frames", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--downscale", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)

    return parser


def _frame_files(directory) -> dict[int, str]:
    """PGM files named by frame number (e.g. 000001.pgm)."""
    out = {}
    for name in os.listdir(directory):
        stem, ext = os.path.splitext(name)
        if ext.lower() != ".pgm":
            continue
        try:
            out[int(stem)] = os.path.join(directory, name)
        except ValueError:
            continue
    if not out:
        raise FileNotFoundError(f"no frame-numbered .pgm files in {directory}")
    return out


def _compute_warps(frame_dir, downscale, seed) -> dict[int, gmc_mod.AffineWarp]:
    """Warp for frame k maps frame k-1 coordinates into frame k."""
    files = _frame_files(frame_dir)
    cfg = gmc_mod.GmcConfig(downscale=downscale, seed=seed)
    warps = {}
    prev = None
    prev_frame = None
    for frame in sorted(files):
        img = gmc_mod.read_pgm(files[frame])
        if prev is not None and frame == prev_frame + 1:
            warp, _ = gmc_mod.estimate(prev, img, cfg)
            warps[frame] = warp
        prev, prev_frame = img, frame
    return warps


def _cmd_track(args) -> int:
    dets = mot_io.read_detections(args.detections)
    use_reid = args.embeddings is not None
    if use_reid:
        mot_io.read_embeddings(args.embeddings, dets)

    if args.gmc == "none":
        warp_source = None
    elif args.gmc.startswith("file:"):
        warp_source = gmc_mod.WarpSource.from_file(args.gmc[len("file:"):])
    elif args.gmc.startswith("compute:"):
        warps = _compute_warps(args.gmc[len("compute:"):], args.downscale, args.seed)
        warp_source = gmc_mod.WarpSource(warps)
    else:
        raise ValueError(f"unknown --gmc mode {args.gmc!r}")

    cfg = TrackerConfig(
        tau=args.tau,
        eta=args.eta,
        low_floor=args.low_floor,
        match_thresh_first=args.match_first,
        match_thresh_second=args.match_second,
        match_thresh_unconfirmed=args.match_unconfirmed,
        track_buffer=args.buffer,
        alpha=args.alpha,
        fusion=FusionParams(theta_iou=args.proximity, theta_emb=args.appearance),
        use_reid=use_reid,
        use_cmc=warp_source is not None,
        cmc_cov=not args.no_cmc_cov,
        output_pred=args.pred,
    )
    tracker = Tracker(cfg)
    last_frame = max(dets, default=0)
    rows = []
    for frame in range(1, last_frame + 1):
        warp = warp_source(frame) if warp_source is not None else None
        for tid, box, score in tracker.step(frame, dets.get(frame, []), warp):
            rows.append((frame, tid, box, score))
    mot_io.write_results(args.output, rows)
    return 0


def _cmd_interp(args) -> int:
    series = mot_io.read_results_series(args.input)
    series = postprocess.interpolate_all(series, args.max_gap)
    mot_io.write_results(args.output, mot_io.series_to_rows(series))
    return 0


def _cmd_eval(args) -> int:
    gt = mot_io.read_tracks(args.gt)
    pred = mot_io.read_tracks(args.results, keep_unflagged=True)
    frames, numbers = mot_io.eval_frames(gt, pred)
    summary = metrics.evaluate(frames, args.iou, numbers)
    sys.stdout.write(metrics.format_report(summary))
    if args.cmota_csv:
        metrics.write_cmota_csv(args.cmota_csv, summary.cmota)
    return 0


def _cmd_gmc(args) -> int:
    warps = _compute_warps(args.frames, args.downscale, args.seed)
    gmc_mod.save_warps(args.output, warps)
    return 0


_COMMANDS = {
    "track": _cmd_track,
    "interp": _cmd_interp,
    "eval": _cmd_eval,
    "gmc": _cmd_gmc,
}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
