"""Command-line entry point: ``python -m app.cli {track,eval,synth,bench,interp}``."""

import argparse
import json
import logging
import os
import sys
import typing
from concurrent.futures import ThreadPoolExecutor
from enum import Enum
from typing import Dict, List, Optional, Sequence

from pydantic import ValidationError

from app import __version__
from app.config import settings
from app.exceptions import InputFormatError, TrackingError
from app.schemas.tracking import RunManifest, Strategy, TrackerConfig
from app.services.bench_service import format_bench, get_bench_service
from app.services.metrics_service import format_report, get_metrics_service, write_report
from app.services.mot_io_service import (
    GridReader,
    attach_grids,
    linear_interpolation,
    read_detections,
    read_ground_truth,
    read_results,
    write_results,
)
from app.services.plot_service import plot_overlay
from app.services.synth_service import PRESETS, get_synth_service, preset_spec
from app.services.tracker_service import get_tracker_service
from app.utils.common import configure_logging

logger = logging.getLogger("app.cli")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INPUT = 2
EXIT_INTERNAL = 3

DETECTIONS_FILE = "det.txt"
GRID_FILE = "grid.bin"


class UsageError(Exception):
    pass


class ArgumentParser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; usage errors here exit with 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# --------------------------- config flags --------------------------- #
def _flag_kind(annotation):
    if typing.get_origin(annotation) is typing.Union:
        args = [a for a in typing.get_args(annotation) if a is not type(None)]
        annotation = args[0]
    return annotation


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    """One kebab-case flag per TrackerConfig field; unset flags keep the model default."""
    group = parser.add_argument_group("tracker configuration")
    for name, info in TrackerConfig.model_fields.items():
        flag = "--" + name.replace("_", "-")
        kind = _flag_kind(info.annotation)
        default = info.default.value if isinstance(info.default, Enum) else info.default
        help_text = f"{info.description or name} (default: {default})"
        if kind is bool:
            group.add_argument(flag, dest=name, action=argparse.BooleanOptionalAction, default=None, help=help_text)
        elif isinstance(kind, type) and issubclass(kind, Enum):
            group.add_argument(flag, dest=name, choices=[m.value for m in kind], default=None, help=help_text)
        else:
            group.add_argument(flag, dest=name, type=kind, default=None, help=help_text)


def config_from_args(args: argparse.Namespace) -> TrackerConfig:
    overrides = {name: getattr(args, name) for name in TrackerConfig.model_fields if getattr(args, name, None) is not None}
    try:
        return TrackerConfig(**overrides)
    except ValidationError as e:
        raise UsageError(f"invalid tracker configuration: {e}") from e


def _write_manifest(path: str, manifest: RunManifest) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest.model_dump(mode="json"), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(command: str, argv: Sequence[str], **kwargs) -> RunManifest:
    return RunManifest(command=command, argv=list(argv), version=__version__, **kwargs)


def _require_file(path: str, what: str) -> None:
    if not os.path.isfile(path):
        raise InputFormatError(f"{what} not found", source=path)


# ------------------------------ track ------------------------------ #
def _track_one(det_path: str, grid_path: Optional[str], out_path: str, config: TrackerConfig) -> int:
    frames = read_detections(det_path)
    if grid_path is not None:
        with GridReader(grid_path) as reader:
            frames = attach_grids(frames, reader)
    records = get_tracker_service().track_sequence(frames, config)
    out_dir = os.path.dirname(os.path.abspath(out_path))
    os.makedirs(out_dir, exist_ok=True)
    write_results(out_path, records)
    logger.info("Wrote %d rows to %s", len(records), out_path)
    return len(records)


def _resolve_grid(args, seq_dir: Optional[str], config: TrackerConfig) -> Optional[str]:
    grid = args.grid
    if grid is None and seq_dir is not None and os.path.isfile(os.path.join(seq_dir, GRID_FILE)):
        grid = os.path.join(seq_dir, GRID_FILE)
    if grid is not None and config.strategy != Strategy.SIMPLETRACK:
        logger.warning("Strategy %s does not use embedding grids; ignoring %s", config.strategy.value, grid)
        return None
    if grid is not None and not config.retrieval_enabled:
        logger.info("Retrieval disabled; not loading %s", grid)
        return None
    return grid


def cmd_track(args, argv) -> int:
    config = config_from_args(args)
    dets = args.dets
    if os.path.isdir(dets) and not os.path.isfile(os.path.join(dets, DETECTIONS_FILE)):
        return _track_many(args, argv, config)

    seq_dir = dets if os.path.isdir(dets) else None
    det_path = os.path.join(dets, DETECTIONS_FILE) if seq_dir else dets
    _require_file(det_path, "detections file")
    grid_path = _resolve_grid(args, seq_dir, config)
    if grid_path is not None:
        _require_file(grid_path, "grid file")
    _track_one(det_path, grid_path, args.out, config)
    inputs = {"dets": det_path}
    if grid_path is not None:
        inputs["grid"] = grid_path
    _write_manifest(args.out + ".manifest.json",
                    _manifest("track", argv, config=config, inputs=inputs, outputs={"results": args.out}))
    return EXIT_OK


def _track_many(args, argv, config: TrackerConfig) -> int:
    """Track every sequence directory below ``args.dets`` into ``args.out/<sequence>.txt``."""
    sequences = sorted(
        d for d in os.listdir(args.dets) if os.path.isfile(os.path.join(args.dets, d, DETECTIONS_FILE))
    )
    if not sequences:
        raise InputFormatError(f"no sequence directories containing {DETECTIONS_FILE}", source=args.dets)
    if args.grid is not None:
        raise UsageError("--grid cannot be combined with a directory of sequences")
    os.makedirs(args.out, exist_ok=True)

    jobs = []
    for name in sequences:
        seq_dir = os.path.join(args.dets, name)
        grid_path = _resolve_grid(args, seq_dir, config)
        jobs.append((name, os.path.join(seq_dir, DETECTIONS_FILE), grid_path, os.path.join(args.out, f"{name}.txt")))

    workers = max(1, args.jobs or settings.DEFAULT_JOBS)
    logger.info("Tracking %d sequences with %d workers", len(jobs), workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_track_one, det, grid, out, config) for _, det, grid, out in jobs]
        for future in futures:
            future.result()

    inputs: Dict[str, str] = {}
    outputs: Dict[str, str] = {}
    for name, det, grid, out in jobs:
        inputs[name] = det
        if grid is not None:
            inputs[f"{name}:grid"] = grid
        outputs[name] = out
    _write_manifest(os.path.join(args.out, "manifest.json"),
                    _manifest("track", argv, config=config, inputs=inputs, outputs=outputs))
    return EXIT_OK


# --------------------------- other commands --------------------------- #
def cmd_eval(args, argv) -> int:
    _require_file(args.gt, "ground-truth file")
    _require_file(args.res, "results file")
    gt = read_ground_truth(args.gt, min_visibility=args.min_visibility)
    res = read_results(args.res)
    report = get_metrics_service().evaluate(gt, res, args.iou_thresh, name=os.path.basename(args.res))
    sys.stdout.write(format_report([report]))
    outputs = {}
    if args.report:
        write_report(args.report, report)
        outputs["report"] = args.report
    if args.plot:
        plot_overlay(gt, res, args.plot)
        outputs["plot"] = args.plot
    if args.report:
        _write_manifest(args.report + ".manifest.json",
                        _manifest("eval", argv, inputs={"gt": args.gt, "results": args.res}, outputs=outputs,
                                  extra={"iou_thresh": args.iou_thresh, "min_visibility": args.min_visibility}))
    return EXIT_OK


def cmd_synth(args, argv) -> int:
    spec = preset_spec(args.preset, args.seed)
    service = get_synth_service()
    scenario = service.generate(spec)
    paths = service.write_scenario(args.out, scenario)
    _write_manifest(
        os.path.join(args.out, "manifest.json"),
        _manifest("synth", argv, seed=spec.seed, outputs=paths, extra={"preset": args.preset}),
    )
    return EXIT_OK


def cmd_bench(args, argv) -> int:
    report = get_bench_service().bench_costs(
        num_tracks=args.tracks,
        num_dets=args.dets,
        emb_dim=args.dim,
        iterations=args.iterations,
        seed=args.seed,
        warmup=args.warmup,
    )
    sys.stdout.write(format_bench(report))
    if args.out:
        out_dir = os.path.dirname(os.path.abspath(args.out))
        os.makedirs(out_dir, exist_ok=True)
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report.model_dump(mode="json"), fh, indent=2, sort_keys=True)
            fh.write("\n")
        params = {"tracks": args.tracks, "dets": args.dets, "dim": args.dim,
                  "iterations": args.iterations, "warmup": args.warmup}
        _write_manifest(args.out + ".manifest.json",
                        _manifest("bench", argv, seed=args.seed, outputs={"report": args.out}, extra=params))
    return EXIT_OK


def cmd_interp(args, argv) -> int:
    _require_file(args.res, "results file")
    records = linear_interpolation(read_results(args.res), args.max_gap)
    os.makedirs(os.path.dirname(os.path.abspath(args.out)), exist_ok=True)
    write_results(args.out, records)
    _write_manifest(args.out + ".manifest.json",
                    _manifest("interp", argv, inputs={"results": args.res}, outputs={"results": args.out},
                              extra={"max_gap": args.max_gap}))
    return EXIT_OK


# ------------------------------ parser ------------------------------ #
def build_parser() -> ArgumentParser:
    parser = ArgumentParser(prog="app.cli", description="SimpleTrack multi-object tracking tools")
    parser.add_argument("--log-level", default=None, help="Overrides LOG_LEVEL")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    p = sub.add_parser("track", help="Run the tracker on a detections file or sequence directories")
    p.add_argument("--dets", required=True, help="Detections file, sequence directory, or parent of sequences")
    p.add_argument("--grid", default=None, help="Embedding-grid sidecar (defaults to grid.bin in the sequence)")
    p.add_argument("--out", required=True, help="Results file, or output directory for several sequences")
    p.add_argument("--jobs", type=int, default=None, help="Parallel sequences (default: DEFAULT_JOBS)")
    add_config_flags(p)
    p.set_defaults(func=cmd_track)

    p = sub.add_parser("eval", help="Evaluate results against ground truth")
    p.add_argument("--gt", required=True)
    p.add_argument("--res", required=True)
    p.add_argument("--iou-thresh", type=float, default=settings.EVAL_IOU_THRESHOLD)
    p.add_argument("--min-visibility", type=float, default=settings.EVAL_MIN_VISIBILITY)
    p.add_argument("--report", default=None, help="Write KEY=value metrics to this file")
    p.add_argument("--plot", default=None, help="Write an SVG overlay of GT and result boxes")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("synth", help="Generate a synthetic scenario")
    p.add_argument("--preset", required=True, choices=sorted(PRESETS))
    p.add_argument("--seed", type=int, default=None, help="Defaults to the preset's seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("bench", help="Time cost-matrix construction")
    p.add_argument("--tracks", type=int, default=50)
    p.add_argument("--dets", type=int, default=50)
    p.add_argument("--dim", type=int, default=settings.EMB_DIM)
    p.add_argument("--iterations", type=int, default=settings.BENCH_ITERATIONS)
    p.add_argument("--warmup", type=int, default=settings.BENCH_WARMUP)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="Write the timings as JSON to this file")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("interp", help="Fill short gaps in a results file by linear interpolation")
    p.add_argument("--res", required=True)
    p.add_argument("--max-gap", type=int, default=settings.INTERP_MAX_GAP)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_interp)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    configure_logging(args.log_level)

    try:
        return args.func(args, argv)
    except UsageError as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except TrackingError as e:
        logger.error("%s", e)
        return e.exit_code
    except ValueError as e:
        # argument values the services reject, e.g. an IoU threshold outside (0, 1)
        logger.error("Invalid argument: %s", e)
        return EXIT_USAGE
    except (FileNotFoundError, IsADirectoryError, PermissionError) as e:
        logger.error("Cannot read input: %s", e)
        return EXIT_INPUT
    except Exception:
        logger.exception("Unexpected failure in %s", args.command)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
