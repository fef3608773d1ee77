"""Command-line entry points.

Exit codes: 0 success, 1 validation failure, 2 usage or I/O error.
Summaries go to stdout as JSON; logs go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__

logger = logging.getLogger("ptzkit")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_USAGE = 2


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"size must look like 640x360, got {text!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ptzkit",
        description="Active-vision PTZ toolkit: synthesize, process, verify, "
                    "report and serve camera episodes.",
    )
    parser.add_argument("--version", action="version", version=f"ptzkit {__version__}")
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON file with defaults for the chosen subcommand; "
                             "explicit flags win")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic episode")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=20)
    p.add_argument("--targets", type=int, default=1)
    p.add_argument("--size", type=_parse_size, default=(640, 360))
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("process", help="run the image pipeline over an episode")
    p.add_argument("--input", type=Path, required=True)
    p.add_argument("--output", type=Path, required=True)
    p.add_argument("--smax", type=float, default=7.0)
    p.add_argument("--alpha", type=float, default=1.2)
    p.add_argument("--sr", choices=("network", "bicubic", "none"), default="bicubic")
    p.add_argument("--sr-weights", type=Path, default=None)
    p.add_argument("--miss-policy", choices=("hold_last", "passthrough"),
                   default="passthrough")
    p.add_argument("--task", default="")
    p.add_argument("--audit", action="store_true",
                   help="re-detect on outputs and report the centered fraction")

    p = sub.add_parser("serve", help="run the teleoperation server")
    p.add_argument("--port", type=int, default=8765)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--size", type=_parse_size, default=(640, 360))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--targets", type=int, default=2)
    p.add_argument("--sessions-dir", type=Path, default=Path("episodes"))
    p.add_argument("--console-dir", type=Path, default=None)

    p = sub.add_parser("verify", help="validate an episode directory")
    p.add_argument("--episode", type=Path, required=True)

    p = sub.add_parser("report", help="write CSV and figures for an episode")
    p.add_argument("--episode", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    return parser


def _apply_config(args: argparse.Namespace, argv: list[str]) -> argparse.Namespace:
    """Overlay --config file values under explicitly passed flags."""
    if not args.config:
        return args
    try:
        with open(args.config) as fh:
            overrides = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SystemExit(f"ptzkit: cannot read config: {exc}")
    explicit = {a.lstrip("-").split("=")[0].replace("-", "_") for a in argv if a.startswith("--")}
    for key, value in overrides.items():
        attr = key.replace("-", "_")
        if attr in explicit or not hasattr(args, attr):
            continue
        if attr == "size":
            value = tuple(value)
        if attr in ("out", "input", "output", "episode", "sessions_dir", "console_dir"):
            value = Path(value)
        setattr(args, attr, value)
    return args


def cmd_synth(args) -> int:
    from .camera_sim import make_scene
    from .geometry import FrameSize
    from .synth import synth_episode

    scene = make_scene(seed=args.seed, n_targets=args.targets)
    manifest = synth_episode(
        args.out, seed=args.seed, frames=args.frames, n_targets=args.targets,
        out_size=FrameSize(*args.size), scene=scene,
    )
    _emit({
        "episode": str(args.out),
        "records": manifest.records,
        "frame_size": list(manifest.frame_size),
        # the camera tracks target 0; use its color as --task when processing
        "aimed_target": scene.targets[0].color if scene.targets else None,
        "targets": [t.color for t in scene.targets],
    })
    return EXIT_OK


def cmd_process(args) -> int:
    from .camera_sim import DETECTOR_RULES
    from .detection import DetectorConfig
    from .pipeline import PipelineConfig, process_episode
    from .superres import load_weights
    from .warp import ZoomParams

    if not args.input.exists():
        logger.error("input episode %s does not exist", args.input)
        return EXIT_USAGE
    network = None
    if args.sr == "network" and args.sr_weights:
        network = load_weights(args.sr_weights)
    cfg = PipelineConfig(
        zoom=ZoomParams(s_max=args.smax, alpha=args.alpha),
        detector=DetectorConfig(mode="reference_blob", rules=DETECTOR_RULES),
        sr_mode=args.sr,
        miss_policy=args.miss_policy,
        task_label=args.task,
        network=network,
    )
    summary = process_episode(args.input, args.output, cfg, audit_centering=args.audit)
    _emit(summary)
    return EXIT_OK


def cmd_serve(args) -> int:
    import socket

    import uvicorn

    from .server import create_app

    # uvicorn logs bind failures instead of raising; probe the port first so
    # a busy port exits with a usage error as promised
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((args.host, args.port))
    except OSError as exc:
        logger.error("cannot bind %s:%d: %s", args.host, args.port, exc)
        return EXIT_USAGE
    finally:
        probe.close()

    app = create_app(
        seed=args.seed,
        n_targets=args.targets,
        size=args.size,
        sessions_dir=str(args.sessions_dir),
        console_dir=str(args.console_dir) if args.console_dir else None,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_verify(args) -> int:
    from .dataset import EpisodeValidationError, read_episode
    from .format_guard import verify_format

    try:
        manifest, records, loader = read_episode(args.episode)
    except FileNotFoundError as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    except (EpisodeValidationError, ValueError) as exc:
        _emit({"valid": False, "error": str(exc)})
        return EXIT_VALIDATION

    spec = manifest.format_spec()
    worst = 1.0
    checked = 0
    for i, rec in enumerate(records):
        for view in rec.frames:
            try:
                frame = loader.load(rec, view)
            except OSError as exc:
                _emit({"valid": False, "error": f"record {i}: unreadable frame: {exc}"})
                return EXIT_VALIDATION
            if (frame.width, frame.height) != manifest.frame_size:
                _emit({"valid": False,
                       "error": f"record {i}: frame size {frame.width}x{frame.height} "
                                f"does not match manifest"})
                return EXIT_VALIDATION
            report = verify_format(frame, spec)
            worst = min(worst, report.ones_fraction)
            checked += 1
    _emit({"valid": True, "records": len(records), "frames_checked": checked,
           "min_ones_fraction": worst})
    return EXIT_OK


def cmd_report(args) -> int:
    from .report import episode_report

    if not args.episode.exists():
        logger.error("episode %s does not exist", args.episode)
        return EXIT_USAGE
    paths = episode_report(args.episode, args.out)
    _emit(paths)
    return EXIT_OK


COMMANDS = {
    "synth": cmd_synth,
    "process": cmd_process,
    "serve": cmd_serve,
    "verify": cmd_verify,
    "report": cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors and 0 on --help
        return int(exc.code or 0)
    args = _apply_config(args, argv)
    try:
        return COMMANDS[args.command](args)
    except FileNotFoundError as exc:
        logger.error("%s", exc)
        return EXIT_USAGE
    except ValueError as exc:
        logger.error("%s", exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
