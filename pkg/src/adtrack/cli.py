"""Command-line interface: ``adtrack {track,eval,enhance,selftest}``.

Exit codes: 0 success, 1 usage or invalid configuration (and a failed selftest),
2 I/O error, 3 malformed input, 4 solver warning escalated by ``--strict``.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

import cv2
import numpy as np

from . import __version__
from .config import load_config, resolve_config
from .enhance import enhance
from .errors import ADTrackError, DegenerateInput, FormatError, InvalidConfig, InvalidInput, SolverWarning
from .evaluation import (
    center_error,
    evaluate_results,
    find_sequences,
    load_sequence,
    read_frame,
    run_ope,
    track_sequence,
    write_results,
)
from .illum import IlluminanceConfig, classify_light, log_average_luminance, world_illuminance
from .tracker import MODES

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_FORMAT, EXIT_SOLVER = 0, 1, 2, 3, 4

# flag dest -> config key
_VALUE_FLAGS = {"tau": "tau", "delta": "delta", "alpha_r": "alpha-r", "alpha_g": "alpha-g", "alpha_b": "alpha-b",
                "mu": "mu", "psi": "psi", "eta_t": "eta-t", "eta_s": "eta-s", "lam": "lambda",
                "cells": "cells", "sc": "sc", "mode": "mode"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _add_tracker_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group("tracker parameters (override --config, which overrides defaults)")
    g.add_argument("--config", type=Path, help="flat 'key = value' parameter file")
    g.add_argument("--mode", choices=MODES, help="force day or night parameters (default: auto)")
    g.add_argument("--tau", type=float, help="day/night luminance threshold")
    g.add_argument("--delta", type=float, help="log-average offset")
    g.add_argument("--alpha-r", type=float)
    g.add_argument("--alpha-g", type=float)
    g.add_argument("--alpha-b", type=float)
    g.add_argument("--mu", type=float, help="dual-filter coupling weight (both profiles)")
    g.add_argument("--psi", type=float, help="target-filter response weight (both profiles)")
    g.add_argument("--eta-t", type=float, help="appearance learning rate (both profiles)")
    g.add_argument("--eta-s", type=float, help="scale learning rate (both profiles)")
    g.add_argument("--lambda", dest="lam", type=float, help="filter ridge weight (both profiles)")
    g.add_argument("--cells", type=int, help="feature cell size in pixels")
    g.add_argument("--sc", type=float, help="search region size relative to the target")
    g.add_argument("--no-enhance", action="store_true", help="never enhance patches")
    g.add_argument("--no-mask", action="store_true", help="use an all-ones target mask")
    g.add_argument("--strict", action="store_true", help="exit with status 4 on solver warnings")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="adtrack", description="Illumination-adaptive dual correlation filter tracker.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("track", help="track one sequence and write per-frame boxes")
    p.add_argument("--seq", type=Path, required=True, help="sequence directory (img/ + groundtruth_rect.txt)")
    p.add_argument("--out", type=Path, required=True, help="results file, or a directory for <name>.txt")
    p.add_argument("--dump-masks", type=Path, metavar="DIR", help="write the per-frame target mask as PNG")
    _add_tracker_flags(p)

    p = sub.add_parser("eval", help="one-pass evaluation: score results files, or track then score")
    p.add_argument("--seq", type=Path, required=True, help="a sequence directory or a directory of them")
    p.add_argument("--results", type=Path, help="directory of <name>.txt results; omit to run the tracker")
    p.add_argument("--out", type=Path, required=True, help="report directory")
    p.add_argument("--workers", type=int, default=1, help="parallel sequences when tracking")
    _add_tracker_flags(p)

    p = sub.add_parser("enhance", help="enhance a low-light image and print the day/night verdict")
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)
    p.add_argument("--tau", type=float, default=IlluminanceConfig.tau)

    sub.add_parser("selftest", help="track a synthetic sequence and check the error bound")
    return parser


def tracker_config(args):
    file_values = load_config(args.config) if args.config is not None else {}
    flags = {key: getattr(args, dest) for dest, key in _VALUE_FLAGS.items() if getattr(args, dest, None) is not None}
    if args.no_enhance:
        flags["enhance"] = False
    if args.no_mask:
        flags["mask"] = False
    return resolve_config(file_values, flags)


def _results_path(out: Path, name: str) -> Path:
    if out.is_dir() or out.suffix == "":
        out.mkdir(parents=True, exist_ok=True)
        return out / f"{name}.txt"
    out.parent.mkdir(parents=True, exist_ok=True)
    return out


def _mask_writer(out_dir: Path):
    """Frame callback that saves the gated target mask of every frame as a PNG."""
    out_dir.mkdir(parents=True, exist_ok=True)

    def on_frame(k, trk):
        mask = trk.last_sample.pixel_mask
        if mask is None:
            mask = np.ones(trk._geom.model_px[::-1], dtype=np.uint8)
        path = out_dir / f"{k + 1:04d}.png"
        if not cv2.imwrite(str(path), (mask > 0).astype(np.uint8) * 255):
            raise OSError(f"cannot write {path}")

    return on_frame


def cmd_track(args) -> int:
    cfg = tracker_config(args)
    seq = load_sequence(args.seq)
    on_frame = _mask_writer(args.dump_masks) if args.dump_masks is not None else None
    boxes, fps, fps_total, mode = track_sequence(seq, cfg, on_frame)
    path = _results_path(args.out, seq.name)
    write_results(path, boxes)
    print(f"{seq.name}: {len(boxes)} frames, mode {mode}, {fps:.1f} FPS (compute), {fps_total:.1f} FPS (end-to-end)")
    print(f"results written to {path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    dirs = find_sequences(args.seq)
    if not dirs:
        raise FormatError(f"no sequences found under {args.seq}")
    sequences = [load_sequence(d) for d in dirs]
    if args.results is not None:
        if not args.results.is_dir() or not any(args.results.glob("*.txt")):
            raise FormatError(f"no results files in {args.results}")
        report = evaluate_results(args.results, sequences)
    else:
        cfg = tracker_config(args)
        report = run_ope(cfg, sequences, args.out / "results", workers=args.workers)
    written = report.write(args.out)
    print(f"{len(report.scored)} sequences: DP@20 {report.dp:.4f}  AUC {report.auc:.4f}"
          + (f"  FPS {report.fps:.1f}" if np.isfinite(report.fps) else ""))
    for tag, sub in report.by_attribute.items():
        print(f"  [{tag}] DP@20 {sub.dp:.4f}  AUC {sub.auc:.4f}  ({len(sub.scored)} sequences)")
    if report.failed:
        print(f"failed: {', '.join(s.name for s in report.failed)}", file=sys.stderr)
    print(f"report written to {written[0].parent}")
    return EXIT_OK


def cmd_enhance(args) -> int:
    cfg = IlluminanceConfig(tau=args.tau)
    image = read_frame(args.input).astype(np.float64) / 255.0
    l_tilde = log_average_luminance(world_illuminance(image, cfg), cfg.delta)
    verdict = classify_light(l_tilde, cfg.tau)
    try:
        out = enhance(image, cfg).enhanced
    except DegenerateInput:
        out = image
    bgr = cv2.cvtColor(np.round(np.clip(out, 0.0, 1.0) * 255.0).astype(np.uint8), cv2.COLOR_RGB2BGR)
    if not cv2.imwrite(str(args.output), bgr):
        raise OSError(f"cannot write image {args.output}")
    print(f"log-average luminance {l_tilde:.6f}; verdict {verdict.value}")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .synthetic import translating_square
    from .tracker import ADTracker

    seq = translating_square()
    trk = ADTracker()
    boxes = [trk.init(seq.frames[0], seq.boxes[0]).bbox] + [trk.track(f).bbox for f in seq.frames[1:]]
    cle = center_error(np.array(boxes), seq.boxes)
    ok = cle.mean() <= 5.0
    print(f"selftest: synthetic translation, mean CLE {cle.mean():.2f} px -> {'ok' if ok else 'FAILED'}")
    return EXIT_OK if ok else EXIT_USAGE


COMMANDS = {"track": cmd_track, "eval": cmd_eval, "enhance": cmd_enhance, "selftest": cmd_selftest}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"adtrack: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        with warnings.catch_warnings():
            if getattr(args, "strict", False):
                warnings.simplefilter("error", SolverWarning)
            return COMMANDS[args.command](args)
    except SolverWarning as exc:
        print(f"adtrack: solver warning: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except InvalidConfig as exc:
        print(f"adtrack: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, InvalidInput) as exc:
        print(f"adtrack: FormatError: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"adtrack: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ADTrackError as exc:
        print(f"adtrack: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FORMAT


if __name__ == "__main__":
    sys.exit(main())
