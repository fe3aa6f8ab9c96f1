"""Command line front end.

Subcommands: ``segment`` runs the propagation for a sequence description
and writes per-frame masks, ``eval`` scores predicted masks against ground
truth, ``ablate`` reruns with individual cues disabled, ``select-lambda``
prints the grid-search result. Exit codes: 0 success, 1 input error,
2 internal error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import media_io, metrics, pipeline
from .errors import FlowSegError

log = logging.getLogger(__name__)

MASK_EXTENSIONS = (".png", ".pgm")


class _Parser(argparse.ArgumentParser):
    """argparse exits with status 2 on usage errors; we reserve 2 for bugs."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _build_parser():
    parser = _Parser(prog="flowseg", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    seg = sub.add_parser("segment", help="propagate an annotation through a sequence")
    seg.add_argument("--spec", required=True, help="sequence description file")
    seg.add_argument("--out", required=True, help="output directory for mask PNGs")
    seg.add_argument(
        "--overlay", action="store_true", help="also write color overlays"
    )

    ev = sub.add_parser("eval", help="score predicted masks against ground truth")
    ev.add_argument("--pred", required=True, help="directory of predicted masks")
    ev.add_argument("--gt", required=True, help="directory of ground-truth masks")
    ev.add_argument("--records", help="write per-frame per-object CSV records here")
    ev.add_argument("--tol", type=int, help="boundary matching tolerance in pixels")

    ab = sub.add_parser("ablate", help="rerun with individual cues disabled")
    ab.add_argument("--spec", required=True)
    ab.add_argument("--gt", required=True)
    ab.add_argument("--out", required=True)
    ab.add_argument("--no-lor", action="store_true", help="disable lost object retrieval")
    ab.add_argument("--no-fdir", action="store_true", help="drop the flow direction channel")
    ab.add_argument(
        "--no-fmag-fdir",
        action="store_true",
        help="drop both flow feature channels",
    )
    ab.add_argument(
        "--boundary",
        choices=["sed", "hed", "cob", "fused", "gradient"],
        help="boundary term variant; sed/hed/cob substitute {detector} in boundary_glob",
    )
    ab.add_argument("--records", help="write per-frame per-object CSV records here")

    sel = sub.add_parser("select-lambda", help="run the lambda grid search and print it")
    sel.add_argument("--spec", required=True)
    return parser


def _write_masks(masks, out_dir, spec=None, overlay=False):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for t, mask in enumerate(masks):
        media_io.save_mask(mask, out_dir / f"{t + 1:05d}.png")
    if overlay and spec is not None:
        for t, (mask, frame_path) in enumerate(zip(masks, spec.frames)):
            frame = media_io.load_frame(frame_path)
            media_io.save_overlay(frame, mask, out_dir / f"{t + 1:05d}_overlay.png")


def _mask_files(directory):
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"{directory} is not a directory")
    files = sorted(
        p for p in directory.iterdir() if p.suffix.lower() in MASK_EXTENSIONS
    )
    files = [p for p in files if not p.stem.endswith("_overlay")]
    if not files:
        raise FileNotFoundError(f"no mask files in {directory}")
    return files


def _print_eval(result, name):
    print(f"sequence {name}: {len(result.frames)} frames, objects {result.objects}")
    print(
        f"J: M={100 * result.mean_j:.1f} R={result.recall_j:.3f} "
        f"D={100 * result.decay_j:.1f}"
    )
    print(
        f"F: M={100 * result.mean_f:.1f} R={result.recall_f:.3f} "
        f"D={100 * result.decay_f:.1f}"
    )
    for obj in result.objects:
        print(
            f"  object {obj}: J={100 * result.j_per_object[obj].mean():.1f} "
            f"F={100 * result.f_per_object[obj].mean():.1f}"
        )


def _write_records(result, name, path):
    lines = ["sequence,frame,object,J,F"]
    for obj in result.objects:
        for k, frame in enumerate(result.frames):
            lines.append(
                f"{name},{frame},{obj},"
                f"{result.j_per_object[obj][k]:.6f},{result.f_per_object[obj][k]:.6f}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def _evaluate_dirs(pred_dir, gt_dir, tol=None, records=None):
    preds, _ = media_io.load_mask_sequence(_mask_files(pred_dir))
    gts, _ = media_io.load_mask_sequence(_mask_files(gt_dir))
    result = metrics.evaluate_sequence(preds, gts, tol=tol)
    name = Path(gt_dir).resolve().name
    _print_eval(result, name)
    if records:
        _write_records(result, name, records)
    return result


def _load_spec_with_detector(path, detector):
    text = Path(path).read_text()
    if detector and "{detector}" in text:
        text = text.replace("{detector}", detector)
        tmp = Path(path).with_suffix(f".{detector}.resolved.cfg")
        tmp.write_text(text)
        try:
            return pipeline.load_sequence_spec(tmp)
        finally:
            tmp.unlink(missing_ok=True)
    return pipeline.load_sequence_spec(path)


def _cmd_segment(args):
    spec = pipeline.load_sequence_spec(args.spec)
    masks = pipeline.segment_sequence(spec)
    _write_masks(masks, args.out, spec=spec, overlay=args.overlay)
    print(f"wrote {len(masks)} masks to {args.out}")
    return 0


def _cmd_eval(args):
    _evaluate_dirs(args.pred, args.gt, tol=args.tol, records=args.records)
    return 0


def _cmd_ablate(args):
    spec = _load_spec_with_detector(args.spec, args.boundary)
    updates = {}
    if args.no_lor:
        updates["lor_enabled"] = False
    if args.no_fdir:
        updates["theta"] = 0.0
    if args.no_fmag_fdir:
        updates["alpha"] = 0.0
        updates["theta"] = 0.0
    if args.boundary == "gradient":
        updates["boundary_source"] = "gradient"
    elif args.boundary == "fused":
        updates["boundary_source"] = "learned_plus_motion"
    elif args.boundary in ("sed", "hed", "cob"):
        updates["boundary_source"] = "learned"
    if updates:
        spec.config = spec.config.with_updates(**updates)
        print("ablation:", ", ".join(f"{k}={v}" for k, v in sorted(updates.items())))
    masks = pipeline.segment_sequence(spec)
    _write_masks(masks, args.out)
    _evaluate_dirs(args.out, args.gt, records=args.records)
    return 0


def _cmd_select_lambda(args):
    spec = pipeline.load_sequence_spec(args.spec)
    loaded = pipeline.load_sequence(spec)
    lam = pipeline.select_lambda(loaded)
    print(f"lambda = {lam:g}")
    return 0


_COMMANDS = {
    "segment": _cmd_segment,
    "eval": _cmd_eval,
    "ablate": _cmd_ablate,
    "select-lambda": _cmd_select_lambda,
}


def run_cli(argv=None):
    """Parse arguments and run one subcommand; returns the exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except (FlowSegError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - report bugs as exit code 2
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return 2


def main():
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
