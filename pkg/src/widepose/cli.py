"""Command-line entry point: ``widepose <subcommand> ...``.

Exit status: 0 success, 1 usage, 2 data error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

import numpy as np

from . import annotate as ann
from .losses import LossWeights, loss_curve
from .metrics import bands_svg, compute_report, format_report, write_bands_csv
from .records import (
    DataError,
    load_annotations,
    load_calibration,
    load_face_frames,
    load_predictions,
    write_annotations,
    write_calibration,
    write_face_frame,
)
from .rigid import DegenerateFitError
from .sweep import DEFAULT_GRID, format_sweep, sweep_alpha_beta, write_sweep_csv
from .template import default_template, load_template, reference_camera
from .toy import TrainConfig, TrainingDiverged, compare_losses, gen_dataset, smooth, train, write_comparison_csv

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("widepose")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _common(p: argparse.ArgumentParser, out_required: bool = True) -> None:
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--out", required=out_required)
    p.add_argument("--verbose", action="store_true")


def _toy_args(p: argparse.ArgumentParser, steps: int) -> None:
    p.add_argument("--steps", type=int, default=steps)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--n-train", type=int, default=20000)
    p.add_argument("--n-test", type=int, default=20000)
    p.add_argument("--cls-kind", choices=("bce_sigmoid", "ce_softmax"), default="bce_sigmoid")
    p.add_argument("--lr-schedule", choices=("constant", "cosine"), default="constant")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="widepose", description="Wide-range head pose labels, losses and toy training.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("annotate", help="label face frames from a calibrated camera dome")
    _common(p)
    p.add_argument("--calib", required=True)
    p.add_argument("--faces", required=True, help="face-frame JSON file or directory")
    p.add_argument("--template", help="reference landmark JSON (default: built-in face)")
    p.add_argument("--camera-type", action="append", help="keep only these camera types (repeatable)")
    p.add_argument("--radius", type=float, default=21.0)
    p.add_argument("--margin", type=float, default=0.5)
    p.add_argument("--samples", type=int, default=256)

    p = sub.add_parser("evaluate", help="score predictions against annotations")
    _common(p, out_required=False)
    p.add_argument("--truth", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--bands", type=float, default=30.0)
    p.add_argument("--svg", help="also write the banded histogram as SVG")

    p = sub.add_parser("train-toy", help="train the toy model and write its loss trace")
    _common(p)
    _toy_args(p, 2000)
    p.add_argument("--stage", choices=("full", "narrow"), default="full")
    p.add_argument("--yaw-loss", choices=("wrapped", "mse"), default="wrapped")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)

    p = sub.add_parser("compare-losses", help="wrapped vs mse yaw regression on the toy task")
    _common(p)
    _toy_args(p, 8000)

    p = sub.add_parser("sweep", help="alpha/beta grid on the toy task")
    _common(p)
    _toy_args(p, 2000)
    p.add_argument("--alphas", type=float, nargs="+", default=list(DEFAULT_GRID))
    p.add_argument("--betas", type=float, nargs="+", default=list(DEFAULT_GRID))
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("losscurve", help="sampled wrapped and mse loss for a fixed true angle")
    _common(p)
    p.add_argument("--true", type=float, default=170.0, dest="true_deg")
    p.add_argument("--step", type=float, default=1.0)

    p = sub.add_parser("synth-dome", help="write a synthetic calibration and face frames")
    _common(p)
    p.add_argument("--frames", type=int, default=4)
    p.add_argument("--subjects", type=int, default=1)
    p.add_argument("--cameras", type=int, default=31)
    p.add_argument("--noise", type=float, default=0.0)
    return parser


# -- subcommands -----------------------------------------------------------------


def cmd_annotate(args) -> int:
    skips = []
    calib = load_calibration(args.calib, args.camera_type)
    template = load_template(args.template) if args.template else default_template()
    helmet = ann.HelmetConfig(args.radius, args.samples, args.margin)
    frames = load_face_frames(args.faces, template.count, skips)
    records = ann.annotate_frames(frames, calib.cameras, template, reference_camera(), helmet, skips)
    n = write_annotations(records, args.out)
    for s in skips:
        log.info("skipped %s: %s", s.source, s.reason)
    print(f"wrote {n} records to {args.out}; skipped {len(skips)}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    skips = []
    truth = list(load_annotations(args.truth, skips))
    preds = list(load_predictions(args.pred, skips))
    report = compute_report(truth, preds, args.bands)
    print(format_report(report))
    if skips:
        print(f"skipped lines: {len(skips)}")
    if args.out:
        write_bands_csv(report.bands, args.out)
    if args.svg:
        Path(args.svg).write_text(bands_svg(report.bands))
    return EXIT_OK


def _toy_config(args, stage="full", **kw) -> TrainConfig:
    return TrainConfig.for_stage(
        stage,
        steps=args.steps,
        lr=args.lr,
        batch_size=args.batch_size,
        seed=args.seed,
        cls_kind=args.cls_kind,
        lr_schedule=args.lr_schedule,
        **kw,
    )


def cmd_train_toy(args) -> int:
    kw = {}
    if args.alpha is not None or args.beta is not None:
        base = TrainConfig.for_stage(args.stage).weights
        kw["weights"] = LossWeights(
            base.alpha if args.alpha is None else args.alpha,
            base.beta if args.beta is None else args.beta,
        )
    cfg = _toy_config(args, args.stage, **kw).with_yaw_reg(args.yaw_loss)
    data = gen_dataset(args.n_train, args.seed * 3 + 1, args.stage)
    _, trace = train(cfg, data)
    sm = smooth(trace, 32)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "loss", "smoothed"])
        for i, v in enumerate(trace):
            j = i - 31
            w.writerow([i, repr(float(v)), repr(float(sm[j])) if 0 <= j < len(sm) else ""])
    print(f"final smoothed loss {sm[-1]:.4f} (first {sm[0]:.4f}); trace written to {args.out}")
    return EXIT_OK


def cmd_compare(args) -> int:
    cfg = _toy_config(args)
    report = compare_losses(args.seed, cfg, args.n_train, args.n_test)
    write_comparison_csv(report, args.out)
    print(f"{'model':>8} {'all':>8} {'|yaw|>=150':>11} {'|yaw|<30':>9}")
    for kind in ("wrapped", "mse"):
        print(f"{kind:>8} {report.overall[kind]:>8.3f} {report.high[kind]:>11.3f} {report.low[kind]:>9.3f}")
    print(f"high-yaw ratio wrapped/mse: {report.high_ratio:.3f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _toy_config(args)
    train_data = gen_dataset(args.n_train, args.seed * 3 + 1)
    test_data = gen_dataset(args.n_test, args.seed * 3 + 2)
    result = sweep_alpha_beta(cfg, train_data, test_data, args.alphas, args.betas, args.workers)
    write_sweep_csv(result, args.out)
    print(format_sweep(result))
    return EXIT_OK


def cmd_losscurve(args) -> int:
    if not args.step > 0:
        raise UsageError("--step must be positive")
    preds = np.arange(-180.0, 180.0 + args.step / 2, args.step)
    wrapped, mse = loss_curve(args.true_deg, preds)
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pred_deg", "wrapped", "mse"])
        for row in zip(preds, wrapped, mse):
            w.writerow([repr(float(v)) for v in row])
    print(f"wrote {len(preds)} samples to {args.out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synth import random_scene

    out = Path(args.out)
    (out / "faces").mkdir(parents=True, exist_ok=True)
    calib, frames, _ = random_scene(
        default_template(), args.frames, args.subjects, args.cameras, args.seed, args.noise
    )
    write_calibration(calib, out / "calib.json")
    for f in frames:
        write_face_frame(f, out / "faces" / f"face3Dlandmarks_hd{f.frame_id:08d}.json")
    print(f"wrote {len(calib)} cameras and {len(frames)} frames under {out}")
    return EXIT_OK


COMMANDS = {
    "annotate": cmd_annotate,
    "evaluate": cmd_evaluate,
    "train-toy": cmd_train_toy,
    "compare-losses": cmd_compare,
    "sweep": cmd_sweep,
    "losscurve": cmd_losscurve,
    "synth-dome": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"widepose: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TrainingDiverged, DegenerateFitError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"widepose: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError, ValueError, KeyError) as exc:
        print(f"widepose: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
