"""Command-line front end.

Exit codes: 0 success, 2 bad input (I/O, format, validation), 3 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence, TextIO

from radarqa.classical import categorical_scores, ssim
from radarqa.config import RunConfig
from radarqa.core import InvariantError, PerformanceLevel, RadarSequence
from radarqa.describe import PolishConfig, describe_frame, describe_sequence, load_labels, polish
from radarqa.frame_metrics import FrameAttributeReport, analyze_frame, binarize, contingency
from radarqa.ingest import (
    DEFAULT_PALETTE,
    DegradationSpec,
    PairManifest,
    degrade,
    load_palette,
    read_frame,
    read_sequence,
    render,
    synth_sequence,
    write_frame,
    write_image,
)
from radarqa.reward import RatingResponse, Task, score_jsonl, truth_from_json
from radarqa.sequence_metrics import SequenceAttributeReport, analyze_sequence

EXIT_OK, EXIT_INPUT, EXIT_INTERNAL = 0, 2, 3

HEURISTIC_NOTE = ("note: 'overall' is a heuristic aggregate (median grade rounded toward Poor), "
                  "not a published score")


class InputError(ValueError):
    pass


def heuristic_overall(levels: Sequence[PerformanceLevel]) -> PerformanceLevel:
    """Median of the grade ordinals; an even count rounds toward Poor."""
    ords = sorted(int(x) for x in levels)
    if not ords:
        raise ValueError("no grades to aggregate")
    n = len(ords)
    med = ords[n // 2] if n % 2 else (ords[n // 2 - 1] + ords[n // 2]) // 2
    return PerformanceLevel(med)


def frame_rating(report: FrameAttributeReport, aggregate: bool = False) -> dict[str, PerformanceLevel]:
    entries = dict(report.performances)
    if aggregate:
        entries["overall"] = heuristic_overall(list(entries.values()))
    return entries


def sequence_rating(report: SequenceAttributeReport, labels: dict[str, str] | None = None,
                    aggregate: bool = False) -> dict[str, PerformanceLevel]:
    entries: dict[str, PerformanceLevel] = {}
    dyn = (labels or {}).get("dynamic_consistency_performance")
    if dyn is not None:
        try:
            entries["dynamic_consistency"] = PerformanceLevel.parse(dyn)
        except KeyError:
            raise InputError(f"dynamic_consistency_performance label {dyn!r} is not a grade") from None
    entries.update(report.performances)
    if aggregate:
        entries["overall"] = heuristic_overall(list(entries.values()))
    return entries


def _rating_json(task: Task, entries: dict[str, PerformanceLevel]) -> str:
    return RatingResponse(task, entries).to_json()


def _load_config(args) -> RunConfig:
    cfg = RunConfig.load(args.config) if getattr(args, "config", None) else RunConfig()
    return cfg.with_overrides(
        precipitation_threshold=getattr(args, "precipitation_threshold", None),
        high_value_threshold=getattr(args, "high_value_threshold", None),
        workers=getattr(args, "workers", None),
    )


def _text_rating(entries: dict[str, PerformanceLevel], scores: dict[str, float]) -> str:
    lines = []
    for key, level in entries.items():
        s = scores.get(key)
        lines.append(f"{key:<26}{level.label:<7}" + (f"{s:.4f}" if s is not None else "-"))
    return "\n".join(lines)


def cmd_rate_frame(args, out: TextIO, err: TextIO) -> int:
    cfg = _load_config(args)
    gt, pred = read_frame(args.gt), read_frame(args.pred)
    report = analyze_frame(pred, gt, cfg)
    entries = frame_rating(report, args.aggregate)
    if args.report:
        out.write(json.dumps(report.to_dict(), indent=2) + "\n")
    elif args.text:
        scores = {"miss": report.miss_rate, "false_alarm": report.far_rate,
                  "sharpness": report.sharpness_score, "high_value_match": report.high_value_score}
        out.write(_text_rating(entries, scores) + "\n")
    else:
        out.write(_rating_json(Task.FRAME, entries) + "\n")
    if args.aggregate:
        err.write(HEURISTIC_NOTE + "\n")
    return EXIT_OK


def _pair_from_manifest(path) -> tuple[PairManifest, RadarSequence, RadarSequence]:
    manifest = PairManifest.load(path)
    gt, pred = read_sequence(manifest)
    return manifest, gt, pred


def cmd_rate_sequence(args, out: TextIO, err: TextIO) -> int:
    cfg = _load_config(args)
    _, gt, pred = _pair_from_manifest(args.manifest)
    labels = load_labels(args.labels) if args.labels else {}
    report = analyze_sequence(pred, gt, cfg)
    entries = sequence_rating(report, labels, args.aggregate)
    if args.report:
        out.write(json.dumps(report.to_dict(include_frames=args.frames), indent=2) + "\n")
    elif args.text:
        scores = {"cumulative_precipitation": report.cumulative_score,
                  "high_value_retain": report.high_value_retain_score}
        out.write(_text_rating(entries, scores) + "\n")
        out.write(f"{'cumulative_difference':<26}{report.cumulative_difference.value}\n")
    else:
        out.write(_rating_json(Task.SEQUENCE, entries) + "\n")
    if args.aggregate:
        err.write(HEURISTIC_NOTE + "\n")
    return EXIT_OK


def cmd_describe(args, out: TextIO, err: TextIO) -> int:
    cfg = _load_config(args)
    manifest, gt, pred = _pair_from_manifest(args.manifest)
    labels = load_labels(args.labels) if args.labels else {}
    if manifest.kind == "frame":
        if len(gt) != 1:
            raise InputError(f"frame manifest resolved to {len(gt)} frames")
        report = analyze_frame(pred[0], gt[0], cfg)
        text = describe_frame(report, labels)
        attrs = report.to_dict()
    else:
        seq_report = analyze_sequence(pred, gt, cfg)
        text = describe_sequence(seq_report, labels)
        attrs = seq_report.to_dict(include_frames=False)
    if args.polish:
        pc = PolishConfig.from_env(url=args.polish_url, model=args.polish_model,
                                   timeout=args.polish_timeout)
        result = polish(text, pc, attrs)
        if result.warning:
            err.write(f"warning: {result.warning}; using unpolished text\n")
        text = result.text
    out.write(text + "\n")
    return EXIT_OK


def cmd_reward(args, out: TextIO, err: TextIO) -> int:
    default_truth = None
    if args.truth:
        data = json.loads(Path(args.truth).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise InputError(f"{args.truth}: truth must be a JSON object")
        default_truth = truth_from_json(data, args.task)
    path = Path(args.candidates)
    if not path.is_file():
        raise FileNotFoundError(f"candidates file not found: {path}")
    with open(path, encoding="utf-8") as fh:
        for score in score_jsonl(fh, default_truth, include_overall=not args.exclude_overall):
            out.write(json.dumps(score.to_dict()) + "\n")
    return EXIT_OK


def _fmt(v: float | None) -> str:
    return "undefined" if v is None else f"{v:.6f}"


def cmd_verify(args, out: TextIO, err: TextIO) -> int:
    gt, pred = read_frame(args.gt), read_frame(args.pred)
    if gt.shape != pred.shape:
        raise InputError(f"frame shapes differ: {gt.shape} vs {pred.shape}")
    table = contingency(binarize(gt, args.threshold), binarize(pred, args.threshold))
    scores: dict[str, float | None] = dict(categorical_scores(table))
    scores["ssim"] = ssim(pred, gt) if min(gt.shape) >= 8 else None
    if args.json:
        out.write(json.dumps({"threshold": args.threshold, **scores}) + "\n")
    else:
        out.write(f"{'threshold':<10}{args.threshold}\n")
        for k, v in scores.items():
            out.write(f"{k:<10}{_fmt(v)}\n")
    return EXIT_OK


def cmd_synth(args, out: TextIO, err: TextIO) -> int:
    try:
        dx, dy = (float(v) for v in args.advection.split(","))
    except ValueError:
        raise InputError(f"--advection expects 'dx,dy', got {args.advection!r}") from None
    gt = synth_sequence(args.seed, args.frames, args.width, args.height, args.blobs, (dx, dy))
    spec = DegradationSpec.parse(args.degrade) if args.degrade else DegradationSpec()
    pred = degrade(gt, spec)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    ext = {"pgm": ".pgm", "npy": ".npy", "raw": ".raw"}[args.format]
    gt_paths, pred_paths = [], []
    for i, (g, p) in enumerate(zip(gt, pred)):
        gt_paths.append(write_frame(outdir / f"gt_{i:03d}{ext}", g))
        pred_paths.append(write_frame(outdir / f"pred_{i:03d}{ext}", p))
    manifest = PairManifest(
        tuple(gt_paths), tuple(pred_paths), kind="sequence" if args.frames > 1 else "frame",
        metadata={"generator": "radarqa synth", "seed": str(args.seed),
                  "degrade": args.degrade or "none"},
    )
    mpath = outdir / "manifest.json"
    mpath.write_text(manifest.to_json(outdir), encoding="utf-8")
    out.write(f"{mpath}\n")
    return EXIT_OK


def cmd_render(args, out: TextIO, err: TextIO) -> int:
    palette = load_palette(args.palette) if args.palette else DEFAULT_PALETTE
    write_image(args.out, render(read_frame(args.frame), palette))
    out.write(f"{args.out}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="radarqa", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def thresholds(p):
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--precipitation-threshold", type=int)
        p.add_argument("--high-value-threshold", type=int)

    def output(p):
        g = p.add_mutually_exclusive_group()
        g.add_argument("--json", action="store_true", help="rating JSON (default)")
        g.add_argument("--text", action="store_true", help="human-readable table")
        g.add_argument("--report", action="store_true", help="full attribute report as JSON")
        p.add_argument("--aggregate", action="store_true",
                       help="add a heuristic 'overall' grade (not a published score)")

    p = sub.add_parser("rate-frame", help="grade a forecast frame against an observation")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    thresholds(p)
    output(p)
    p.set_defaults(func=cmd_rate_frame)

    p = sub.add_parser("rate-sequence", help="grade a forecast sequence from a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--labels", help="JSON file of human-annotated attributes")
    p.add_argument("--workers", type=int, help="parallel per-frame analyses")
    p.add_argument("--frames", action="store_true", help="with --report, include per-frame reports")
    thresholds(p)
    output(p)
    p.set_defaults(func=cmd_rate_sequence)

    p = sub.add_parser("describe", help="templated assessment text")
    p.add_argument("--manifest", required=True)
    p.add_argument("--labels")
    p.add_argument("--polish", action="store_true", help="rephrase through a chat-completions endpoint")
    p.add_argument("--polish-url")
    p.add_argument("--polish-model")
    p.add_argument("--polish-timeout", type=float)
    thresholds(p)
    p.set_defaults(func=cmd_describe)

    p = sub.add_parser("reward", help="format/accuracy rewards for JSON Lines candidates")
    p.add_argument("--candidates", required=True)
    p.add_argument("--truth", help="reference rating used when a line has no 'truth'")
    p.add_argument("--task", choices=[t.value for t in Task])
    p.add_argument("--exclude-overall", action="store_true")
    p.set_defaults(func=cmd_reward)

    p = sub.add_parser("verify", help="classical categorical scores and SSIM")
    p.add_argument("--gt", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--threshold", type=int, default=74)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("synth", help="write a synthetic storm fixture set and manifest")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=12)
    p.add_argument("--out", required=True)
    p.add_argument("--width", type=int, default=96)
    p.add_argument("--height", type=int, default=96)
    p.add_argument("--blobs", type=int, default=3)
    p.add_argument("--advection", default="2,1", help="dx,dy per frame")
    p.add_argument("--degrade", help="e.g. blur:3,gain:0.9,shift:2:0,suppress:219,noise:5:1")
    p.add_argument("--format", choices=("pgm", "npy", "raw"), default="pgm")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("render", help="colourise a frame to PNG or PPM")
    p.add_argument("--frame", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--palette")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: Sequence[str] | None = None, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    logging.basicConfig(level=logging.ERROR, format="%(levelname)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out, err)
    except InvariantError as exc:
        err.write(f"internal error: {exc}\n")
        return EXIT_INTERNAL
    except (OSError, ValueError, KeyError) as exc:
        err.write(f"error: {exc}\n")
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        err.write(f"internal error: {exc!r}\n")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
