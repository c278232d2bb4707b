"""Command line interface.

Subcommands: simulate (render a scenario to a bundle), track (run the
fusion pipeline over a bundle), evaluate (score a track against ground
truth), label (bootstrap ground truth with the correlation filter
alone), bench (parameter sweeps with a comparison table).

Exit codes: 0 success, 1 runtime/IO failure, 2 usage or validation
error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from .detectors import build_detector
from .evaluate import evaluate, write_report
from .frames import FrameDir
from .fusion import (
    PIPELINED,
    SYNCHRONOUS,
    FusionConfig,
    Pipeline,
    read_track_outputs,
    write_track_outputs,
)
from .geometry import BBox
from .kcf import KcfParams, kcf_init, kcf_locate, kcf_update
from .metrics import FormatError, read_ground_truth, read_predictions
from .simulate import generate, scenario_from_file

USAGE_ERROR = 2
RUNTIME_ERROR = 1


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep argparse's exit code 2, message on stderr
        self.print_usage(sys.stderr)
        self.exit(USAGE_ERROR, f"{self.prog}: error: {message}\n")


def _build_parser() -> _Parser:
    parser = _Parser(prog="fusetrack", description=__doc__.split("\n")[0] if __doc__ else None)
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="render a scenario file to a frame bundle")
    p_sim.add_argument("--scenario", required=True, help="scenario JSON document")
    p_sim.add_argument("--out", required=True, help="bundle output directory")
    p_sim.add_argument("--seed", type=int, default=None, help="override the scenario seed")

    p_track = sub.add_parser("track", help="run the fusion tracker over a frame bundle")
    p_track.add_argument("--frames", required=True, help="bundle directory (frames/ + meta.json)")
    p_track.add_argument("--global", dest="global_spec", required=True,
                         help="global detector: scripted:<path>[@<ms>ms] | exec:<cmd> | tcp:<host:port>")
    p_track.add_argument("--roi", dest="roi_spec", default=None,
                         help="roi detector spec (required unless --global-only)")
    p_track.add_argument("--jump", type=int, default=3, help="global detector period in frames")
    p_track.add_argument("--crop", type=float, default=3.0, help="roi crop side over target side")
    p_track.add_argument("--mode", choices=["sync", "pipelined"], default="sync")
    p_track.add_argument("--global-only", action="store_true",
                         help="ablation: no roi detector, no correlation filter")
    p_track.add_argument("--out", required=True, help="track output file (JSON lines)")

    p_eval = sub.add_parser("evaluate", help="score a track against ground truth")
    p_eval.add_argument("--pred", required=True,
                        help="track output JSONL (or prediction CSV frame,x,y,w,h)")
    p_eval.add_argument("--gt", required=True, help="ground truth CSV")
    p_eval.add_argument("--report", required=True, help="report output path")
    p_eval.add_argument("--format", choices=["json", "csv"], default="json")

    p_label = sub.add_parser("label", help="propagate one seed box with the correlation filter")
    p_label.add_argument("--frames", required=True, help="bundle directory")
    p_label.add_argument("--init", required=True, help="seed box on frame 0: x,y,w,h")
    p_label.add_argument("--out", required=True, help="ground-truth-format output CSV")
    p_label.add_argument("--stop-peak", type=float, default=0.25,
                         help="stop when the response peak falls below this (0 disables)")

    p_bench = sub.add_parser("bench", help="sweep jump/crop values and compare")
    p_bench.add_argument("--frames", required=True, help="bundle directory")
    p_bench.add_argument("--gt", required=True, help="ground truth CSV")
    p_bench.add_argument("--global", dest="global_spec", required=True)
    p_bench.add_argument("--roi", dest="roi_spec", required=True)
    p_bench.add_argument("--jumps", default="3", help="comma-separated jump values")
    p_bench.add_argument("--crops", default="3", help="comma-separated crop scales")
    p_bench.add_argument("--out", default="bench_reports", help="directory for per-run reports")

    return parser


def _positive_int_list(text: str, what: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"{what} must be comma-separated integers, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise ValueError(f"{what} must be positive, got {text!r}")
    return values


def _float_list(text: str, what: str) -> list[float]:
    try:
        values = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ValueError(f"{what} must be comma-separated numbers, got {text!r}") from None
    if not values:
        raise ValueError(f"{what} is empty")
    return values


def _parse_box(text: str) -> BBox:
    parts = text.split(",")
    if len(parts) != 4:
        raise ValueError(f"box must be x,y,w,h, got {text!r}")
    x, y, w, h = (float(p) for p in parts)
    return BBox(x, y, w, h)


def _run_track(frames: FrameDir, config: FusionConfig, global_spec: str, roi_spec: str | None):
    global_det = build_detector(global_spec)
    roi_det = build_detector(roi_spec) if roi_spec is not None else None
    with Pipeline(config, global_det, roi_det) as pipeline:
        if config.mode == PIPELINED:
            outputs = _run_paced(pipeline, frames)
        else:
            outputs = pipeline.run(frames)
        stats = dict(pipeline.stats)
    return outputs, stats


def _run_paced(pipeline: Pipeline, frames: FrameDir):
    """Replay the bundle at its recorded frame rate, as a live feed
    would deliver it; otherwise a full-speed replay finishes before any
    background global detection can land."""
    interval = 1.0 / frames.fps
    start = time.perf_counter()
    outputs = []
    for i in range(len(frames)):
        wait = start + i * interval - time.perf_counter()
        if wait > 0:
            time.sleep(wait)
        outputs.append(pipeline.step(i, frames.load(i)))
    return outputs


def _cmd_simulate(args) -> int:
    scenario = scenario_from_file(args.scenario)
    if args.seed is not None:
        from dataclasses import replace

        scenario = replace(scenario, seed=args.seed)
    bundle = generate(scenario, args.out)
    print(f"bundle written to {bundle.root} ({scenario.num_frames} frames, "
          f"{scenario.width}x{scenario.height} @ {scenario.fps:g} fps)")
    return 0


def _cmd_track(args) -> int:
    if not args.global_only and args.roi_spec is None:
        raise ValueError("--roi is required unless --global-only is set")
    frames = FrameDir(args.frames)
    config = FusionConfig(
        jump=args.jump,
        crop_scale=args.crop,
        mode=SYNCHRONOUS if args.mode == "sync" else PIPELINED,
        global_only=args.global_only,
    )
    outputs, stats = _run_track(frames, config, args.global_spec, args.roi_spec)
    write_track_outputs(outputs, args.out)
    totals = [out.timings.get("total", 0.0) for out in outputs]
    mean_ms = sum(totals) / len(totals) if totals else 0.0
    fps = 1000.0 / mean_ms if mean_ms > 0 else float("inf")
    boxes = sum(1 for out in outputs if out.box is not None)
    print(f"frames={len(outputs)} boxes={boxes} mean_ms={mean_ms:.3f} fps={fps:.1f}")
    if stats["transport_failures"]:
        print(f"note: {stats['transport_failures']} detector transport failures", file=sys.stderr)
    return 0


def _read_predictions_as_outputs(path: Path):
    from .fusion import SOURCE_KCF, TrackOutput

    track = read_predictions(path)
    zero = {"global": 0.0, "roi": 0.0, "kcf": 0.0, "total": 0.0}
    return [TrackOutput(frame, box, SOURCE_KCF, "tracking", dict(zero)) for frame, box in track.entries]


def _cmd_evaluate(args) -> int:
    gt = read_ground_truth(args.gt)
    pred_path = Path(args.pred)
    with open(pred_path) as fh:
        first = fh.readline().lstrip()
    if first.startswith("{"):
        outputs = read_track_outputs(pred_path)
    else:
        outputs = _read_predictions_as_outputs(pred_path)
    report = evaluate(outputs, gt)
    write_report(report, args.report, fmt=args.format)
    print(f"avg_overlap={report.avg_overlap:.4f} auc={report.auc:.4f} "
          f"success@0.5={report.success_at_05:.4f} avg_fps={report.avg_fps:.1f} "
          f"lost={report.lost_frames}/{report.frame_count}")
    return 0


def _cmd_label(args) -> int:
    frames = FrameDir(args.frames)
    seed_box = _parse_box(args.init)
    stop_peak = args.stop_peak
    lines = []
    model = None
    stopped_at = None
    for index, frame in enumerate(frames):
        if model is None:
            model = kcf_init(frame, seed_box, KcfParams())
            box = seed_box
        else:
            box, peak = kcf_locate(model, frame)
            if stop_peak > 0 and peak < stop_peak:
                stopped_at = index
                break
            model = kcf_update(model, frame, box)
        lines.append(f"{index},{round(box.x)},{round(box.y)},{round(box.w)},{round(box.h)},1")
    Path(args.out).write_text("\n".join(lines) + "\n")
    if stopped_at is not None:
        print(f"stopped at frame {stopped_at}: response peak fell below {stop_peak:g} "
              f"({len(lines)} frames labeled)")
    else:
        print(f"labeled {len(lines)} frames")
    return 0


def _cmd_bench(args) -> int:
    jumps = _positive_int_list(args.jumps, "--jumps")
    crops = _float_list(args.crops, "--crops")
    frames = FrameDir(args.frames)
    gt = read_ground_truth(args.gt)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    rows = []
    for jump in jumps:
        for crop in crops:
            config = FusionConfig(jump=jump, crop_scale=crop)
            outputs, _ = _run_track(frames, config, args.global_spec, args.roi_spec)
            report = evaluate(outputs, gt)
            name = f"report_jump{jump}_crop{crop:g}.json"
            write_report(report, out_dir / name, fmt="json")
            totals = [out.timings.get("total", 0.0) for out in outputs]
            mean_ms = sum(totals) / len(totals) if totals else 0.0
            rows.append((jump, crop, report.auc, report.avg_overlap, mean_ms, name))
    print(f"{'jump':>6} {'crop':>6} {'auc':>8} {'avg_iou':>8} {'mean_ms':>9}  report")
    for jump, crop, auc_value, avg, mean_ms, name in rows:
        print(f"{jump:>6} {crop:>6g} {auc_value:>8.4f} {avg:>8.4f} {mean_ms:>9.3f}  {name}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "track": _cmd_track,
    "evaluate": _cmd_evaluate,
    "label": _cmd_label,
    "bench": _cmd_bench,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (FormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR
    except RuntimeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_ERROR


if __name__ == "__main__":
    sys.exit(main())
