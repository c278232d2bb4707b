"""Run evaluation: overlap metrics, success curve, throughput and loss
accounting, with JSON/CSV report files.

Evaluation covers the ground-truth frames that are visible and fall
inside the frame range the tracker actually processed. Frames the
tracker emitted nothing for score an overlap of 0; invisible frames are
excluded everywhere. ``lost_frames`` counts visible frames with no
emitted box. ``avg_fps`` is 1000 over the mean recorded per-frame total
milliseconds, so it reflects recorded processing cost rather than
whole-run wall time.

The JSON report has exactly the keys avg_overlap, auc, success_at_05,
avg_fps, lost_frames, frame_count, ope (list of {t, rate}) and
per_stage_ms ({global, roi, kcf, total}); the CSV form is one summary
row plus one row per curve point.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from .fusion import TrackOutput
from .metrics import (
    DEFAULT_THRESHOLDS,
    GroundTruthTrack,
    OpeCurve,
    auc,
    average_overlap,
    ope_curve,
    success_rate,
)
from .geometry import iou

STAGES = ("global", "roi", "kcf", "total")


@dataclass(frozen=True)
class EvalReport:
    avg_overlap: float
    auc: float
    success_at_05: float
    avg_fps: float
    lost_frames: int
    frame_count: int
    ope: OpeCurve
    per_stage_ms: dict[str, float]

    def __post_init__(self):
        if not 0.0 <= self.avg_overlap <= 1.0:
            raise ValueError(f"avg_overlap outside [0, 1]: {self.avg_overlap}")
        if self.avg_fps < 0:
            raise ValueError(f"avg_fps must be >= 0, got {self.avg_fps}")
        if self.lost_frames < 0 or self.lost_frames > self.frame_count:
            raise ValueError("lost_frames must lie in [0, frame_count]")


def evaluate(
    outputs: list[TrackOutput],
    gt: GroundTruthTrack,
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS,
) -> EvalReport:
    """Score tracker outputs against ground truth."""
    if not outputs:
        raise ValueError("no tracker outputs to evaluate")
    by_frame = {out.frame_index: out for out in outputs}
    lo = min(by_frame)
    hi = max(by_frame)

    overlaps = []
    lost = 0
    for entry in gt.entries:
        if not entry.visible or not lo <= entry.frame <= hi:
            continue
        out = by_frame.get(entry.frame)
        if out is None or out.box is None:
            overlaps.append(0.0)
            lost += 1
        else:
            overlaps.append(iou(out.box, entry.box))
    if not overlaps:
        raise ValueError("tracker outputs and visible ground truth share no frames")

    curve = ope_curve(overlaps, thresholds)
    totals = [out.timings.get("total", 0.0) for out in outputs]
    mean_total = sum(totals) / len(totals)
    stage_means = {
        stage: sum(out.timings.get(stage, 0.0) for out in outputs) / len(outputs) for stage in STAGES
    }
    return EvalReport(
        avg_overlap=average_overlap(overlaps),
        auc=auc(curve),
        success_at_05=success_rate(overlaps, 0.5),
        avg_fps=(1000.0 / mean_total) if mean_total > 0 else 0.0,
        lost_frames=lost,
        frame_count=len(overlaps),
        ope=curve,
        per_stage_ms=stage_means,
    )


def write_report(report: EvalReport, path: str | Path, fmt: str = "json") -> None:
    if fmt == "json":
        obj = {
            "avg_overlap": report.avg_overlap,
            "auc": report.auc,
            "success_at_05": report.success_at_05,
            "avg_fps": report.avg_fps,
            "lost_frames": report.lost_frames,
            "frame_count": report.frame_count,
            "ope": [{"t": t, "rate": r} for t, r in report.ope.points],
            "per_stage_ms": {stage: report.per_stage_ms.get(stage, 0.0) for stage in STAGES},
        }
        Path(path).write_text(json.dumps(obj, indent=2) + "\n")
    elif fmt == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["record", "threshold", "rate", "avg_overlap", "auc", "success_at_05",
                 "avg_fps", "lost_frames", "frame_count",
                 "ms_global", "ms_roi", "ms_kcf", "ms_total"]
            )
            writer.writerow(
                ["summary", "", "", report.avg_overlap, report.auc, report.success_at_05,
                 report.avg_fps, report.lost_frames, report.frame_count]
                + [report.per_stage_ms.get(stage, 0.0) for stage in STAGES]
            )
            for t, r in report.ope.points:
                writer.writerow(["ope", t, r] + [""] * 10)
    else:
        raise ValueError(f"unknown report format {fmt!r} (want json or csv)")


def read_report(path: str | Path) -> EvalReport:
    """Read back a JSON report (the CSV form is export-only)."""
    obj = json.loads(Path(path).read_text())
    try:
        return EvalReport(
            avg_overlap=float(obj["avg_overlap"]),
            auc=float(obj["auc"]),
            success_at_05=float(obj["success_at_05"]),
            avg_fps=float(obj["avg_fps"]),
            lost_frames=int(obj["lost_frames"]),
            frame_count=int(obj["frame_count"]),
            ope=OpeCurve(tuple((float(p["t"]), float(p["rate"])) for p in obj["ope"])),
            per_stage_ms={k: float(v) for k, v in obj["per_stage_ms"].items()},
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: malformed report: {exc}") from None
