"""Multi-rate fusion of a slow full-frame detector, a fast region
detector, and a correlation filter.

While tracking, the full-frame ("global") detector runs on one of every
``jump`` frames and its confident detections anchor the track: a
detection that drifted away from the current box (IoU below
``global_resync_iou``) reinitializes the filter. All other frames are
served by the correlation filter, cross-checked by the region ("roi")
detector over a crop around the last confirmed position; when the two
disagree (IoU below ``divergence_iou``) for more than
``divergence_frames`` consecutive frames, the filter is reinitialized at
the region detection. Frames with no evidence from either the filter
(peak under ``kcf_peak_min``) or the region detector accumulate; after
``lost_after`` of them in a row the track is dropped and the global
detector runs every frame until it reacquires.

Modes
-----
synchronous: every stage completes within its frame; recorded stage
    times are the detectors' declared simulated latencies (measured
    wall time for transports that declare none) and 0.0 for the
    in-process filter, so identical inputs reproduce bit-identical
    outputs, timings included.
pipelined: global detections are issued in the background and their
    state effects land at the first frame boundary at or after
    completion; the per-frame path never waits on them. Recorded times
    are measured wall time of the per-frame path.

Track output files are JSON lines
``{"frame", "x", "y", "w", "h", "source", "phase", "ms"}`` with the box
fields omitted when source is "none" and ``ms`` holding per-stage
milliseconds {global, roi, kcf, total}.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import Future, ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from .detectors import Detection, DetectorTransportError, best_detection
from .frames import Frame
from .geometry import BBox, intersect, iou
from .kcf import KcfModel, KcfParams, kcf_init, kcf_locate, kcf_reinit, kcf_update
from .metrics import PredictedTrack

ACQUIRING = "acquiring"
TRACKING = "tracking"
LOST = "lost"

SOURCE_GLOBAL = "global"
SOURCE_KCF = "kcf"
SOURCE_NONE = "none"

SYNCHRONOUS = "synchronous"
PIPELINED = "pipelined"


@dataclass(frozen=True)
class FusionConfig:
    """Pipeline knobs; defaults are the reference configuration."""

    jump: int = 3
    crop_scale: float = 3.0
    global_score_min: float = 0.6
    roi_score_min: float = 0.6
    divergence_iou: float = 0.3
    divergence_frames: int = 3
    global_resync_iou: float = 0.3
    kcf_params: KcfParams = field(default_factory=KcfParams)
    kcf_peak_min: float = 0.25
    lost_after: int = 10
    mode: str = SYNCHRONOUS
    global_only: bool = False  # ablation: no roi detector, no filter

    def __post_init__(self):
        if self.jump < 1:
            raise ValueError(f"jump must be >= 1, got {self.jump}")
        if self.crop_scale <= 1.0:
            raise ValueError(f"crop_scale must be > 1, got {self.crop_scale}")
        for name in ("global_score_min", "roi_score_min", "divergence_iou", "global_resync_iou", "kcf_peak_min"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if self.divergence_frames < 1:
            raise ValueError(f"divergence_frames must be >= 1, got {self.divergence_frames}")
        if self.lost_after < 1:
            raise ValueError(f"lost_after must be >= 1, got {self.lost_after}")
        if self.mode not in (SYNCHRONOUS, PIPELINED):
            raise ValueError(f"mode must be {SYNCHRONOUS!r} or {PIPELINED!r}, got {self.mode!r}")


@dataclass
class TrackState:
    """Mutable tracker state between frames.

    While TRACKING, current_box is the last emitted position and roi the
    current search crop; both are dropped on LOST. The filter model is
    absent in the global-only ablation.
    """

    phase: str = ACQUIRING
    current_box: BBox | None = None
    roi: BBox | None = None
    divergence_count: int = 0
    no_evidence_count: int = 0
    kcf: KcfModel | None = None


@dataclass(frozen=True)
class TrackOutput:
    frame_index: int
    box: BBox | None
    source: str
    phase: str
    timings: dict[str, float]

    def __post_init__(self):
        if (self.box is None) != (self.source == SOURCE_NONE):
            raise ValueError("box must be present exactly when source is not 'none'")


class Pipeline:
    """Drives the three models over a frame sequence.

    A pipeline owns its state: feed it strictly increasing frame
    indices via step(), or a whole sequence via run(). ``events``
    records (frame, kind) for reinits, resyncs and phase changes;
    ``stats`` counts calls and failures.
    """

    def __init__(self, config: FusionConfig, global_detector, roi_detector=None):
        if not config.global_only and roi_detector is None:
            raise ValueError("a roi detector is required unless global_only is set")
        self.config = config
        self.global_detector = global_detector
        self.roi_detector = roi_detector
        self.state = TrackState()
        self.events: list[tuple[int, str]] = []
        self.stats = {
            "global_calls": 0,
            "roi_calls": 0,
            "transport_failures": 0,
            "divergence_reinits": 0,
            "global_resyncs": 0,
        }
        self._last_frame_index: int | None = None
        self._executor: ThreadPoolExecutor | None = None
        self._pending: tuple[int, Future] | None = None
        if config.mode == PIPELINED:
            self._executor = ThreadPoolExecutor(max_workers=1, thread_name_prefix="global-detector")

    # -- lifecycle -----------------------------------------------------

    def close(self) -> None:
        """Abandon any in-flight global call and release the detectors."""
        if self._executor is not None:
            if self._pending is not None and not self._pending[1].done():
                # Unblock the worker by resetting the transport.
                reset = getattr(self.global_detector, "reset", None)
                if reset is not None:
                    reset()
            self._pending = None
            self._executor.shutdown(wait=False, cancel_futures=True)
            self._executor = None
        for det in (self.global_detector, self.roi_detector):
            close = getattr(det, "close", None)
            if close is not None:
                close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False

    # -- detector calls ------------------------------------------------

    def _call_detector(self, detector, frame_index: int, frame: Frame, roi: BBox | None) -> tuple[list[Detection], float]:
        """Run a detector; a transport failure counts as no detections.

        Returns (detections, recorded_ms): the declared simulated
        latency when the detector declares one, else measured wall time.
        """
        start = time.perf_counter()
        try:
            detections = detector.detect(frame_index, frame, roi)
        except DetectorTransportError:
            detections = []
            self.stats["transport_failures"] += 1
        elapsed_ms = (time.perf_counter() - start) * 1000.0
        declared = getattr(detector, "declared_latency_ms", None)
        recorded = declared if declared is not None else elapsed_ms
        return detections, recorded

    def _run_global(self, frame_index: int, frame: Frame) -> tuple[Detection | None, float]:
        self.stats["global_calls"] += 1
        detections, ms = self._call_detector(self.global_detector, frame_index, frame, None)
        return best_detection(detections, self.config.global_score_min), ms

    def _run_roi(self, frame_index: int, frame: Frame, crop: BBox) -> tuple[Detection | None, float]:
        self.stats["roi_calls"] += 1
        detections, ms = self._call_detector(self.roi_detector, frame_index, frame, crop)
        return best_detection(detections, self.config.roi_score_min), ms

    # -- geometry helpers ----------------------------------------------

    def _crop_around(self, center: tuple[float, float], target: BBox, frame: Frame) -> BBox:
        """Square of side crop_scale x max(target side) at the center,
        clamped to the frame (the clamp may break squareness)."""
        side = self.config.crop_scale * max(target.w, target.h)
        square = BBox.from_center(center[0], center[1], side, side)
        clamped = intersect(square, BBox(0, 0, frame.width, frame.height))
        if clamped is None:
            # Center drifted fully outside; fall back to the whole frame.
            return BBox(0, 0, frame.width, frame.height)
        return clamped

    # -- state transitions ----------------------------------------------

    def _enter_tracking(self, frame_index: int, frame: Frame, det: Detection) -> None:
        s = self.state
        if not self.config.global_only:
            s.kcf = kcf_init(frame, det.box, self.config.kcf_params)
            s.roi = self._crop_around(det.box.center, det.box, frame)
        s.current_box = det.box
        s.divergence_count = 0
        s.no_evidence_count = 0
        if s.phase != TRACKING:
            s.phase = TRACKING
            self.events.append((frame_index, "enter_tracking"))

    def _enter_lost(self, frame_index: int) -> None:
        s = self.state
        s.phase = LOST
        s.current_box = None
        s.roi = None
        s.kcf = None
        s.divergence_count = 0
        self.events.append((frame_index, "enter_lost"))

    def _apply_confident_global(self, frame_index: int, frame: Frame, det: Detection) -> None:
        """Step-1 effects of a confident global detection while TRACKING."""
        s = self.state
        if not self.config.global_only and iou(det.box, s.current_box) < self.config.global_resync_iou:
            s.kcf = kcf_reinit(s.kcf, frame, det.box)
            self.stats["global_resyncs"] += 1
            self.events.append((frame_index, "global_resync"))
        s.current_box = det.box
        if not self.config.global_only:
            s.roi = self._crop_around(det.box.center, det.box, frame)
        s.divergence_count = 0
        s.no_evidence_count = 0

    # -- pipelined support ----------------------------------------------

    def _submit_global(self, frame_index: int, frame: Frame) -> None:
        if self._pending is None:
            self.stats["global_calls"] += 1
            future = self._executor.submit(self._background_global, frame_index, frame)
            self._pending = (frame_index, future)

    def _background_global(self, frame_index: int, frame: Frame) -> list[Detection]:
        return self.global_detector.detect(frame_index, frame, None)

    def _collect_global(self) -> Detection | None:
        """Completed background detection, if one is ready to apply."""
        if self._pending is None or not self._pending[1].done():
            return None
        _, future = self._pending
        self._pending = None
        try:
            detections = future.result()
        except DetectorTransportError:
            self.stats["transport_failures"] += 1
            return None
        return best_detection(detections, self.config.global_score_min)

    # -- stepping --------------------------------------------------------

    def step(self, frame_index: int, frame: Frame) -> TrackOutput:
        """Process one frame and emit its output."""
        if self._last_frame_index is not None and frame_index <= self._last_frame_index:
            raise ValueError(
                f"frame indices must be strictly increasing, got {frame_index} after {self._last_frame_index}"
            )
        self._last_frame_index = frame_index
        if self.config.mode == SYNCHRONOUS:
            return self._step_synchronous(frame_index, frame)
        return self._step_pipelined(frame_index, frame)

    def run(self, frames) -> list[TrackOutput]:
        """step() over a frame iterable, indices 0..n-1."""
        return [self.step(i, frame) for i, frame in enumerate(frames)]

    def _step_synchronous(self, frame_index: int, frame: Frame) -> TrackOutput:
        ms = {"global": 0.0, "roi": 0.0, "kcf": 0.0, "total": 0.0}
        s = self.state

        if s.phase != TRACKING:
            det, ms["global"] = self._run_global(frame_index, frame)
            if det is not None:
                self._enter_tracking(frame_index, frame, det)
                return self._emit(frame_index, det.box, SOURCE_GLOBAL, ms)
            return self._emit(frame_index, None, SOURCE_NONE, ms)

        if frame_index % self.config.jump == 0:
            det, ms["global"] = self._run_global(frame_index, frame)
            if det is not None:
                self._apply_confident_global(frame_index, frame, det)
                return self._emit(frame_index, det.box, SOURCE_GLOBAL, ms)
            # No confident detection: fall through to the per-frame path.

        if self.config.global_only:
            s.no_evidence_count += 1
            if s.no_evidence_count >= self.config.lost_after:
                self._enter_lost(frame_index)
            return self._emit(frame_index, None, SOURCE_NONE, ms)

        return self._per_frame_path(frame_index, frame, ms)

    def _step_pipelined(self, frame_index: int, frame: Frame) -> TrackOutput:
        start = time.perf_counter()
        ms = {"global": 0.0, "roi": 0.0, "kcf": 0.0, "total": 0.0}
        s = self.state
        applied = self._collect_global()

        if s.phase != TRACKING:
            if applied is not None:
                self._enter_tracking(frame_index, frame, applied)
                self._submit_if_due(frame_index, frame)
                return self._emit_measured(frame_index, applied.box, SOURCE_GLOBAL, ms, start)
            self._submit_global(frame_index, frame)  # keep one in flight
            return self._emit_measured(frame_index, None, SOURCE_NONE, ms, start)

        self._submit_if_due(frame_index, frame)
        if applied is not None:
            self._apply_confident_global(frame_index, frame, applied)
            return self._emit_measured(frame_index, applied.box, SOURCE_GLOBAL, ms, start)

        if self.config.global_only:
            s.no_evidence_count += 1
            if s.no_evidence_count >= self.config.lost_after:
                self._enter_lost(frame_index)
            return self._emit_measured(frame_index, None, SOURCE_NONE, ms, start)

        out = self._per_frame_path(frame_index, frame, ms, measure=True)
        ms["total"] = (time.perf_counter() - start) * 1000.0
        return out

    def _submit_if_due(self, frame_index: int, frame: Frame) -> None:
        if self.state.phase == TRACKING and frame_index % self.config.jump == 0:
            self._submit_global(frame_index, frame)

    def _per_frame_path(self, frame_index: int, frame: Frame, ms: dict, measure: bool = False) -> TrackOutput:
        """Filter localization cross-checked by the region detector."""
        s = self.state
        crop = self._crop_around((s.roi.cx, s.roi.cy), s.current_box, frame)
        s.roi = crop
        roi_det, ms["roi"] = self._run_roi(frame_index, frame, crop)

        kcf_start = time.perf_counter()
        kcf_box, peak = kcf_locate(s.kcf, frame)
        if measure:
            ms["kcf"] = (time.perf_counter() - kcf_start) * 1000.0

        reinitialized = False
        if roi_det is not None:
            if iou(kcf_box, roi_det.box) < self.config.divergence_iou:
                s.divergence_count += 1
            else:
                s.divergence_count = 0
            if s.divergence_count > self.config.divergence_frames:
                s.kcf = kcf_reinit(s.kcf, frame, roi_det.box)
                s.divergence_count = 0
                reinitialized = True
                self.stats["divergence_reinits"] += 1
                self.events.append((frame_index, "divergence_reinit"))

        anchor = roi_det.box if roi_det is not None else kcf_box
        s.roi = self._crop_around(anchor.center, s.current_box, frame)
        if not reinitialized and peak >= self.config.kcf_peak_min:
            s.kcf = kcf_update(s.kcf, frame, kcf_box)
        s.current_box = kcf_box

        if peak < self.config.kcf_peak_min and roi_det is None:
            s.no_evidence_count += 1
        else:
            s.no_evidence_count = 0
        if s.no_evidence_count >= self.config.lost_after:
            self._enter_lost(frame_index)
            return self._emit(frame_index, None, SOURCE_NONE, ms)
        return self._emit(frame_index, kcf_box, SOURCE_KCF, ms)

    def _emit(self, frame_index: int, box: BBox | None, source: str, ms: dict) -> TrackOutput:
        ms["total"] = ms["global"] + ms["roi"] + ms["kcf"]
        return TrackOutput(frame_index, box, source, self.state.phase, ms)

    def _emit_measured(self, frame_index: int, box: BBox | None, source: str, ms: dict, start: float) -> TrackOutput:
        ms["total"] = (time.perf_counter() - start) * 1000.0
        return TrackOutput(frame_index, box, source, self.state.phase, ms)


def write_track_outputs(outputs: list[TrackOutput], path: str | Path) -> None:
    """Write outputs as JSON lines; box fields are omitted on 'none'."""
    lines = []
    for out in outputs:
        obj: dict = {"frame": out.frame_index}
        if out.box is not None:
            obj.update(x=out.box.x, y=out.box.y, w=out.box.w, h=out.box.h)
        obj["source"] = out.source
        obj["phase"] = out.phase
        obj["ms"] = {k: out.timings.get(k, 0.0) for k in ("global", "roi", "kcf", "total")}
        lines.append(json.dumps(obj))
    Path(path).write_text("\n".join(lines) + "\n")


def read_track_outputs(path: str | Path) -> list[TrackOutput]:
    outputs = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{lineno}: bad JSON: {exc}") from None
        try:
            frame = int(obj["frame"])
            source = obj["source"]
            phase = obj["phase"]
            ms = {k: float(v) for k, v in obj.get("ms", {}).items()}
            box = None
            if source != SOURCE_NONE:
                box = BBox(float(obj["x"]), float(obj["y"]), float(obj["w"]), float(obj["h"]))
        except (KeyError, TypeError, ValueError):
            raise ValueError(f"{path}:{lineno}: malformed track output line") from None
        outputs.append(TrackOutput(frame, box, source, phase, ms))
    return outputs


def outputs_to_predictions(outputs: list[TrackOutput]) -> PredictedTrack:
    """Track outputs as a prediction track (frames with no box stay
    empty), e.g. for export to the prediction CSV format."""
    return PredictedTrack(tuple((out.frame_index, out.box) for out in outputs))
