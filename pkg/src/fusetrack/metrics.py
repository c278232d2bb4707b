"""Single-target tracking metrics and track file formats.

A ground-truth track is one box per frame plus a visibility flag; a
predicted track is one box per frame where the tracker produced output.
Per-frame overlap is IoU on visible frames (0 when the prediction is
missing); frames marked invisible are excluded from every average. The
one-pass-evaluation curve reports, for each threshold, the fraction of
overlaps strictly greater than it, and its area under the curve is a
trapezoidal integral normalized to the spanned threshold range.

File formats
------------
Ground truth: CSV lines ``frame,x,y,w,h,visible`` with base-10 integers,
0-based frame indices, strictly increasing, not necessarily contiguous
(missing frames count as invisible). ``visible`` is 0 or 1; with
visible=0 the box fields are still present (conventionally 0).
Predictions: same format without the ``visible`` column; a frame absent
from the file simply has no prediction.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .geometry import BBox, iou


class FormatError(ValueError):
    """A track file does not conform to its declared format."""


#: Default OPE thresholds: 0.0 to 1.0 inclusive, step 0.05.
DEFAULT_THRESHOLDS: tuple[float, ...] = tuple(round(0.05 * i, 2) for i in range(21))


@dataclass(frozen=True)
class GtEntry:
    frame: int
    box: BBox | None
    visible: bool

    def __post_init__(self):
        if self.visible and self.box is None:
            raise ValueError(f"frame {self.frame}: visible entry needs a box")


@dataclass(frozen=True)
class GroundTruthTrack:
    """Per-frame annotated target positions, ordered by frame index."""

    entries: tuple[GtEntry, ...]

    def __post_init__(self):
        last = None
        for e in self.entries:
            if last is not None and e.frame <= last:
                raise ValueError(f"frame indices must be strictly increasing, got {e.frame} after {last}")
            last = e.frame

    def visible_entries(self) -> list[GtEntry]:
        return [e for e in self.entries if e.visible]

    def lookup(self, frame: int) -> GtEntry:
        """Entry for a frame; frames not in the track are invisible."""
        entry = self._by_frame().get(frame)
        return entry if entry is not None else GtEntry(frame, None, False)

    def _by_frame(self) -> dict[int, GtEntry]:
        cached = getattr(self, "_index", None)
        if cached is None:
            cached = {e.frame: e for e in self.entries}
            object.__setattr__(self, "_index", cached)
        return cached


@dataclass(frozen=True)
class PredictedTrack:
    """Per-frame tracker output boxes, ordered by frame index.

    A None box records a frame the tracker processed but produced no
    output for; it scores the same as an absent frame.
    """

    entries: tuple[tuple[int, BBox | None], ...]

    def __post_init__(self):
        last = None
        for frame, _ in self.entries:
            if last is not None and frame <= last:
                raise ValueError(f"frame indices must be strictly increasing, got {frame} after {last}")
            last = frame

    def box_at(self, frame: int) -> BBox | None:
        return self._by_frame().get(frame)

    def _by_frame(self) -> dict[int, BBox]:
        cached = getattr(self, "_index", None)
        if cached is None:
            cached = {f: b for f, b in self.entries if b is not None}
            object.__setattr__(self, "_index", cached)
        return cached


@dataclass(frozen=True)
class OpeCurve:
    """One-pass-evaluation success curve: (threshold, success_rate) points."""

    points: tuple[tuple[float, float], ...]

    def __post_init__(self):
        if not self.points:
            raise ValueError("OpeCurve needs at least one point")
        last_t = None
        last_r = None
        for t, r in self.points:
            if not 0.0 <= t <= 1.0:
                raise ValueError(f"threshold {t} outside [0, 1]")
            if not 0.0 <= r <= 1.0:
                raise ValueError(f"success rate {r} outside [0, 1]")
            if last_t is not None and t <= last_t:
                raise ValueError("thresholds must be strictly increasing")
            if last_r is not None and r > last_r + 1e-12:
                raise ValueError("success rate must be non-increasing in the threshold")
            last_t, last_r = t, r

    @property
    def thresholds(self) -> tuple[float, ...]:
        return tuple(t for t, _ in self.points)

    @property
    def rates(self) -> tuple[float, ...]:
        return tuple(r for _, r in self.points)


def per_frame_overlaps(pred: PredictedTrack, gt: GroundTruthTrack) -> list[tuple[int, float]]:
    """(frame, IoU) over visible ground-truth frames.

    A visible frame with no prediction scores 0.0; invisible frames are
    excluded entirely.
    """
    out = []
    for entry in gt.entries:
        if not entry.visible:
            continue
        box = pred.box_at(entry.frame)
        out.append((entry.frame, iou(box, entry.box) if box is not None else 0.0))
    return out


def average_overlap(overlaps: list[float]) -> float:
    if not overlaps:
        raise ValueError("average_overlap of an empty overlap list")
    return sum(overlaps) / len(overlaps)


def success_rate(overlaps: list[float], threshold: float) -> float:
    """Fraction of overlaps strictly greater than the threshold."""
    if not overlaps:
        raise ValueError("success_rate of an empty overlap list")
    return sum(1 for v in overlaps if v > threshold) / len(overlaps)


def ope_curve(overlaps: list[float], thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS) -> OpeCurve:
    """Success curve of an overlap multiset over increasing thresholds."""
    if not overlaps:
        raise ValueError("ope_curve of an empty overlap list")
    return OpeCurve(tuple((t, success_rate(overlaps, t)) for t in thresholds))


def auc(curve: OpeCurve) -> float:
    """Trapezoidal area under the success curve, normalized to the
    spanned threshold range (a single-point curve is its own rate)."""
    ts = curve.thresholds
    rs = curve.rates
    if len(ts) == 1:
        return rs[0]
    total = 0.0
    for i in range(len(ts) - 1):
        total += 0.5 * (rs[i] + rs[i + 1]) * (ts[i + 1] - ts[i])
    return total / (ts[-1] - ts[0])


def _parse_int_fields(line: str, count: int, lineno: int, path: str) -> list[int]:
    parts = line.split(",")
    if len(parts) != count:
        raise FormatError(f"{path}:{lineno}: expected {count} comma-separated fields, got {len(parts)}")
    values = []
    for part in parts:
        try:
            values.append(int(part.strip()))
        except ValueError:
            raise FormatError(f"{path}:{lineno}: non-integer field {part.strip()!r}") from None
    return values


def read_ground_truth(path: str | Path) -> GroundTruthTrack:
    entries = []
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        frame, x, y, w, h, visible = _parse_int_fields(line, 6, lineno, str(path))
        if visible not in (0, 1):
            raise FormatError(f"{path}:{lineno}: visible must be 0 or 1, got {visible}")
        if frame < 0:
            raise FormatError(f"{path}:{lineno}: negative frame index {frame}")
        if visible and (w <= 0 or h <= 0):
            raise FormatError(f"{path}:{lineno}: visible entry with non-positive size {w}x{h}")
        box = BBox(x, y, w, h) if visible else None
        entries.append(GtEntry(frame, box, bool(visible)))
    try:
        return GroundTruthTrack(tuple(entries))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_ground_truth(track: GroundTruthTrack, path: str | Path) -> None:
    lines = []
    for e in track.entries:
        if e.visible:
            b = e.box
            lines.append(f"{e.frame},{round(b.x)},{round(b.y)},{round(b.w)},{round(b.h)},1")
        else:
            lines.append(f"{e.frame},0,0,0,0,0")
    Path(path).write_text("\n".join(lines) + "\n")


def read_predictions(path: str | Path) -> PredictedTrack:
    entries = []
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        frame, x, y, w, h = _parse_int_fields(line, 5, lineno, str(path))
        if frame < 0:
            raise FormatError(f"{path}:{lineno}: negative frame index {frame}")
        if w <= 0 or h <= 0:
            raise FormatError(f"{path}:{lineno}: non-positive size {w}x{h}")
        entries.append((frame, BBox(x, y, w, h)))
    try:
        return PredictedTrack(tuple(entries))
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None


def write_predictions(track: PredictedTrack, path: str | Path) -> None:
    lines = []
    for frame, box in track.entries:
        if box is None:
            continue
        lines.append(f"{frame},{round(box.x)},{round(box.y)},{round(box.w)},{round(box.h)}")
    Path(path).write_text("\n".join(lines) + "\n")
