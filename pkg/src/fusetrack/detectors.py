"""Detector backends behind one call shape.

A detector is asked for detections on a frame, optionally confined to a
region of interest. Returned boxes are always in full-frame coordinates
and never leak outside the roi; results are sorted by descending score.

Three transports:

* scripted -- replays a detection stream file (one JSON object per
  line: ``{"frame": n, "detections": [{"x","y","w","h","score"}]}``,
  sorted by frame, unknown keys ignored). An optional simulated latency
  makes every call take at least that long.
* subprocess -- spawns a command and speaks newline-delimited JSON over
  its stdin/stdout.
* tcp -- the same protocol over a socket.

Wire protocol (one JSON object per line):
request ``{"id": n, "frame": n, "image": "<path>", "roi": [x,y,w,h] | null}``;
response ``{"id": n, "detections": [...]}``. With a roi, response boxes
are in crop-local coordinates; this module translates them back and
clamps to the roi. A transport failure raises DetectorTransportError,
which is distinct from an empty detection list, and resets the
connection so the next call starts clean.

Spec strings (CLI syntax): ``scripted:<path>[@<latency>ms]``,
``exec:<command line>``, ``tcp:<host>:<port>``.
"""

from __future__ import annotations

import json
import shlex
import socket
import subprocess
import time
from dataclasses import dataclass
from pathlib import Path

from .frames import Frame
from .geometry import BBox, intersect


class DetectorTransportError(RuntimeError):
    """The detector could not be reached or answered garbage."""


@dataclass(frozen=True)
class Detection:
    box: BBox
    score: float

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score must lie in [0, 1], got {self.score}")


@dataclass(frozen=True)
class DetectorSpec:
    kind: str  # scripted | subprocess | tcp
    source: str
    simulated_latency_ms: float = 0.0

    def __post_init__(self):
        if self.kind not in ("scripted", "subprocess", "tcp"):
            raise ValueError(f"unknown detector kind {self.kind!r}")
        if self.simulated_latency_ms < 0:
            raise ValueError("simulated latency must be >= 0")


def parse_detector_spec(text: str) -> DetectorSpec:
    """Parse a CLI detector string into a DetectorSpec."""
    if text.startswith("scripted:"):
        rest = text[len("scripted:"):]
        latency = 0.0
        if "@" in rest:
            rest, _, suffix = rest.rpartition("@")
            if not suffix.endswith("ms"):
                raise ValueError(f"latency suffix must end in 'ms': {text!r}")
            try:
                latency = float(suffix[:-2])
            except ValueError:
                raise ValueError(f"bad latency value in {text!r}") from None
            if latency < 0:
                raise ValueError(f"latency must be >= 0 in {text!r}")
        if not rest:
            raise ValueError(f"empty path in {text!r}")
        return DetectorSpec("scripted", rest, latency)
    if text.startswith("exec:"):
        cmd = text[len("exec:"):].strip()
        if not cmd:
            raise ValueError(f"empty command in {text!r}")
        return DetectorSpec("subprocess", cmd)
    if text.startswith("tcp:"):
        addr = text[len("tcp:"):]
        host, sep, port = addr.rpartition(":")
        if not sep or not host:
            raise ValueError(f"tcp spec needs host:port, got {text!r}")
        try:
            port_num = int(port)
        except ValueError:
            raise ValueError(f"bad port in {text!r}") from None
        if not 0 < port_num < 65536:
            raise ValueError(f"port out of range in {text!r}")
        return DetectorSpec("tcp", addr)
    raise ValueError(f"unknown detector spec {text!r} (want scripted:, exec: or tcp:)")


def build_detector(spec: DetectorSpec | str):
    if isinstance(spec, str):
        spec = parse_detector_spec(spec)
    if spec.kind == "scripted":
        return ScriptedDetector.from_file(spec.source, latency_ms=spec.simulated_latency_ms)
    if spec.kind == "subprocess":
        return SubprocessDetector(spec.source)
    return TcpDetector(spec.source)


def best_detection(detections: list[Detection], min_score: float) -> Detection | None:
    """Highest-scoring detection with score >= min_score, or None.

    Equal scores resolve to the earliest detection in the list, so the
    choice is deterministic for a fixed input order.
    """
    best = None
    for det in detections:
        if det.score >= min_score and (best is None or det.score > best.score):
            best = det
    return best


def _clamp_to_roi(box: BBox, roi: BBox) -> BBox | None:
    return intersect(box, roi)


def _parse_detection_obj(obj: dict, where: str) -> Detection:
    try:
        x = float(obj["x"])
        y = float(obj["y"])
        w = float(obj["w"])
        h = float(obj["h"])
        score = float(obj["score"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{where}: malformed detection object {obj!r}") from exc
    if w <= 0 or h <= 0:
        raise ValueError(f"{where}: detection with non-positive size {w}x{h}")
    if not 0.0 <= score <= 1.0:
        raise ValueError(f"{where}: detection score {score} outside [0, 1]")
    return Detection(BBox(x, y, w, h), score)


def _sorted_by_score(detections: list[Detection]) -> list[Detection]:
    return sorted(detections, key=lambda d: -d.score)


class ScriptedDetector:
    """Replays a fixed detection stream; frames not in the stream yield
    no detections. With a roi, full-frame boxes are clamped into it."""

    def __init__(self, records: dict[int, list[Detection]], latency_ms: float = 0.0):
        if latency_ms < 0:
            raise ValueError("latency_ms must be >= 0")
        self.records = records
        self.latency_ms = latency_ms

    @classmethod
    def from_file(cls, path: str | Path, latency_ms: float = 0.0) -> "ScriptedDetector":
        path = Path(path)
        if not path.is_file():
            raise ValueError(f"scripted detection file not found: {path}")
        records: dict[int, list[Detection]] = {}
        last_frame = None
        for lineno, line in enumerate(path.read_text().splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: bad JSON: {exc}") from None
            where = f"{path}:{lineno}"
            try:
                frame = int(obj["frame"])
                raw = obj["detections"]
            except (KeyError, TypeError, ValueError):
                raise ValueError(f"{where}: line needs 'frame' and 'detections'") from None
            if last_frame is not None and frame <= last_frame:
                raise ValueError(f"{where}: frames must be sorted, got {frame} after {last_frame}")
            last_frame = frame
            records[frame] = [_parse_detection_obj(d, where) for d in raw]
        return cls(records, latency_ms=latency_ms)

    @property
    def declared_latency_ms(self) -> float:
        return self.latency_ms

    def detect(self, frame_index: int, frame: Frame | str | Path | None, roi: BBox | None = None) -> list[Detection]:
        if self.latency_ms > 0:
            time.sleep(self.latency_ms / 1000.0)
        found = self.records.get(frame_index, [])
        if roi is not None:
            clamped = []
            for det in found:
                box = _clamp_to_roi(det.box, roi)
                if box is not None:
                    clamped.append(Detection(box, det.score))
            found = clamped
        return _sorted_by_score(list(found))

    def reset(self) -> None:
        pass

    def close(self) -> None:
        pass


class _RemoteDetector:
    """Shared request/response handling for out-of-process detectors."""

    def __init__(self):
        self._next_id = 0

    @property
    def declared_latency_ms(self) -> None:
        return None

    def _send_line(self, line: str) -> str:
        raise NotImplementedError

    def reset(self) -> None:
        raise NotImplementedError

    def close(self) -> None:
        self.reset()

    def detect(self, frame_index: int, frame: Frame | str | Path | None, roi: BBox | None = None) -> list[Detection]:
        if isinstance(frame, Frame):
            image = frame.path
        elif frame is not None:
            image = str(frame)
        else:
            image = None
        if image is None:
            raise DetectorTransportError("remote detector needs a frame backed by a file")
        request_id = self._next_id
        self._next_id += 1
        request = {
            "id": request_id,
            "frame": frame_index,
            "image": str(image),
            "roi": [roi.x, roi.y, roi.w, roi.h] if roi is not None else None,
        }
        try:
            reply = self._send_line(json.dumps(request))
        except DetectorTransportError:
            self.reset()
            raise
        try:
            obj = json.loads(reply)
        except json.JSONDecodeError:
            self.reset()
            raise DetectorTransportError(f"unparseable detector response: {reply[:200]!r}") from None
        if not isinstance(obj, dict) or obj.get("id") != request_id:
            self.reset()
            raise DetectorTransportError(f"detector response id mismatch: {reply[:200]!r}")
        if "error" in obj:
            raise DetectorTransportError(f"detector error: {obj['error']}")
        raw = obj.get("detections")
        if not isinstance(raw, list):
            self.reset()
            raise DetectorTransportError(f"detector response missing detections: {reply[:200]!r}")
        try:
            detections = [_parse_detection_obj(d, "response") for d in raw]
        except ValueError as exc:
            self.reset()
            raise DetectorTransportError(str(exc)) from None
        if roi is not None:
            # Crop-local coordinates: translate back, then clamp.
            translated = []
            for det in detections:
                box = _clamp_to_roi(det.box.shifted(roi.x, roi.y), roi)
                if box is not None:
                    translated.append(Detection(box, det.score))
            detections = translated
        return _sorted_by_score(detections)


class SubprocessDetector(_RemoteDetector):
    """Detector behind a spawned command, newline-delimited JSON on
    stdin/stdout. The process is started lazily and restarted after a
    transport failure."""

    def __init__(self, command: str):
        super().__init__()
        if not command.strip():
            raise ValueError("empty detector command")
        self.command = command
        self._proc: subprocess.Popen | None = None

    def _ensure_proc(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            try:
                self._proc = subprocess.Popen(
                    shlex.split(self.command),
                    stdin=subprocess.PIPE,
                    stdout=subprocess.PIPE,
                    text=True,
                    bufsize=1,
                )
            except OSError as exc:
                raise DetectorTransportError(f"cannot spawn detector: {exc}") from None
        return self._proc

    def _send_line(self, line: str) -> str:
        proc = self._ensure_proc()
        try:
            proc.stdin.write(line + "\n")
            proc.stdin.flush()
            reply = proc.stdout.readline()
        except (OSError, ValueError) as exc:
            raise DetectorTransportError(f"detector pipe failed: {exc}") from None
        if not reply:
            raise DetectorTransportError("detector closed its output")
        return reply

    def reset(self) -> None:
        if self._proc is not None:
            proc, self._proc = self._proc, None
            try:
                proc.kill()
                proc.wait(timeout=5)
            except OSError:
                pass


class TcpDetector(_RemoteDetector):
    """Detector behind a TCP endpoint, one connection, newline-delimited
    JSON. Connects lazily and reconnects after a transport failure."""

    def __init__(self, address: str):
        super().__init__()
        host, sep, port = address.rpartition(":")
        if not sep or not host:
            raise ValueError(f"tcp address needs host:port, got {address!r}")
        self.host = host
        self.port = int(port)
        self._sock: socket.socket | None = None
        self._reader = None

    def _ensure_conn(self):
        if self._sock is None:
            try:
                self._sock = socket.create_connection((self.host, self.port), timeout=30)
                self._reader = self._sock.makefile("r", encoding="utf-8", newline="\n")
            except OSError as exc:
                self._sock = None
                self._reader = None
                raise DetectorTransportError(f"cannot connect to detector: {exc}") from None

    def _send_line(self, line: str) -> str:
        self._ensure_conn()
        try:
            self._sock.sendall((line + "\n").encode("utf-8"))
            reply = self._reader.readline()
        except OSError as exc:
            raise DetectorTransportError(f"detector socket failed: {exc}") from None
        if not reply:
            raise DetectorTransportError("detector closed the connection")
        return reply

    def reset(self) -> None:
        if self._reader is not None:
            try:
                self._reader.close()
            except OSError:
                pass
            self._reader = None
        if self._sock is not None:
            sock, self._sock = self._sock, None
            try:
                sock.close()
            except OSError:
                pass
