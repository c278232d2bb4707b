"""Request loop: newline-delimited JSON over stdio or TCP.

One request is in flight at a time. A request that cannot be served
gets an ``{"id": ..., "error": ...}`` response (id null when the line
was not even a JSON object) and the loop keeps going; only transport
EOF or a signal stops it. ``frame``, ``image`` and ``id`` are required;
a missing ``roi`` key is read as null (full frame).
"""

from __future__ import annotations

import json
import math
import socketserver
import sys
from typing import TYPE_CHECKING

from .model import load_model
from .ppm import FormatError, read_ppm

if TYPE_CHECKING:  # pragma: no cover
    from . import SidecarConfig


def _error(request_id, reason: str) -> str:
    return json.dumps({"id": request_id, "error": reason})


def _crop_rect(roi, width: int, height: int) -> tuple[int, int, int, int]:
    """Integer pixel window covering the float roi, clamped to the image."""
    x, y, w, h = roi
    return (
        max(0, math.floor(x)),
        max(0, math.floor(y)),
        min(width, math.ceil(x + w)),
        min(height, math.ceil(y + h)),
    )


def _is_number(value) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


class RequestHandler:
    """Turns one request line into one response line."""

    def __init__(self, config: "SidecarConfig"):
        self.config = config
        self.model = load_model(config.model_id)

    def handle_line(self, line: str) -> str:
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            return _error(None, f"bad json: {exc}")
        if not isinstance(obj, dict):
            return _error(None, "request must be a JSON object")
        request_id = obj.get("id")
        if not isinstance(request_id, int) or isinstance(request_id, bool):
            return _error(None, "request needs an integer 'id'")
        if "frame" not in obj or "image" not in obj:
            return _error(request_id, "request needs 'frame' and 'image'")
        frame, image_path = obj["frame"], obj["image"]
        roi = obj.get("roi")
        if not isinstance(frame, int) or isinstance(frame, bool):
            return _error(request_id, "'frame' must be an integer")
        if not isinstance(image_path, str):
            return _error(request_id, "'image' must be a path string")
        if roi is not None:
            if not (isinstance(roi, list) and len(roi) == 4 and all(_is_number(v) for v in roi)):
                return _error(request_id, "'roi' must be null or [x, y, w, h]")
            if roi[2] <= 0 or roi[3] <= 0:
                return _error(request_id, "'roi' needs positive width and height")
        try:
            image = read_ppm(image_path)
        except FormatError as exc:
            return _error(request_id, str(exc))
        rect = _crop_rect(roi, image.width, image.height) if roi is not None else None
        detections = [
            {"x": d.x, "y": d.y, "w": d.w, "h": d.h, "score": d.score}
            for d in self.model.detect(image, rect)
            if d.label == self.config.class_filter and d.score >= self.config.score_floor
        ]
        return json.dumps({"id": request_id, "detections": detections})


def _serve_stdio(handler: RequestHandler) -> None:
    for line in sys.stdin:
        if not line.strip():
            continue
        sys.stdout.write(handler.handle_line(line) + "\n")
        sys.stdout.flush()


class _LineServer(socketserver.TCPServer):
    allow_reuse_address = True


def _serve_tcp(handler: RequestHandler, port: int) -> None:
    class Connection(socketserver.StreamRequestHandler):
        def handle(self):
            for raw in self.rfile:
                line = raw.decode("utf-8", errors="replace")
                if not line.strip():
                    continue
                self.wfile.write((handler.handle_line(line) + "\n").encode("utf-8"))
                self.wfile.flush()

    with _LineServer(("127.0.0.1", port), Connection) as server:
        host, bound_port = server.server_address[:2]
        # Announce the bound address so callers using port 0 can find us.
        print(f"listening on {host}:{bound_port}", file=sys.stderr, flush=True)
        server.serve_forever(poll_interval=0.1)


def serve(config: "SidecarConfig") -> None:
    handler = RequestHandler(config)
    port = config.tcp_port()
    if port is None:
        _serve_stdio(handler)
    else:
        _serve_tcp(handler, port)
