"""Out-of-process object detection behind a line protocol.

The sidecar wraps a detection model and answers newline-delimited JSON
requests over stdio or a TCP socket, so a tracking pipeline can call a
heavyweight detector without linking against it. One request is served
at a time; a malformed request gets an error response and the process
keeps serving.

Request  ``{"id": n, "frame": n, "image": "<path>", "roi": [x,y,w,h] | null}``
Response ``{"id": n, "detections": [{"x","y","w","h","score"}, ...]}``
Failure  ``{"id": n | null, "error": "<reason>"}``

With a roi the referenced image is cropped first and the returned
coordinates are local to the crop; the caller translates them back.
Detections are filtered to the configured class label and score floor
and sorted by descending score.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import MODEL_IDS, load_model
from .ppm import FormatError, read_ppm

__all__ = [
    "FormatError",
    "MODEL_IDS",
    "SidecarConfig",
    "load_model",
    "read_ppm",
    "serve",
]


@dataclass(frozen=True)
class SidecarConfig:
    """Startup configuration, mirrored one-for-one by the CLI flags."""

    model_id: str = "blob-v1"
    class_filter: str = "person"
    score_floor: float = 0.0
    transport: str = "stdio"  # "stdio" or "tcp:<port>"

    def __post_init__(self):
        if not 0.0 <= self.score_floor <= 1.0:
            raise ValueError(f"score_floor must lie in [0, 1], got {self.score_floor}")
        if self.transport != "stdio":
            port = self.tcp_port()
            if port is None:
                raise ValueError(f"transport must be 'stdio' or 'tcp:<port>', got {self.transport!r}")

    def tcp_port(self) -> int | None:
        """Port number for a tcp:<port> transport, else None."""
        if not self.transport.startswith("tcp:"):
            return None
        try:
            port = int(self.transport[len("tcp:"):])
        except ValueError:
            return None
        return port if 0 <= port < 65536 else None


def serve(config: SidecarConfig) -> None:
    """Run the request loop for the configured transport (blocks)."""
    from .server import serve as _serve

    _serve(config)
