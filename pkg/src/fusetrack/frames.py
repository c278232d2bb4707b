"""Frame images, binary PPM (P6) files, and frame directories.

A frame bundle directory holds ``frames/frame_%06d.ppm`` plus a
``meta.json`` manifest with exactly ``{width, height, fps, count}``.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np


class Frame:
    """8-bit RGB image; ``pixels`` is a (height, width, 3) uint8 array.

    ``path`` records the backing file when the frame was loaded from
    disk, so detectors running out of process can be pointed at it.
    """

    __slots__ = ("pixels", "width", "height", "path")

    def __init__(self, pixels: np.ndarray, path: str | None = None):
        pixels = np.asarray(pixels)
        if pixels.dtype != np.uint8:
            raise ValueError(f"frame pixels must be uint8, got {pixels.dtype}")
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise ValueError(f"frame pixels must have shape (h, w, 3), got {pixels.shape}")
        if pixels.shape[0] < 1 or pixels.shape[1] < 1:
            raise ValueError("frame must be at least 1x1")
        self.pixels = pixels
        self.height = int(pixels.shape[0])
        self.width = int(pixels.shape[1])
        self.path = path


def write_ppm(frame: Frame | np.ndarray, path: str | Path) -> None:
    """Write a frame as a binary (P6, maxval 255) PPM file."""
    pixels = frame.pixels if isinstance(frame, Frame) else np.asarray(frame, dtype=np.uint8)
    h, w = pixels.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(pixels).tobytes())


def read_ppm(path: str | Path) -> Frame:
    """Read a binary (P6) PPM file; supports '#' comments in the header."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P6"):
        raise ValueError(f"{path}: not a binary PPM (P6) file")
    pos = 2
    fields = []
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        token = data[start:pos]
        if not re.fullmatch(rb"\d+", token):
            raise ValueError(f"{path}: malformed PPM header token {token!r}")
        fields.append(int(token))
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 is supported, got {maxval}")
    expected = width * height * 3
    raster = data[pos : pos + expected]
    if len(raster) != expected:
        raise ValueError(f"{path}: raster has {len(raster)} bytes, expected {expected}")
    pixels = np.frombuffer(raster, dtype=np.uint8).reshape(height, width, 3)
    return Frame(pixels.copy(), path=str(path))


def frame_filename(index: int) -> str:
    return f"frame_{index:06d}.ppm"


class FrameDir:
    """A generated bundle's frame sequence, described by its manifest."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        meta_path = self.root / "meta.json"
        if not meta_path.is_file():
            raise ValueError(f"{self.root}: missing meta.json manifest")
        meta = json.loads(meta_path.read_text())
        for key in ("width", "height", "fps", "count"):
            if key not in meta:
                raise ValueError(f"{meta_path}: manifest missing {key!r}")
        self.width = int(meta["width"])
        self.height = int(meta["height"])
        self.fps = float(meta["fps"])
        self.count = int(meta["count"])
        if self.count < 1:
            raise ValueError(f"{meta_path}: count must be >= 1")
        self.frames_dir = self.root / "frames"

    def frame_path(self, index: int) -> Path:
        return self.frames_dir / frame_filename(index)

    def load(self, index: int) -> Frame:
        if not 0 <= index < self.count:
            raise IndexError(f"frame index {index} outside 0..{self.count - 1}")
        frame = read_ppm(self.frame_path(index))
        if (frame.width, frame.height) != (self.width, self.height):
            raise ValueError(
                f"{self.frame_path(index)}: size {frame.width}x{frame.height} "
                f"does not match manifest {self.width}x{self.height}"
            )
        return frame

    def __len__(self) -> int:
        return self.count

    def __iter__(self):
        for i in range(self.count):
            yield self.load(i)


def write_manifest(root: str | Path, width: int, height: int, fps: float, count: int) -> Path:
    path = Path(root) / "meta.json"
    meta = {"width": width, "height": height, "fps": fps, "count": count}
    path.write_text(json.dumps(meta) + "\n")
    return path
