"""Minimal binary PPM (P6) reader.

Frames arrive as paths to P6 files: ASCII header (magic, width, height,
maxval, ``#`` comments allowed between tokens) followed by raw RGB
bytes. Only 8-bit images (maxval <= 255) are supported.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path


class FormatError(ValueError):
    """The file is not a P6 image this reader understands."""


@dataclass(frozen=True)
class Image:
    """Packed 8-bit RGB image: row-major, 3 bytes per pixel."""

    width: int
    height: int
    pixels: bytes

    def rgb(self, x: int, y: int) -> tuple[int, int, int]:
        i = (y * self.width + x) * 3
        return self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]


def _header_tokens(data: bytes, path: Path):
    """Yield (token, end_offset) for the four header fields, skipping
    whitespace and # comments."""
    pos = 0
    for _ in range(4):
        while pos < len(data):
            ch = data[pos:pos + 1]
            if ch.isspace():
                pos += 1
            elif ch == b"#":
                eol = data.find(b"\n", pos)
                if eol < 0:
                    raise FormatError(f"{path}: unterminated comment in header")
                pos = eol + 1
            else:
                break
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError(f"{path}: truncated header")
        yield data[start:pos], pos


def read_ppm(path: str | Path) -> Image:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise FormatError(f"{path}: cannot read image: {exc}") from None
    tokens = _header_tokens(data, path)
    magic, _ = next(tokens)
    if magic != b"P6":
        raise FormatError(f"{path}: not a binary PPM (magic {magic!r})")
    try:
        width, _ = next(tokens)
        height, _ = next(tokens)
        maxval, end = next(tokens)
        width, height, maxval = int(width), int(height), int(maxval)
    except (ValueError, StopIteration):
        raise FormatError(f"{path}: malformed header") from None
    if width <= 0 or height <= 0:
        raise FormatError(f"{path}: bad dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise FormatError(f"{path}: unsupported maxval {maxval}")
    body = data[end + 1:]  # exactly one whitespace byte after maxval
    expected = width * height * 3
    if len(body) < expected:
        raise FormatError(f"{path}: pixel data truncated ({len(body)} of {expected} bytes)")
    return Image(width, height, bytes(body[:expected]))
