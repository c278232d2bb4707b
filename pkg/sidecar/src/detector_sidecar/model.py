"""Detection models behind a tiny registry.

``load_model`` resolves a model identifier to an object with one
method::

    detect(image, rect=None) -> list[Detection]

where ``rect`` restricts analysis to a pixel window (x0, y0, x1, y1)
and returned coordinates are local to that window. The registry ships
one deterministic classical detector; heavier learned models can be
registered under new identifiers without touching the server loop.
"""

from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass

from .ppm import Image


@dataclass(frozen=True)
class Detection:
    x: int
    y: int
    w: int
    h: int
    score: float
    label: str


def _luma(r: int, g: int, b: int) -> float:
    return (299 * r + 587 * g + 114 * b) / 1000.0


class BlobModel:
    """Connected-component blob detector for flat-background footage.

    The dominant border color is taken as background; contiguous spans
    of pixels far from it become candidate objects. Blobs with strong
    internal two-tone contrast (checkered actors) are labeled "person",
    near-uniform blobs (occluders, props) are labeled "object". The
    score grows with how completely a blob fills its bounding box and
    is capped below 1.0. Everything is integer/deterministic: the same
    image yields byte-identical detections on every call.
    """

    TOLERANCE = 48        # manhattan RGB distance from background
    MIN_AREA = 24         # px; smaller components are specks
    TEXTURE_FLOOR = 8.0   # mean |luma - mean| separating person/object

    def detect(self, image: Image, rect: tuple[int, int, int, int] | None = None) -> list[Detection]:
        if rect is None:
            rect = (0, 0, image.width, image.height)
        x0, y0, x1, y1 = rect
        x0, y0 = max(0, x0), max(0, y0)
        x1, y1 = min(image.width, x1), min(image.height, y1)
        if x0 >= x1 or y0 >= y1:
            return []
        bg = _background_color(image)
        w, h = x1 - x0, y1 - y0
        mask = bytearray(w * h)
        px = image.pixels
        stride = image.width * 3
        for yy in range(h):
            row = (y0 + yy) * stride + x0 * 3
            for xx in range(w):
                i = row + xx * 3
                d = abs(px[i] - bg[0]) + abs(px[i + 1] - bg[1]) + abs(px[i + 2] - bg[2])
                if d > self.TOLERANCE:
                    mask[yy * w + xx] = 1
        detections = []
        for component in _components(mask, w, h):
            if len(component) < self.MIN_AREA:
                continue
            xs = [p % w for p in component]
            ys = [p // w for p in component]
            bx, by = min(xs), min(ys)
            bw, bh = max(xs) - bx + 1, max(ys) - by + 1
            lumas = [
                _luma(*image.rgb(x0 + p % w, y0 + p // w)) for p in component
            ]
            mean = math.fsum(lumas) / len(lumas)
            spread = math.fsum(abs(v - mean) for v in lumas) / len(lumas)
            label = "person" if spread > self.TEXTURE_FLOOR else "object"
            fill = len(component) / (bw * bh)
            score = round(min(0.95, 0.40 + 0.55 * fill), 4)
            detections.append(Detection(bx, by, bw, bh, score, label))
        detections.sort(key=lambda d: (-d.score, d.x, d.y))
        return detections


def _background_color(image: Image) -> tuple[int, int, int]:
    """Most common color on the image border ring."""
    counts: Counter = Counter()
    wth, hgt = image.width, image.height
    for x in range(wth):
        counts[image.rgb(x, 0)] += 1
        counts[image.rgb(x, hgt - 1)] += 1
    for y in range(1, hgt - 1):
        counts[image.rgb(0, y)] += 1
        counts[image.rgb(wth - 1, y)] += 1
    return counts.most_common(1)[0][0]


def _components(mask: bytearray, w: int, h: int):
    """Yield 4-connected components of set mask bits as flat-index lists."""
    seen = bytearray(len(mask))
    for start in range(len(mask)):
        if not mask[start] or seen[start]:
            continue
        seen[start] = 1
        queue = deque([start])
        component = []
        while queue:
            p = queue.popleft()
            component.append(p)
            x, y = p % w, p // w
            for q in (
                p - 1 if x > 0 else -1,
                p + 1 if x < w - 1 else -1,
                p - w if y > 0 else -1,
                p + w if y < h - 1 else -1,
            ):
                if q >= 0 and mask[q] and not seen[q]:
                    seen[q] = 1
                    queue.append(q)
        yield component


MODEL_IDS = ("blob-v1",)


def load_model(model_id: str):
    """Resolve a model identifier; unknown ids raise ValueError."""
    if model_id == "blob-v1":
        return BlobModel()
    raise ValueError(f"unknown model {model_id!r} (available: {', '.join(MODEL_IDS)})")
