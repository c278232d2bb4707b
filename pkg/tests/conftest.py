"""Shared helpers for the test suite."""

from __future__ import annotations

import numpy as np

from fusetrack import BBox, Detection, Frame, ScriptedDetector
from fusetrack.simulate import plan_frames, render_frame, scripted_records


def detections_from_records(records: dict[int, list[dict]]) -> dict[int, list[Detection]]:
    """Detection-object form of a scripted_records result."""
    return {
        frame: [Detection(BBox(d["x"], d["y"], d["w"], d["h"]), d["score"]) for d in dets]
        for frame, dets in records.items()
    }


def scripted_from_scenario(scenario, role, plans=None, latency_ms=0.0) -> ScriptedDetector:
    """In-memory scripted detector fed by a scenario's detection stream."""
    records = scripted_records(scenario, role, plans)
    return ScriptedDetector(detections_from_records(records), latency_ms=latency_ms)


def rendered_frames(scenario, plans=None) -> list[Frame]:
    plans = plans if plans is not None else plan_frames(scenario)
    return [render_frame(scenario, i, plans) for i in range(scenario.num_frames)]


def solid_frame(width: int, height: int, color=(58, 128, 62)) -> Frame:
    pixels = np.empty((height, width, 3), dtype=np.uint8)
    pixels[:] = color
    return Frame(pixels)


def checker_frame(width: int, height: int, box: BBox, cell: int = 8,
                  colors=((222, 44, 40), (246, 246, 246)),
                  background=(58, 128, 62)) -> Frame:
    """Uniform background with one checkerboard rectangle, drawn directly."""
    pixels = np.empty((height, width, 3), dtype=np.uint8)
    pixels[:] = background
    x0, y0 = int(box.x), int(box.y)
    for yy in range(max(y0, 0), min(y0 + int(box.h), height)):
        for xx in range(max(x0, 0), min(x0 + int(box.w), width)):
            parity = ((yy - y0) // cell + (xx - x0) // cell) % 2
            pixels[yy, xx] = colors[0] if parity == 0 else colors[1]
    return Frame(pixels)
