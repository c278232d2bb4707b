"""Synthetic single-target scenarios: rendering, ground truth, and
scripted detection streams.

A scenario moves a checkerboard-textured target (and optional
distractor rectangles) over a uniform background along piecewise-linear
waypoint paths, with timed events: camera switches (everything
displaced), partial/total occlusion (an occluder painted over the
target), out-of-frame intervals (target not rendered), and box blur.
Ground truth marks frames invisible during total occlusion and
out-of-frame intervals.

Detections for the two detector roles ("global", "roi") are sampled
from the ground truth through a noise model: center jitter, size noise,
misses (forced during total occlusion), clamped-normal scores, and
false positives placed preferentially near distractors (80%) or
uniformly (20%). Randomness comes from one named substream per noise
channel derived from the scenario seed, so adding a channel never
perturbs the others and identical seeds reproduce bundles byte for
byte.

Scenario files are JSON documents; see docs/scenario_schema.md.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .frames import Frame, frame_filename, write_manifest, write_ppm
from .geometry import BBox
from .metrics import GroundTruthTrack, GtEntry, write_ground_truth

BACKGROUND = (58, 128, 62)
TARGET_COLORS = ((222, 44, 40), (246, 246, 246))
SIMILAR_COLORS = ((204, 52, 48), (232, 232, 232))
DISSIMILAR_COLORS = ((44, 64, 200), (240, 232, 96))
OCCLUDER = (24, 24, 28)
CHECKER_CELL = 8

EVENT_KINDS = ("camera_switch", "occlusion_partial", "occlusion_total", "out_of_frame", "blur")
ROLES = ("global", "roi")


@dataclass(frozen=True)
class TrajectorySpec:
    """Piecewise-linear path through waypoints at per-segment speeds.

    waypoints are (x, y) box centers; speeds are px/frame, one per
    segment (a single value broadcasts). After the last waypoint the
    position holds. size is the box (w, h) in px.
    """

    waypoints: tuple[tuple[float, float], ...]
    size: tuple[int, int]
    speeds: tuple[float, ...]
    similar: bool = True

    def __post_init__(self):
        if not self.waypoints:
            raise ValueError("trajectory needs at least one waypoint")
        if self.size[0] < CHECKER_CELL or self.size[1] < CHECKER_CELL:
            raise ValueError(f"trajectory size must be at least {CHECKER_CELL} px per side")
        segments = max(1, len(self.waypoints) - 1)
        if len(self.speeds) != segments:
            raise ValueError(f"need {segments} segment speeds, got {len(self.speeds)}")
        if any(s <= 0 for s in self.speeds) and len(self.waypoints) > 1:
            raise ValueError("segment speeds must be positive")

    def centers(self, num_frames: int) -> np.ndarray:
        """(num_frames, 2) array of per-frame center positions."""
        out = np.empty((num_frames, 2), dtype=np.float64)
        pos = np.array(self.waypoints[0], dtype=np.float64)
        segment = 0
        for t in range(num_frames):
            out[t] = pos
            if segment >= len(self.waypoints) - 1:
                continue
            advance = self.speeds[segment]
            while advance > 0 and segment < len(self.waypoints) - 1:
                goal = np.array(self.waypoints[segment + 1], dtype=np.float64)
                gap = float(np.linalg.norm(goal - pos))
                if advance < gap:
                    pos = pos + (goal - pos) * (advance / gap)
                    advance = 0.0
                else:
                    pos = goal
                    advance -= gap
                    segment += 1
        return out


@dataclass(frozen=True)
class Event:
    """Timed scenario event over frames start..end inclusive."""

    kind: str
    start: int
    end: int
    dx: float = 0.0          # camera_switch
    dy: float = 0.0          # camera_switch
    coverage: float = 0.5    # occlusion_partial
    radius: int = 3          # blur

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.start < 0 or self.end < self.start:
            raise ValueError(f"bad event interval [{self.start}, {self.end}]")
        if self.kind == "occlusion_partial" and not 0.0 < self.coverage < 1.0:
            raise ValueError(f"partial occlusion coverage must lie in (0, 1), got {self.coverage}")
        if self.kind == "blur" and self.radius < 1:
            raise ValueError(f"blur radius must be >= 1, got {self.radius}")

    def active(self, frame: int) -> bool:
        return self.start <= frame <= self.end


@dataclass(frozen=True)
class NoiseModel:
    """Detection noise; all channels default to off (scores 0.9)."""

    jitter_sigma: float = 0.0
    size_sigma: float = 0.0
    miss_prob: float = 0.0
    false_positive_rate: float = 0.0
    score_mean: float = 0.9
    score_sigma: float = 0.0
    latency_ms: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.jitter_sigma < 0 or self.size_sigma < 0:
            raise ValueError("noise sigmas must be >= 0")
        if not 0.0 <= self.miss_prob <= 1.0:
            raise ValueError(f"miss_prob must lie in [0, 1], got {self.miss_prob}")
        if self.false_positive_rate < 0:
            raise ValueError("false_positive_rate must be >= 0")
        if not 0.0 <= self.score_mean <= 1.0:
            raise ValueError(f"score_mean must lie in [0, 1], got {self.score_mean}")
        if self.score_sigma < 0:
            raise ValueError("score_sigma must be >= 0")
        for role, value in self.latency_ms.items():
            if role not in ROLES:
                raise ValueError(f"latency_ms role must be one of {ROLES}, got {role!r}")
            if value < 0:
                raise ValueError("latency_ms values must be >= 0")


@dataclass(frozen=True)
class Scenario:
    width: int
    height: int
    fps: float
    num_frames: int
    seed: int
    target: TrajectorySpec
    distractors: tuple[TrajectorySpec, ...] = ()
    events: tuple[Event, ...] = ()
    noise: NoiseModel = field(default_factory=NoiseModel)

    def __post_init__(self):
        if self.width < 32 or self.height < 32:
            raise ValueError("frame must be at least 32x32")
        if self.fps <= 0:
            raise ValueError(f"fps must be positive, got {self.fps}")
        if self.num_frames < 1:
            raise ValueError(f"num_frames must be >= 1, got {self.num_frames}")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        for spec in (self.target, *self.distractors):
            for x, y in spec.waypoints:
                if not (0 <= x < self.width and 0 <= y < self.height):
                    raise ValueError(f"waypoint ({x}, {y}) outside the {self.width}x{self.height} frame")
            if spec.size[0] > self.width or spec.size[1] > self.height:
                raise ValueError("trajectory box does not fit in the frame")
        for event in self.events:
            if event.end >= self.num_frames:
                raise ValueError(f"event [{event.start}, {event.end}] exceeds num_frames={self.num_frames}")


@dataclass(frozen=True)
class FramePlan:
    """Resolved per-frame scene state (internal to the simulator but
    exposed for tests and in-memory pipelines)."""

    frame: int
    box: BBox                    # integer-valued, inside the frame
    visible: bool
    occlusion_total: bool
    occlusion_coverage: float | None
    out_of_frame: bool
    blur_radius: int | None
    camera_offset: tuple[float, float]


@dataclass(frozen=True)
class GeneratedBundle:
    root: Path
    frames_dir: Path
    ground_truth_path: Path
    global_detections_path: Path
    roi_detections_path: Path
    manifest_path: Path


# -- scenario files ----------------------------------------------------

def _require_keys(obj: dict, allowed: set[str], where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ValueError(f"{where}: unknown keys {sorted(unknown)}")


def _trajectory_from_dict(obj: dict, where: str) -> TrajectorySpec:
    _require_keys(obj, {"waypoints", "size", "speed", "speeds", "similar"}, where)
    try:
        waypoints = tuple((float(x), float(y)) for x, y in obj["waypoints"])
        size = (int(obj["size"][0]), int(obj["size"][1]))
    except (KeyError, TypeError, ValueError):
        raise ValueError(f"{where}: needs 'waypoints' [[x,y],...] and 'size' [w,h]") from None
    segments = max(1, len(waypoints) - 1)
    if "speeds" in obj:
        speeds = tuple(float(s) for s in obj["speeds"])
    else:
        speeds = (float(obj.get("speed", 1.0)),) * segments
    return TrajectorySpec(waypoints, size, speeds, similar=bool(obj.get("similar", True)))


def _event_from_dict(obj: dict, where: str) -> Event:
    _require_keys(obj, {"kind", "start", "end", "dx", "dy", "coverage", "radius"}, where)
    try:
        kind = obj["kind"]
        start = int(obj["start"])
        end = int(obj["end"])
    except (KeyError, TypeError, ValueError):
        raise ValueError(f"{where}: needs 'kind', 'start' and 'end'") from None
    return Event(
        kind=kind,
        start=start,
        end=end,
        dx=float(obj.get("dx", 0.0)),
        dy=float(obj.get("dy", 0.0)),
        coverage=float(obj.get("coverage", 0.5)),
        radius=int(obj.get("radius", 3)),
    )


def _noise_from_dict(obj: dict, where: str) -> NoiseModel:
    allowed = {
        "jitter_sigma", "size_sigma", "miss_prob", "false_positive_rate",
        "score_mean", "score_sigma", "latency_ms",
    }
    _require_keys(obj, allowed, where)
    latency = obj.get("latency_ms", {})
    if not isinstance(latency, dict):
        raise ValueError(f"{where}: latency_ms must map roles to milliseconds")
    return NoiseModel(
        jitter_sigma=float(obj.get("jitter_sigma", 0.0)),
        size_sigma=float(obj.get("size_sigma", 0.0)),
        miss_prob=float(obj.get("miss_prob", 0.0)),
        false_positive_rate=float(obj.get("false_positive_rate", 0.0)),
        score_mean=float(obj.get("score_mean", 0.9)),
        score_sigma=float(obj.get("score_sigma", 0.0)),
        latency_ms={k: float(v) for k, v in latency.items()},
    )


def scenario_from_dict(obj: dict) -> Scenario:
    allowed = {"width", "height", "fps", "num_frames", "seed", "target", "distractors", "events", "noise"}
    _require_keys(obj, allowed, "scenario")
    try:
        width = int(obj["width"])
        height = int(obj["height"])
        num_frames = int(obj["num_frames"])
        target = obj["target"]
    except (KeyError, TypeError, ValueError):
        raise ValueError("scenario needs integer 'width', 'height', 'num_frames' and a 'target'") from None
    return Scenario(
        width=width,
        height=height,
        fps=float(obj.get("fps", 30.0)),
        num_frames=num_frames,
        seed=int(obj.get("seed", 0)),
        target=_trajectory_from_dict(target, "target"),
        distractors=tuple(
            _trajectory_from_dict(d, f"distractors[{i}]") for i, d in enumerate(obj.get("distractors", []))
        ),
        events=tuple(_event_from_dict(e, f"events[{i}]") for i, e in enumerate(obj.get("events", []))),
        noise=_noise_from_dict(obj.get("noise", {}), "noise"),
    )


def scenario_from_file(path: str | Path) -> Scenario:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: bad JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise ValueError(f"{path}: scenario document must be a JSON object")
    return scenario_from_dict(obj)


# -- frame planning ----------------------------------------------------

def camera_offset(scenario: Scenario, frame: int) -> tuple[float, float]:
    dx = dy = 0.0
    for event in scenario.events:
        if event.kind == "camera_switch" and event.active(frame):
            dx += event.dx
            dy += event.dy
    return dx, dy


def plan_frames(scenario: Scenario) -> list[FramePlan]:
    """Resolve trajectories and events into one plan per frame."""
    centers = scenario.target.centers(scenario.num_frames)
    w, h = scenario.target.size
    plans = []
    for t in range(scenario.num_frames):
        off = camera_offset(scenario, t)
        occl_total = any(e.kind == "occlusion_total" and e.active(t) for e in scenario.events)
        out = any(e.kind == "out_of_frame" and e.active(t) for e in scenario.events)
        coverage = next(
            (e.coverage for e in scenario.events if e.kind == "occlusion_partial" and e.active(t)), None
        )
        blur = next((e.radius for e in scenario.events if e.kind == "blur" and e.active(t)), None)
        cx, cy = centers[t, 0] + off[0], centers[t, 1] + off[1]
        box = BBox(round(cx - w / 2), round(cy - h / 2), w, h).shift_into(scenario.width, scenario.height)
        plans.append(
            FramePlan(
                frame=t,
                box=box,
                visible=not (occl_total or out),
                occlusion_total=occl_total,
                occlusion_coverage=coverage,
                out_of_frame=out,
                blur_radius=blur,
                camera_offset=off,
            )
        )
    return plans


def ground_truth(scenario: Scenario) -> GroundTruthTrack:
    entries = tuple(
        GtEntry(p.frame, p.box if p.visible else None, p.visible) for p in plan_frames(scenario)
    )
    return GroundTruthTrack(entries)


# -- rendering ---------------------------------------------------------

def _draw_checker(pixels: np.ndarray, box: BBox, colors: tuple) -> None:
    """Checkerboard anchored at the box corner so the texture translates
    rigidly with the box; the box may extend past the frame."""
    height, width = pixels.shape[:2]
    x0, y0 = int(box.x), int(box.y)
    x1, y1 = x0 + int(box.w), y0 + int(box.h)
    cx0, cy0 = max(x0, 0), max(y0, 0)
    cx1, cy1 = min(x1, width), min(y1, height)
    if cx0 >= cx1 or cy0 >= cy1:
        return
    yy, xx = np.meshgrid(np.arange(cy0, cy1), np.arange(cx0, cx1), indexing="ij")
    parity = ((yy - y0) // CHECKER_CELL + (xx - x0) // CHECKER_CELL) % 2
    tile = np.where(parity[..., None] == 0, np.array(colors[0], dtype=np.uint8), np.array(colors[1], dtype=np.uint8))
    pixels[cy0:cy1, cx0:cx1] = tile


def _fill(pixels: np.ndarray, box: BBox, color: tuple) -> None:
    height, width = pixels.shape[:2]
    x0, y0 = max(int(box.x), 0), max(int(box.y), 0)
    x1, y1 = min(int(box.x + box.w), width), min(int(box.y + box.h), height)
    if x0 < x1 and y0 < y1:
        pixels[y0:y1, x0:x1] = color


def box_blur(pixels: np.ndarray, radius: int) -> np.ndarray:
    """Integer box blur: each output pixel is the integer-division mean
    of the (2*radius+1)^2 window around it, borders edge-replicated."""
    if radius < 1:
        raise ValueError(f"radius must be >= 1, got {radius}")
    k = 2 * radius + 1
    padded = np.pad(pixels, ((radius, radius), (radius, radius), (0, 0)), mode="edge").astype(np.int64)
    summed = np.zeros((padded.shape[0] + 1, padded.shape[1] + 1, 3), dtype=np.int64)
    summed[1:, 1:] = padded.cumsum(axis=0).cumsum(axis=1)
    h, w = pixels.shape[:2]
    window = (
        summed[k : k + h, k : k + w]
        - summed[0:h, k : k + w]
        - summed[k : k + h, 0:w]
        + summed[0:h, 0:w]
    )
    return (window // (k * k)).astype(np.uint8)


def render_frame(scenario: Scenario, frame_index: int, plans: list[FramePlan] | None = None) -> Frame:
    """Render one frame. Passing precomputed plans (from plan_frames)
    avoids re-walking the trajectories on every call."""
    if not 0 <= frame_index < scenario.num_frames:
        raise ValueError(f"frame index {frame_index} outside 0..{scenario.num_frames - 1}")
    plan = (plans or plan_frames(scenario))[frame_index]
    pixels = np.empty((scenario.height, scenario.width, 3), dtype=np.uint8)
    pixels[:] = BACKGROUND
    off = plan.camera_offset
    for spec in scenario.distractors:
        center = spec.centers(scenario.num_frames)[frame_index]
        dw, dh = spec.size
        box = BBox(round(center[0] + off[0] - dw / 2), round(center[1] + off[1] - dh / 2), dw, dh)
        _draw_checker(pixels, box, SIMILAR_COLORS if spec.similar else DISSIMILAR_COLORS)
    if not plan.out_of_frame:
        _draw_checker(pixels, plan.box, TARGET_COLORS)
        if plan.occlusion_total:
            _fill(pixels, plan.box, OCCLUDER)
        elif plan.occlusion_coverage is not None:
            covered = BBox(plan.box.x, plan.box.y, plan.box.w, max(1, round(plan.box.h * plan.occlusion_coverage)))
            _fill(pixels, covered, OCCLUDER)
    if plan.blur_radius is not None:
        pixels = box_blur(pixels, plan.blur_radius)
    return Frame(pixels)


def render_all(scenario: Scenario) -> list[Frame]:
    plans = plan_frames(scenario)
    return [render_frame(scenario, i, plans) for i in range(scenario.num_frames)]


# -- detection sampling ------------------------------------------------

def _stream(seed: int, name: str) -> np.random.Generator:
    """Named substream: stable across runs and independent per channel."""
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return np.random.default_rng(np.random.SeedSequence([seed, int.from_bytes(digest[:8], "big")]))


def scripted_records(scenario: Scenario, role: str, plans: list[FramePlan] | None = None) -> dict[int, list[dict]]:
    """Per-frame detection objects for one detector role.

    Misses are forced during frames where the target is invisible
    (total occlusion, out of frame); false positives appear regardless.
    Every noise channel draws a fixed amount per frame from its own
    substream, so channels never disturb each other.
    """
    if role not in ROLES:
        raise ValueError(f"role must be one of {ROLES}, got {role!r}")
    plans = plans or plan_frames(scenario)
    noise = scenario.noise
    miss_rng = _stream(scenario.seed, f"{role}.miss")
    jitter_rng = _stream(scenario.seed, f"{role}.jitter")
    size_rng = _stream(scenario.seed, f"{role}.size")
    score_rng = _stream(scenario.seed, f"{role}.score")
    fp_count_rng = _stream(scenario.seed, f"{role}.fp_count")
    fp_place_rng = _stream(scenario.seed, f"{role}.fp_place")
    fp_size_rng = _stream(scenario.seed, f"{role}.fp_size")
    fp_score_rng = _stream(scenario.seed, f"{role}.fp_score")

    distractor_centers = [spec.centers(scenario.num_frames) for spec in scenario.distractors]
    tw, th = scenario.target.size
    records: dict[int, list[dict]] = {}
    for plan in plans:
        t = plan.frame
        missed = miss_rng.random() < noise.miss_prob
        jitter = jitter_rng.normal(0.0, 1.0, 2) * noise.jitter_sigma
        size_noise = size_rng.normal(0.0, 1.0, 2) * noise.size_sigma
        score = float(np.clip(noise.score_mean + noise.score_sigma * score_rng.normal(), 0.0, 1.0))
        detections = []
        if plan.visible and not missed:
            w = max(4.0, plan.box.w + size_noise[0])
            h = max(4.0, plan.box.h + size_noise[1])
            box = BBox.from_center(plan.box.cx + jitter[0], plan.box.cy + jitter[1], w, h)
            box = box.shift_into(scenario.width, scenario.height)
            detections.append(_det_obj(box, score))
        for _ in range(int(fp_count_rng.poisson(noise.false_positive_rate))):
            near = fp_place_rng.random() < 0.8
            if near and distractor_centers:
                which = int(fp_place_rng.integers(len(distractor_centers)))
                center = distractor_centers[which][t] + np.array(plan.camera_offset)
                center = center + fp_place_rng.normal(0.0, 1.0, 2) * (0.25 * max(tw, th))
            else:
                center = np.array(
                    [fp_place_rng.uniform(0, scenario.width), fp_place_rng.uniform(0, scenario.height)]
                )
            fw = float(np.clip(tw * (1.0 + 0.2 * fp_size_rng.normal()), 4.0, scenario.width))
            fh = float(np.clip(th * (1.0 + 0.2 * fp_size_rng.normal()), 4.0, scenario.height))
            fp_score = float(np.clip(noise.score_mean + noise.score_sigma * fp_score_rng.normal(), 0.0, 1.0))
            box = BBox.from_center(float(center[0]), float(center[1]), fw, fh).shift_into(
                scenario.width, scenario.height
            )
            detections.append(_det_obj(box, fp_score))
        records[t] = detections
    return records


def _det_obj(box: BBox, score: float) -> dict:
    return {
        "x": round(box.x, 2),
        "y": round(box.y, 2),
        "w": round(box.w, 2),
        "h": round(box.h, 2),
        "score": round(score, 4),
    }


def write_detections(records: dict[int, list[dict]], path: str | Path) -> None:
    lines = [json.dumps({"frame": t, "detections": records[t]}) for t in sorted(records)]
    Path(path).write_text("\n".join(lines) + "\n")


# -- bundle generation -------------------------------------------------

def generate(scenario: Scenario, out_dir: str | Path) -> GeneratedBundle:
    """Render the scenario to a bundle directory: frames/ (binary PPM),
    gt.csv, det_global.jsonl, det_roi.jsonl, meta.json."""
    root = Path(out_dir)
    frames_dir = root / "frames"
    frames_dir.mkdir(parents=True, exist_ok=True)
    plans = plan_frames(scenario)
    for i in range(scenario.num_frames):
        write_ppm(render_frame(scenario, i, plans), frames_dir / frame_filename(i))
    gt_path = root / "gt.csv"
    write_ground_truth(ground_truth(scenario), gt_path)
    global_path = root / "det_global.jsonl"
    write_detections(scripted_records(scenario, "global", plans), global_path)
    roi_path = root / "det_roi.jsonl"
    write_detections(scripted_records(scenario, "roi", plans), roi_path)
    manifest = write_manifest(root, scenario.width, scenario.height, scenario.fps, scenario.num_frames)
    return GeneratedBundle(
        root=root,
        frames_dir=frames_dir,
        ground_truth_path=gt_path,
        global_detections_path=global_path,
        roi_detections_path=roi_path,
        manifest_path=manifest,
    )
