"""Scenario simulator: planning, rendering, noise model, and bundles."""

import json

import numpy as np
import pytest

from fusetrack.geometry import BBox
from fusetrack.simulate import (
    BACKGROUND,
    CHECKER_CELL,
    OCCLUDER,
    TARGET_COLORS,
    Event,
    NoiseModel,
    Scenario,
    TrajectorySpec,
    box_blur,
    generate,
    ground_truth,
    plan_frames,
    render_frame,
    scenario_from_dict,
    scenario_from_file,
    scripted_records,
)


def static_scenario(num_frames=10, seed=0, events=(), noise=None, size=(16, 32),
                    center=(60.0, 48.0), width=160, height=120, distractors=()):
    return Scenario(
        width=width, height=height, fps=30.0, num_frames=num_frames, seed=seed,
        target=TrajectorySpec(waypoints=(center,), size=size, speeds=(1.0,)),
        distractors=distractors,
        events=tuple(events),
        noise=noise if noise is not None else NoiseModel(),
    )


class TestTrajectory:
    def test_single_waypoint_holds(self):
        spec = TrajectorySpec(waypoints=((40.0, 30.0),), size=(8, 8), speeds=(1.0,))
        centers = spec.centers(4)
        assert np.array_equal(centers, np.full((4, 2), (40.0, 30.0)))

    def test_constant_speed_along_segment(self):
        spec = TrajectorySpec(waypoints=((10.0, 20.0), (20.0, 20.0)), size=(8, 8), speeds=(2.0,))
        centers = spec.centers(8)
        expected = [(10, 20), (12, 20), (14, 20), (16, 20), (18, 20), (20, 20), (20, 20), (20, 20)]
        assert np.allclose(centers, expected)

    def test_multi_segment_with_per_segment_speeds(self):
        spec = TrajectorySpec(
            waypoints=((10.0, 10.0), (14.0, 10.0), (14.0, 16.0)), size=(8, 8), speeds=(2.0, 3.0)
        )
        centers = spec.centers(6)
        expected = [(10, 10), (12, 10), (14, 10), (14, 13), (14, 16), (14, 16)]
        assert np.allclose(centers, expected)

    def test_validation(self):
        with pytest.raises(ValueError):
            TrajectorySpec(waypoints=(), size=(8, 8), speeds=())
        with pytest.raises(ValueError):
            TrajectorySpec(waypoints=((0.0, 0.0),), size=(4, 8), speeds=(1.0,))  # below cell size
        with pytest.raises(ValueError):
            TrajectorySpec(waypoints=((0.0, 0.0), (5.0, 0.0)), size=(8, 8), speeds=(1.0, 1.0))
        with pytest.raises(ValueError):
            TrajectorySpec(waypoints=((0.0, 0.0), (5.0, 0.0)), size=(8, 8), speeds=(0.0,))


class TestEventAndNoiseValidation:
    def test_event_kinds(self):
        with pytest.raises(ValueError):
            Event(kind="earthquake", start=0, end=1)
        with pytest.raises(ValueError):
            Event(kind="blur", start=5, end=3)
        with pytest.raises(ValueError):
            Event(kind="blur", start=0, end=1, radius=0)
        with pytest.raises(ValueError):
            Event(kind="occlusion_partial", start=0, end=1, coverage=1.0)

    def test_event_active_interval_inclusive(self):
        event = Event(kind="blur", start=2, end=4)
        assert [event.active(f) for f in range(6)] == [False, False, True, True, True, False]

    def test_noise_validation(self):
        with pytest.raises(ValueError):
            NoiseModel(miss_prob=1.5)
        with pytest.raises(ValueError):
            NoiseModel(jitter_sigma=-1)
        with pytest.raises(ValueError):
            NoiseModel(latency_ms={"other": 5.0})
        with pytest.raises(ValueError):
            NoiseModel(latency_ms={"global": -1.0})

    def test_scenario_validation(self):
        with pytest.raises(ValueError):
            static_scenario(width=16)  # frame too small
        with pytest.raises(ValueError):
            static_scenario(center=(500.0, 48.0))  # waypoint outside
        with pytest.raises(ValueError):
            static_scenario(num_frames=5, events=[Event(kind="blur", start=0, end=5)])


class TestPlanning:
    def test_boxes_are_integer_valued_and_inside(self):
        scenario = Scenario(
            width=100, height=80, fps=30.0, num_frames=40, seed=0,
            target=TrajectorySpec(waypoints=((10.0, 10.0), (90.0, 70.0)), size=(12, 16), speeds=(3.0,)),
            events=(Event(kind="camera_switch", start=10, end=20, dx=50.0, dy=40.0),),
        )
        for plan in plan_frames(scenario):
            box = plan.box
            assert box.x == int(box.x) and box.y == int(box.y)
            assert box.x >= 0 and box.y >= 0
            assert box.x + box.w <= 100 and box.y + box.h <= 80

    def test_camera_switch_displaces_the_box(self):
        scenario = static_scenario(
            num_frames=12, center=(60.0, 48.0), size=(16, 16),
            events=[Event(kind="camera_switch", start=5, end=8, dx=20.0, dy=10.0)],
        )
        plans = plan_frames(scenario)
        base = plans[0].box
        for plan in plans:
            if 5 <= plan.frame <= 8:
                assert plan.box == base.shifted(20, 10)
                assert plan.camera_offset == (20.0, 10.0)
            else:
                assert plan.box == base
                assert plan.camera_offset == (0.0, 0.0)

    def test_visibility_flags(self):
        scenario = static_scenario(
            num_frames=12,
            events=[
                Event(kind="occlusion_total", start=2, end=3),
                Event(kind="out_of_frame", start=7, end=8),
            ],
        )
        visible = [p.visible for p in plan_frames(scenario)]
        assert visible == [True, True, False, False, True, True, True, False, False, True, True, True]

    def test_ground_truth_matches_plans(self):
        scenario = static_scenario(num_frames=6, events=[Event(kind="occlusion_total", start=2, end=2)])
        plans = plan_frames(scenario)
        track = ground_truth(scenario)
        for plan, entry in zip(plans, track.entries):
            assert entry.frame == plan.frame
            assert entry.visible == plan.visible
            assert entry.box == (plan.box if plan.visible else None)


class TestRendering:
    def test_target_is_a_corner_anchored_checkerboard(self):
        scenario = static_scenario(num_frames=1)
        plan = plan_frames(scenario)[0]
        frame = render_frame(scenario, 0)
        box = plan.box
        x0, y0 = int(box.x), int(box.y)
        for yy in range(y0, y0 + int(box.h)):
            for xx in range(x0, x0 + int(box.w)):
                parity = ((yy - y0) // CHECKER_CELL + (xx - x0) // CHECKER_CELL) % 2
                expected = TARGET_COLORS[0] if parity == 0 else TARGET_COLORS[1]
                assert tuple(frame.pixels[yy, xx]) == expected

    def test_background_fills_everything_else(self):
        scenario = static_scenario(num_frames=1)
        plan = plan_frames(scenario)[0]
        frame = render_frame(scenario, 0)
        mask = np.ones((scenario.height, scenario.width), dtype=bool)
        b = plan.box
        mask[int(b.y):int(b.y2), int(b.x):int(b.x2)] = False
        assert np.all(frame.pixels[mask] == BACKGROUND)

    def test_target_pixel_centroid_sits_at_the_box_center(self):
        scenario = static_scenario(num_frames=1, size=(16, 32))
        plan = plan_frames(scenario)[0]
        frame = render_frame(scenario, 0)
        colors = frame.pixels.reshape(-1, 3)
        is_target = np.zeros(len(colors), dtype=bool)
        for color in TARGET_COLORS:
            is_target |= np.all(colors == color, axis=1)
        ys, xs = np.divmod(np.flatnonzero(is_target), scenario.width)
        # Array index j covers the pixel [j, j+1), so a solid box's index
        # centroid sits half a pixel left/up of its geometric center.
        assert xs.mean() == pytest.approx(plan.box.cx - 0.5)
        assert ys.mean() == pytest.approx(plan.box.cy - 0.5)

    def test_out_of_frame_removes_the_target(self):
        scenario = static_scenario(num_frames=3, events=[Event(kind="out_of_frame", start=1, end=1)])
        frame = render_frame(scenario, 1)
        colors = frame.pixels.reshape(-1, 3)
        for color in TARGET_COLORS:
            assert not np.any(np.all(colors == color, axis=1))

    def test_total_occlusion_paints_the_occluder_over_the_box(self):
        scenario = static_scenario(num_frames=2, events=[Event(kind="occlusion_total", start=1, end=1)])
        plan = plan_frames(scenario)[1]
        frame = render_frame(scenario, 1)
        b = plan.box
        region = frame.pixels[int(b.y):int(b.y2), int(b.x):int(b.x2)]
        assert np.all(region == OCCLUDER)

    def test_partial_occlusion_covers_the_top_fraction(self):
        scenario = static_scenario(
            num_frames=2, size=(16, 32),
            events=[Event(kind="occlusion_partial", start=1, end=1, coverage=0.5)],
        )
        plan = plan_frames(scenario)[1]
        assert plan.visible  # partially occluded frames stay visible
        frame = render_frame(scenario, 1)
        b = plan.box
        covered_h = round(b.h * 0.5)
        top = frame.pixels[int(b.y):int(b.y) + covered_h, int(b.x):int(b.x2)]
        below = frame.pixels[int(b.y) + covered_h:int(b.y2), int(b.x):int(b.x2)]
        assert np.all(top == OCCLUDER)
        assert not np.any(np.all(below == OCCLUDER, axis=-1))

    def test_blur_event_equals_blurring_the_clean_render(self):
        clean = static_scenario(num_frames=3)
        blurred = static_scenario(num_frames=3, events=[Event(kind="blur", start=1, end=2, radius=2)])
        assert np.array_equal(render_frame(blurred, 0).pixels, render_frame(clean, 0).pixels)
        for i in (1, 2):
            expected = box_blur(render_frame(clean, i).pixels, 2)
            assert np.array_equal(render_frame(blurred, i).pixels, expected)

    def test_render_frame_index_range(self):
        scenario = static_scenario(num_frames=3)
        with pytest.raises(ValueError):
            render_frame(scenario, 3)
        with pytest.raises(ValueError):
            render_frame(scenario, -1)


class TestBoxBlur:
    def blur_oracle(self, pixels, radius):
        h, w, _ = pixels.shape
        k = 2 * radius + 1
        out = np.zeros_like(pixels)
        for y in range(h):
            for x in range(w):
                for c in range(3):
                    total = 0
                    for dy in range(-radius, radius + 1):
                        for dx in range(-radius, radius + 1):
                            yy = min(max(y + dy, 0), h - 1)
                            xx = min(max(x + dx, 0), w - 1)
                            total += int(pixels[yy, xx, c])
                    out[y, x, c] = total // (k * k)
        return out

    @pytest.mark.parametrize("radius", [1, 2, 3])
    def test_matches_nested_loop_oracle_exactly(self, radius):
        rng = np.random.default_rng(radius)
        pixels = rng.integers(0, 256, size=(12, 10, 3), dtype=np.uint8)
        assert np.array_equal(box_blur(pixels, radius), self.blur_oracle(pixels, radius))

    def test_constant_image_unchanged(self):
        pixels = np.full((8, 8, 3), 77, dtype=np.uint8)
        assert np.array_equal(box_blur(pixels, 2), pixels)

    def test_rejects_small_radius(self):
        with pytest.raises(ValueError):
            box_blur(np.zeros((4, 4, 3), dtype=np.uint8), 0)


class TestScriptedRecords:
    def test_noiseless_records_match_ground_truth(self):
        scenario = static_scenario(num_frames=5)
        plans = plan_frames(scenario)
        records = scripted_records(scenario, "global", plans)
        assert sorted(records) == list(range(5))
        for plan in plans:
            (det,) = records[plan.frame]
            assert (det["x"], det["y"], det["w"], det["h"]) == (plan.box.x, plan.box.y, plan.box.w, plan.box.h)
            assert det["score"] == 0.9

    def test_invisible_frames_have_no_real_detection(self):
        scenario = static_scenario(num_frames=6, events=[Event(kind="occlusion_total", start=2, end=4)])
        records = scripted_records(scenario, "roi")
        for frame in range(6):
            assert (records[frame] == []) == (2 <= frame <= 4)

    def test_miss_prob_one_empties_every_frame(self):
        scenario = static_scenario(num_frames=20, noise=NoiseModel(miss_prob=1.0))
        records = scripted_records(scenario, "global")
        assert all(records[f] == [] for f in range(20))

    def test_miss_fraction_near_probability(self):
        scenario = static_scenario(num_frames=400, seed=11, noise=NoiseModel(miss_prob=0.3))
        records = scripted_records(scenario, "global")
        missed = sum(1 for f in range(400) if records[f] == [])
        fraction = missed / 400
        band = 3 * (0.3 * 0.7 / 400) ** 0.5
        assert abs(fraction - 0.3) <= band

    def test_false_positive_rate_and_bounds(self):
        scenario = static_scenario(num_frames=300, seed=3, noise=NoiseModel(false_positive_rate=1.5))
        records = scripted_records(scenario, "global")
        total = sum(len(records[f]) for f in range(300))
        fp_per_frame = (total - 300) / 300  # one real detection per frame
        band = 3 * (1.5 / 300) ** 0.5
        assert abs(fp_per_frame - 1.5) <= band
        for dets in records.values():
            for det in dets:
                assert det["x"] >= 0 and det["y"] >= 0
                assert det["x"] + det["w"] <= scenario.width
                assert det["y"] + det["h"] <= scenario.height
                assert 0.0 <= det["score"] <= 1.0

    def test_jitter_moves_the_center_but_not_on_average(self):
        scenario = static_scenario(num_frames=400, seed=5, noise=NoiseModel(jitter_sigma=3.0))
        plans = plan_frames(scenario)
        records = scripted_records(scenario, "global", plans)
        offsets = []
        for plan in plans:
            (det,) = records[plan.frame]
            cx = det["x"] + det["w"] / 2
            offsets.append(cx - plan.box.cx)
        offsets = np.array(offsets)
        assert offsets.std() == pytest.approx(3.0, rel=0.25)
        assert abs(offsets.mean()) <= 3 * 3.0 / 20  # 3 sigma of the mean

    def test_roles_draw_from_independent_streams(self):
        scenario = static_scenario(num_frames=50, seed=7, noise=NoiseModel(jitter_sigma=3.0))
        assert scripted_records(scenario, "global") != scripted_records(scenario, "roi")

    def test_same_role_is_reproducible(self):
        scenario = static_scenario(num_frames=50, seed=7, noise=NoiseModel(jitter_sigma=3.0, miss_prob=0.2))
        assert scripted_records(scenario, "global") == scripted_records(scenario, "global")

    def test_scores_clamped_to_unit_interval(self):
        scenario = static_scenario(num_frames=100, seed=2, noise=NoiseModel(score_mean=0.95, score_sigma=0.3))
        records = scripted_records(scenario, "global")
        scores = [d["score"] for dets in records.values() for d in dets]
        assert all(0.0 <= s <= 1.0 for s in scores)
        assert any(s == 1.0 for s in scores)  # clamping visibly hit the cap

    def test_unknown_role_rejected(self):
        with pytest.raises(ValueError):
            scripted_records(static_scenario(), "sideways")


class TestScenarioFiles:
    FULL_DOC = {
        "width": 160,
        "height": 120,
        "fps": 25,
        "num_frames": 40,
        "seed": 9,
        "target": {"waypoints": [[20, 60], [140, 60]], "size": [16, 32], "speed": 2.0},
        "distractors": [
            {"waypoints": [[140, 30], [20, 30]], "size": [16, 32], "speeds": [3.0], "similar": False}
        ],
        "events": [
            {"kind": "occlusion_partial", "start": 5, "end": 8, "coverage": 0.4},
            {"kind": "camera_switch", "start": 20, "end": 39, "dx": 12, "dy": -4},
        ],
        "noise": {"jitter_sigma": 1.5, "miss_prob": 0.1, "latency_ms": {"global": 45.0}},
    }

    def test_full_document_round_trip(self):
        scenario = scenario_from_dict(self.FULL_DOC)
        assert scenario.width == 160 and scenario.height == 120
        assert scenario.fps == 25.0 and scenario.num_frames == 40 and scenario.seed == 9
        assert scenario.target.waypoints == ((20.0, 60.0), (140.0, 60.0))
        assert scenario.target.speeds == (2.0,)
        assert scenario.distractors[0].similar is False
        assert scenario.events[0].coverage == 0.4
        assert scenario.events[1].dx == 12.0
        assert scenario.noise.latency_ms == {"global": 45.0}

    def test_defaults_fill_in(self):
        scenario = scenario_from_dict({
            "width": 64, "height": 64, "num_frames": 3,
            "target": {"waypoints": [[32, 32]], "size": [8, 8]},
        })
        assert scenario.fps == 30.0 and scenario.seed == 0
        assert scenario.target.speeds == (1.0,)
        assert scenario.noise == NoiseModel()

    @pytest.mark.parametrize(
        "mutate",
        [
            lambda d: d.pop("target"),
            lambda d: d.update(surprise=1),
            lambda d: d["target"].update(surprise=1),
            lambda d: d["events"][0].update(kind="earthquake"),
            lambda d: d["events"][0].update(end=400),
            lambda d: d["noise"].update(latency_ms={"noone": 5}),
            lambda d: d["target"].update(waypoints=[[9999, 60]]),
        ],
    )
    def test_rejects_malformed_documents(self, mutate):
        doc = json.loads(json.dumps(self.FULL_DOC))
        mutate(doc)
        with pytest.raises(ValueError):
            scenario_from_dict(doc)

    def test_scenario_from_file(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(self.FULL_DOC))
        assert scenario_from_file(path) == scenario_from_dict(self.FULL_DOC)

    def test_scenario_from_file_bad_json(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text("{nope")
        with pytest.raises(ValueError):
            scenario_from_file(path)
        path.write_text("[1, 2]")
        with pytest.raises(ValueError):
            scenario_from_file(path)


class TestGenerate:
    def test_bundle_layout(self, tmp_path):
        scenario = static_scenario(num_frames=4, width=64, height=48, size=(8, 8), center=(32.0, 24.0))
        bundle = generate(scenario, tmp_path / "bundle")
        assert sorted(p.name for p in bundle.frames_dir.iterdir()) == [
            f"frame_{i:06d}.ppm" for i in range(4)
        ]
        meta = json.loads(bundle.manifest_path.read_text())
        assert meta == {"width": 64, "height": 48, "fps": 30.0, "count": 4}
        assert bundle.ground_truth_path.is_file()
        assert bundle.global_detections_path.is_file()
        assert bundle.roi_detections_path.is_file()

    def test_byte_identical_across_runs(self, tmp_path):
        scenario = static_scenario(
            num_frames=6, seed=21, width=64, height=48, size=(8, 8), center=(30.0, 24.0),
            noise=NoiseModel(jitter_sigma=2.0, miss_prob=0.2, false_positive_rate=0.5),
        )
        first = generate(scenario, tmp_path / "a")
        second = generate(scenario, tmp_path / "b")
        rel_a = sorted(p.relative_to(first.root) for p in first.root.rglob("*") if p.is_file())
        rel_b = sorted(p.relative_to(second.root) for p in second.root.rglob("*") if p.is_file())
        assert rel_a == rel_b
        for rel in rel_a:
            assert (first.root / rel).read_bytes() == (second.root / rel).read_bytes(), rel

    def test_different_seeds_differ(self, tmp_path):
        noise = NoiseModel(jitter_sigma=2.0)
        a = generate(static_scenario(num_frames=3, seed=1, noise=noise), tmp_path / "a")
        b = generate(static_scenario(num_frames=3, seed=2, noise=noise), tmp_path / "b")
        assert a.global_detections_path.read_bytes() != b.global_detections_path.read_bytes()
