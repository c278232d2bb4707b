from __future__ import annotations

from pathlib import Path

import pytest

from fixture_scene import SCENE_H, SCENE_W, scene_paint, write_ppm


@pytest.fixture(scope="session")
def scene(tmp_path_factory) -> Path:
    """Rendered fixture frame shared by the suite."""
    return write_ppm(tmp_path_factory.mktemp("scene") / "frame.ppm", SCENE_W, SCENE_H, scene_paint)
