import numpy as np
import pytest

from sstlf.synth import Layer, SceneSpec, render_scene


@pytest.fixture(scope="session")
def occluded_scene():
    """5x5 grid, textured background plane at d=3 behind a 40%-coverage
    blob occluder at d=8 — the see-through benchmark scene."""
    spec = SceneSpec(
        width=256, height=256, grid_rows=5, grid_cols=5,
        classes=["background", "back_wall", "bush"],
        layers=[
            Layer(label=1, disparity=3.0, texture_seed=1),
            Layer(label=2, disparity=8.0, mask_coverage=0.4,
                  mask_feature_px=6.0, texture_seed=2),
        ],
        seed=21,
    )
    return spec, render_scene(spec)


@pytest.fixture(scope="session")
def small_scene():
    """Cheap 3x3 scene with a thin occluding bar for plumbing tests."""
    spec = SceneSpec(
        width=144, height=72, grid_rows=3, grid_cols=3,
        classes=["background", "wall", "bar"],
        layers=[
            Layer(label=1, disparity=3.0),
            Layer(label=2, disparity=7.0, extent=(64, 10, 74, 60)),
        ],
        seed=9,
    )
    return spec, render_scene(spec)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
