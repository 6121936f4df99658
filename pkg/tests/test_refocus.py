import numpy as np
import pytest

from sstlf.lightfield import ApertureMask, LightField, sample_bilinear
from sstlf.refocus import EmptyAperture, FocalStack, RenderRequest, refocus
from sstlf.synth import Layer, SceneSpec, render_scene


def _constant_lf(value=0.25, rows=3, cols=3, h=16, w=20):
    views = [[np.full((h, w), value, dtype=np.float32) for _ in range(cols)]
             for _ in range(rows)]
    return LightField(views=views, disparity_range=(-5.0, 5.0))


def test_constant_lf_idempotent_any_df():
    lf = _constant_lf()
    for d_f in (-3.0, 0.0, 1.5, 4.0):
        img, valid = refocus(lf, RenderRequest(d_f=d_f))
        assert valid.all()
        assert np.abs(img - 0.25).max() < 1e-7


def test_plane_in_focus_matches_reference_view(small_scene):
    spec, _ = small_scene
    plane = SceneSpec(width=96, height=72, grid_rows=3, grid_cols=3,
                      classes=["background", "wall"],
                      layers=[Layer(label=1, disparity=4.0)], seed=2)
    ds = render_scene(plane)
    img, valid = refocus(ds.lf, RenderRequest(d_f=4.0))
    ref = ds.lf.view(*ds.lf.center)
    assert valid.all()
    assert np.abs(img - ref).max() < 1e-6


def test_defocus_equals_shifted_average_oracle():
    """Plane at d, refocused at d+2 with a full 3x3 aperture == the
    reference view averaged over the 9 positions shifted by 2 per grid
    step (checked where all samples are in bounds)."""
    plane = SceneSpec(width=120, height=90, grid_rows=3, grid_cols=3,
                      classes=["background", "wall"],
                      layers=[Layer(label=1, disparity=3.0)], seed=4)
    ds = render_scene(plane)
    img, _ = refocus(ds.lf, RenderRequest(d_f=5.0, check_range=False))

    ref = ds.lf.view(1, 1)
    h, w = ref.shape[:2]
    vv, uu = np.mgrid[:h, :w].astype(np.float64)
    acc = np.zeros_like(ref, dtype=np.float64)
    for dt in (-1, 0, 1):
        for dsh in (-1, 0, 1):
            # ray of view (1+dsh, 1+dt) hits the d=3 plane 2px off per step
            samp, valid = sample_bilinear(ref, uu + 2.0 * dsh, vv + 2.0 * dt)
            assert valid[8:-8, 8:-8].all()
            acc += samp
    oracle = (acc / 9.0).astype(np.float32)
    assert np.abs(img[8:-8, 8:-8] - oracle[8:-8, 8:-8]).max() < 1e-5


def test_linearity(small_scene, rng):
    _, ds = small_scene
    lf1 = ds.lf
    views2 = [[rng.random(lf1.view(0, 0).shape).astype(np.float32)
               for _ in range(lf1.grid_cols)] for _ in range(lf1.grid_rows)]
    lf2 = LightField(views=views2, disparity_range=lf1.disparity_range)
    a, b = 0.3, 0.6
    mixed = LightField(
        views=[[np.clip(a * lf1.view(s, t) + b * lf2.view(s, t), 0, 2).astype(np.float32)
                for s in range(lf1.grid_cols)] for t in range(lf1.grid_rows)],
        disparity_range=lf1.disparity_range)
    req = RenderRequest(d_f=2.0)
    img_mixed, _ = refocus(mixed, req)
    img1, _ = refocus(lf1, req)
    img2, _ = refocus(lf2, req)
    assert np.abs(img_mixed - (a * img1 + b * img2)).max() < 1e-6


def test_single_view_aperture_reproduces_shifted_view(small_scene):
    _, ds = small_scene
    lf = ds.lf
    w = np.zeros((3, 3))
    w[0, 0] = 1.0  # view (s=0, t=0)
    img, valid = refocus(lf, RenderRequest(d_f=2.0, aperture=ApertureMask(w)))
    vv, uu = np.mgrid[: lf.height, : lf.width].astype(np.float64)
    oracle, ovalid = sample_bilinear(lf.view(0, 0), uu + 2.0 * (0 - 1), vv + 2.0 * (0 - 1))
    assert np.array_equal(valid, ovalid)
    assert np.abs(img[valid] - oracle[valid]).max() < 1e-6


def test_energy_conservation_at_zero_parallax(small_scene):
    _, ds = small_scene
    img, valid = refocus(ds.lf, RenderRequest(d_f=0.0))
    assert valid.all()
    per_view_mean = np.mean([ds.lf.view(s, t).mean() for s, t in ds.lf.grid_positions()])
    assert abs(float(img.mean()) - per_view_mean) < 1e-4


def test_empty_aperture_rejected(small_scene):
    _, ds = small_scene
    with pytest.raises(ValueError):
        refocus(ds.lf, RenderRequest(d_f=1.0, aperture=ApertureMask(np.zeros((3, 3)))))
    with pytest.raises(EmptyAperture):
        # bypass ApertureMask's own validation to hit the render-time check
        ap = ApertureMask.full(3, 3)
        ap.weights = np.zeros((3, 3))
        refocus(ds.lf, RenderRequest(d_f=1.0, aperture=ap))


def test_df_outside_scene_range_rejected(small_scene):
    _, ds = small_scene
    with pytest.raises(ValueError):
        refocus(ds.lf, RenderRequest(d_f=99.0))


def test_focal_stack_renders_sequence(small_scene):
    _, ds = small_scene
    frames = FocalStack(d_f_values=[2.0, 3.0]).render(ds.lf)
    assert len(frames) == 2
    assert frames[0].shape == frames[1].shape
