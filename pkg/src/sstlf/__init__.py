"""Semantic see-through rendering on wide-baseline light fields."""

__version__ = "0.1.0"

from .lightfield import (  # noqa: F401
    ApertureMask,
    FocalPlane,
    LightField,
    load_lightfield,
    reproject,
    sample_view,
    save_lightfield,
)
from .refocus import RenderRequest, refocus  # noqa: F401
from .render import SSTRequest, WeightParams, focal_sweep, sst_render  # noqa: F401
from .stereo import StereoParams, lf_disparity  # noqa: F401
from .synth import Layer, SceneSpec, render_scene, save_dataset  # noqa: F401
