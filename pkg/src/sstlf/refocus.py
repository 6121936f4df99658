"""Regular synthetic-aperture refocusing.

Every output pixel is the aperture-weighted average of the rays that meet
on the virtual focal plane; rays falling outside a view are dropped and the
remaining weights renormalized. This is both a deliverable and the control
arm the see-through renderer is compared against.
"""

from dataclasses import dataclass, field

import numpy as np

from .lightfield import ApertureMask, sample_bilinear


class EmptyAperture(Exception):
    pass


@dataclass
class RenderRequest:
    d_f: float
    aperture: ApertureMask = None
    check_range: bool = True

    def resolve_aperture(self, lf):
        ap = self.aperture or ApertureMask.full(lf.grid_rows, lf.grid_cols)
        if ap.weights.shape != (lf.grid_rows, lf.grid_cols):
            raise ValueError("aperture grid does not match the light field")
        if not np.any(ap.weights > 0):
            raise EmptyAperture("all aperture weights are zero")
        return ap

    def validate(self, lf):
        lo, hi = lf.disparity_range
        if not np.isfinite(self.d_f):
            raise ValueError("focal disparity must be finite")
        if self.check_range and not lo <= self.d_f <= hi:
            raise ValueError(f"focal disparity {self.d_f} outside scene range [{lo}, {hi}]")


def refocus(lf, req):
    """Refocus onto the plane at disparity req.d_f; output raster is the
    central view's. Returns (image, valid) where valid marks pixels that
    received at least one in-bounds sample."""
    req.validate(lf)
    aperture = req.resolve_aperture(lf)
    s_ref, t_ref = lf.center

    vv, uu = np.mgrid[: lf.height, : lf.width].astype(np.float64)
    color_shape = (lf.height, lf.width) + ((3,) if lf.channels == 3 else ())
    accum = np.zeros(color_shape, dtype=np.float64)
    wsum = np.zeros((lf.height, lf.width), dtype=np.float64)

    for s, t in lf.grid_positions():
        a = aperture.weights[t, s]
        if a == 0:
            continue
        u = uu + req.d_f * (s - s_ref)
        v = vv + req.d_f * (t - t_ref)
        sample, valid = sample_bilinear(lf.view(s, t), u, v)
        w = a * valid
        accum += sample * (w[..., None] if accum.ndim == 3 else w)
        wsum += w

    valid = wsum > 0
    div = np.where(valid, wsum, 1.0)
    out = accum / (div[..., None] if accum.ndim == 3 else div)
    return out.astype(np.float32), valid


@dataclass
class FocalStack:
    """Refocus at a sequence of focal disparities."""

    d_f_values: list = field(default_factory=list)

    def render(self, lf, aperture=None):
        frames = []
        for d_f in self.d_f_values:
            img, _ = refocus(lf, RenderRequest(d_f=d_f, aperture=aperture))
            frames.append(img)
        return frames
