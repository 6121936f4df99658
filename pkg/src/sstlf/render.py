"""Semantic see-through rendering.

Regular refocusing treats all rays equally; here every ray is weighted by
(a) a Gaussian of how far its own disparity sits from the focal plane,
floored at C1, and (b) a quadratic bump over its semantic label's
disparity range in that view, floored at C2. The product is normalized
over the aperture per output pixel. With the depth Gaussian bypassed
(sigma_d = inf) and C1 = C2 = 1 the renderer degrades exactly to regular
refocusing. An optional user-chosen target label down-weights every other
label whose depth range overlaps the target's.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .lightfield import ApertureMask, sample_bilinear, sample_nearest
from .semantics import BACKGROUND


class RenderError(Exception):
    pass


class MissingMaps(RenderError):
    pass


class ZeroWeightSum(RenderError):
    pass


@dataclass
class WeightParams:
    """sigma_d: depth-weight stddev in disparity px (inf bypasses the
    Gaussian); C1/C2: fading floors; suppress_factor: down-weight applied
    to labels overlapping a user-picked target."""

    sigma_d: float = 0.5
    c1: float = 0.1
    c2: float = 0.05
    target_label: int = None
    suppress_factor: float = 2.0

    def __post_init__(self):
        if self.sigma_d is None:
            self.sigma_d = math.inf
        if not self.sigma_d > 0:
            raise ValueError("sigma_d must be positive")
        if not (0 <= self.c1 <= 1 and 0 <= self.c2 <= 1):
            raise ValueError("C1/C2 must lie in [0, 1]")
        if self.suppress_factor < 1:
            raise ValueError("suppress_factor must be >= 1")


@dataclass
class SSTRequest:
    d_f: float
    aperture: ApertureMask = None
    params: WeightParams = field(default_factory=WeightParams)
    check_range: bool = True


def depth_weight(d_ray, d_f, sigma_d, c1):
    """(1 - C1) * exp(-(d_f - d_ray)^2 / 2 sigma^2) + C1; peak 1 on the
    focal plane, floor C1 far from it. Vectorized over d_ray."""
    d_ray = np.asarray(d_ray, dtype=np.float64)
    gauss = np.exp(-((d_f - d_ray) ** 2) / (2.0 * sigma_d**2))
    return (1.0 - c1) * gauss + c1


def label_depth_ranges(disps, semmaps):
    """Per view, per label: [D_min, D_max] over the rays carrying that
    label in that view."""
    ranges = {}
    for key, sem in semmaps.items():
        disp = disps[key]
        per_label = {}
        for label in np.unique(sem):
            d = disp[sem == label]
            per_label[int(label)] = (float(d.min()), float(d.max()))
        ranges[key] = per_label
    return ranges


def _quadratic_bump(d_f, d_min, d_max, sigma_d):
    """max{0, -(d_f-Dmin)(d_f-Dmax) / ((Dmax-Dmin)/2)^2}; a degenerate
    range becomes a sigma_d-wide box so single-depth labels keep a
    usable in-focus window."""
    d_min = np.asarray(d_min, dtype=np.float64)
    d_max = np.asarray(d_max, dtype=np.float64)
    span = d_max - d_min
    degenerate = span < 1e-12
    with np.errstate(divide="ignore", invalid="ignore"):
        quad = -(d_f - d_min) * (d_f - d_max) / (span / 2.0) ** 2
    box = (np.abs(d_f - d_min) <= sigma_d).astype(np.float64)
    return np.where(degenerate, box, np.maximum(quad, 0.0))


def semantic_weight(label, view, d_f, ranges, c2, sigma_d=0.5):
    """Weight of a ray of `label` in `view`: quadratic over the label's
    per-view depth range, floored at C2. Labels absent from the view fall
    to the floor."""
    per_label = ranges.get(view, {})
    if label not in per_label:
        return c2
    d_min, d_max = per_label[label]
    w_star = float(_quadratic_bump(d_f, d_min, d_max, sigma_d))
    return (1.0 - c2) * w_star + c2


def joint_weight(w_depth, w_semantic):
    return np.asarray(w_depth) * np.asarray(w_semantic)


def normalize_weights(weights):
    """Normalize per-ray joint weights so they sum to 1; zero total sum is
    the ZeroWeightSum condition."""
    w = np.asarray(weights, dtype=np.float64)
    total = w.sum()
    if total <= 0:
        raise ZeroWeightSum("no ray carries positive weight")
    return w / total


def _overlapping_labels(ranges, center_key, target_label):
    """Labels whose depth range intersects the target's in the reference
    view - the candidates for user suppression."""
    per_label = ranges.get(center_key, {})
    if target_label not in per_label:
        return set()
    t_lo, t_hi = per_label[target_label]
    out = set()
    for label, (lo, hi) in per_label.items():
        if label != target_label and hi >= t_lo and lo <= t_hi:
            out.add(label)
    return out


def _view_semantic_lut(per_label, d_f, c2, sigma_d, num_labels):
    """Per-label semantic weight table for one view (index = label)."""
    lut = np.full(num_labels, c2, dtype=np.float64)
    for label, (d_min, d_max) in per_label.items():
        w_star = _quadratic_bump(d_f, d_min, d_max, sigma_d)
        lut[label] = (1.0 - c2) * float(w_star) + c2
    return lut


def sst_render(lf, disps, semmaps, req, return_weights=False):
    """Semantic see-through render on the central view's raster.

    Per output pixel and aperture view: reproject onto the focal plane,
    fetch the view's disparity and label at the hit (nearest neighbor -
    labels are categorical), take the product of depth and semantic
    weights, then normalize over all in-bounds rays. Pixels whose rays all
    miss (or all carry zero weight) come back black with valid = False.

    Returns (image, valid) or (image, valid, weight_maps) with the
    normalized per-view weights when return_weights is set.
    """
    p = req.params
    lo, hi = lf.disparity_range
    if not np.isfinite(req.d_f):
        raise RenderError("focal disparity must be finite")
    if req.check_range and not lo <= req.d_f <= hi:
        raise RenderError(f"focal disparity {req.d_f} outside scene range [{lo}, {hi}]")
    aperture = req.aperture or ApertureMask.full(lf.grid_rows, lf.grid_cols)
    if aperture.weights.shape != (lf.grid_rows, lf.grid_cols):
        raise RenderError("aperture grid does not match the light field")

    for s, t in lf.grid_positions():
        if aperture.weights[t, s] > 0 and ((s, t) not in disps or (s, t) not in semmaps):
            raise MissingMaps(f"no disparity/semantic map for view ({s},{t})")

    ranges = label_depth_ranges(disps, semmaps)
    num_labels = max(max(pl) for pl in ranges.values() if pl) + 1
    suppress = set()
    if p.target_label is not None:
        suppress = _overlapping_labels(ranges, lf.center, p.target_label)

    s_ref, t_ref = lf.center
    vv, uu = np.mgrid[: lf.height, : lf.width].astype(np.float64)
    color_shape = (lf.height, lf.width) + ((3,) if lf.channels == 3 else ())
    accum = np.zeros(color_shape, dtype=np.float64)
    wsum = np.zeros((lf.height, lf.width), dtype=np.float64)
    raw_weights = {} if return_weights else None

    for s, t in lf.grid_positions():
        a = aperture.weights[t, s]
        if a == 0:
            continue
        u = uu + req.d_f * (s - s_ref)
        v = vv + req.d_f * (t - t_ref)
        color, valid = sample_bilinear(lf.view(s, t), u, v)
        d_ray, _ = sample_nearest(disps[(s, t)], u, v)
        labels, _ = sample_nearest(semmaps[(s, t)], u, v)
        labels = labels.astype(np.intp)

        w_d = depth_weight(d_ray, req.d_f, p.sigma_d, p.c1)
        lut = _view_semantic_lut(ranges[(s, t)], req.d_f, p.c2, p.sigma_d, num_labels)
        w_s = lut[labels]
        w = a * w_d * w_s
        if suppress:
            w = np.where(np.isin(labels, list(suppress)), w / p.suppress_factor, w)
        w = w * valid

        accum += color * (w[..., None] if accum.ndim == 3 else w)
        wsum += w
        if return_weights:
            raw_weights[(s, t)] = w

    valid = wsum > 0
    div = np.where(valid, wsum, 1.0)
    out = (accum / (div[..., None] if accum.ndim == 3 else div)).astype(np.float32)
    out[~valid] = 0.0
    if return_weights:
        norm = {k: np.where(valid, w / div, 0.0) for k, w in raw_weights.items()}
        return out, valid, norm
    return out, valid


def focal_sweep(lf, disps, semmaps, d_f_values, params=None, aperture=None):
    """sst_render over a monotone focal-disparity sequence; weights are
    renormalized per frame so transitions stay smooth."""
    d_f_values = list(d_f_values)
    if len(d_f_values) >= 2:
        diffs = np.diff(d_f_values)
        if not (np.all(diffs >= 0) or np.all(diffs <= 0)):
            raise RenderError("focal sweep values must be monotone")
    params = params or WeightParams()
    frames = []
    for d_f in d_f_values:
        img, _ = sst_render(lf, disps, semmaps,
                            SSTRequest(d_f=d_f, aperture=aperture, params=params))
        frames.append(img)
    return frames
