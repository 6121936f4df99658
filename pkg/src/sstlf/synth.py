"""Synthetic light-field generator with exact ground truth.

Scenes are stacks of textured layers (fronto-parallel planes or slanted
quads, optionally cut by a binary opacity mask). Rendering shifts each
layer by disparity x grid offset with z-order occlusion, so the emitted
views, disparity maps, semantic maps and label-probability volumes are
mutually consistent by construction. This is the oracle used by the test
suite: every quantity here is computed in closed form, never estimated.
"""

import json
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .lightfield import LightField, save_lightfield
from .pfm import write_pfm
from .semantics import save_palette, save_prob_volume, save_semantic_map


class BadSpec(Exception):
    pass


@dataclass
class Layer:
    """One textured scene layer.

    disparity is the value at reference pixel (0, 0); grad_u/grad_v slant
    the surface (d = disparity + grad_u*u + grad_v*v in reference coords).
    extent restricts the layer to a rect [x0, y0, x1, y1]; mask_coverage
    in (0, 1) cuts the layer with a random blob mask (bush-like occluder).
    """

    label: int
    disparity: float
    grad_u: float = 0.0
    grad_v: float = 0.0
    extent: tuple = None
    mask_coverage: float = None
    mask_feature_px: float = 6.0
    color: tuple = None
    texture_seed: int = 0


@dataclass
class SceneSpec:
    width: int
    height: int
    grid_rows: int = 3
    grid_cols: int = 3
    classes: list = field(default_factory=lambda: ["background"])
    layers: list = field(default_factory=list)
    noise: float = 0.0
    prob_temperature: float = 0.0
    label_noise: float = 0.0
    seed: int = 0
    channels: int = 3

    def validate(self):
        if self.width < 8 or self.height < 8:
            raise BadSpec("scene too small")
        if self.grid_rows < 1 or self.grid_cols < 1:
            raise BadSpec("empty camera grid")
        if not self.layers:
            raise BadSpec("scene needs at least one layer")
        if len(self.classes) < 2:
            raise BadSpec("need at least background plus one class")
        for layer in self.layers:
            if not (1 <= layer.label < len(self.classes)):
                raise BadSpec(f"layer label {layer.label} outside class table")
        if self.layers[0].extent is not None or self.layers[0].mask_coverage is not None:
            raise BadSpec("first layer must be a full background plane")
        if not 0.0 <= self.prob_temperature <= 1.0:
            raise BadSpec("prob_temperature must be in [0, 1]")
        if not 0.0 <= self.label_noise <= 1.0:
            raise BadSpec("label_noise must be in [0, 1]")

    @property
    def disparity_range(self):
        ds = []
        for layer in self.layers:
            corners = [
                layer.disparity + layer.grad_u * u + layer.grad_v * v
                for u in (0, self.width - 1)
                for v in (0, self.height - 1)
            ]
            ds.extend(corners)
        return (min(0.0, min(ds)), max(ds))

    @classmethod
    def from_json(cls, path):
        with open(path) as f:
            raw = json.load(f)
        layers = [Layer(**{**lr, "extent": tuple(lr["extent"]) if lr.get("extent") else None,
                           "color": tuple(lr["color"]) if lr.get("color") else None})
                  for lr in raw.pop("layers", [])]
        spec = cls(layers=layers, **raw)
        spec.validate()
        return spec


@dataclass
class SynthDataset:
    """render_scene output: views plus per-view ground truth."""

    lf: LightField
    disparity: dict  # (s, t) -> (H, W) float32
    labels: dict     # (s, t) -> (H, W) int32
    probs: dict      # (s, t) -> (H, W, C) float32
    classes: list
    spec: SceneSpec


def _band_limited_texture(rng, shape, color, channels):
    """Procedural texture: two noise octaves, normalized away from 0/1 so
    additive pixel noise cannot clip."""
    fine = gaussian_filter(rng.standard_normal(shape), 1.2)
    coarse = gaussian_filter(rng.standard_normal(shape), 4.0)
    base = 0.65 * fine / (np.abs(fine).max() + 1e-12) + 0.35 * coarse / (np.abs(coarse).max() + 1e-12)
    base = 0.5 + 0.42 * base / (np.abs(base).max() + 1e-12)
    if channels == 1:
        return base.astype(np.float32)
    tex = np.empty(shape + (3,), dtype=np.float32)
    for c in range(3):
        tex[:, :, c] = np.clip(base * color[c], 0.02, 0.98)
    return tex


def _blob_mask(rng, shape, coverage, feature_px):
    """Binary mask covering ~coverage of the canvas, blob size ~feature_px."""
    noise = gaussian_filter(rng.standard_normal(shape), feature_px / 2.0)
    thresh = np.quantile(noise, 1.0 - coverage)
    return noise >= thresh


class _BakedLayer:
    """Layer with its texture/mask baked on a canvas padded to cover every
    view's reprojected footprint."""

    def __init__(self, layer, spec, pad, rng):
        self.layer = layer
        self.pad = pad
        shape = (spec.height + 2 * pad, spec.width + 2 * pad)
        tex_rng = np.random.default_rng(rng.integers(2**63) + layer.texture_seed)
        color = layer.color
        if color is None:
            color = tuple(0.35 + 0.6 * tex_rng.random(3))
        self.texture = _band_limited_texture(tex_rng, shape, color, spec.channels)
        if layer.mask_coverage is not None:
            if not 0.0 < layer.mask_coverage < 1.0:
                raise BadSpec("mask_coverage must be in (0, 1)")
            self.mask = _blob_mask(tex_rng, shape, layer.mask_coverage, layer.mask_feature_px)
        else:
            self.mask = None

    def disparity_at(self, uu, vv, ds, dt):
        """Disparity of the layer surface along each view ray; solves the
        slant/parallax coupling in closed form."""
        lr = self.layer
        denom = 1.0 + lr.grad_u * ds + lr.grad_v * dt
        if denom <= 0.1:
            raise BadSpec("layer slant too steep for this grid offset")
        return (lr.disparity + lr.grad_u * uu + lr.grad_v * vv) / denom

    def hit(self, uu, vv, ds, dt):
        """Returns (disparity, u_ref, v_ref, covered) for view pixel rays."""
        d = self.disparity_at(uu, vv, ds, dt)
        u0 = uu - d * ds
        v0 = vv - d * dt
        covered = np.ones(uu.shape, dtype=bool)
        lr = self.layer
        if lr.extent is not None:
            x0, y0, x1, y1 = lr.extent
            covered &= (u0 >= x0) & (u0 <= x1) & (v0 >= y0) & (v0 <= y1)
        if self.mask is not None:
            mi = np.clip(np.rint(v0).astype(np.intp) + self.pad, 0, self.mask.shape[0] - 1)
            mj = np.clip(np.rint(u0).astype(np.intp) + self.pad, 0, self.mask.shape[1] - 1)
            covered &= self.mask[mi, mj]
        # padded canvas bound (only reachable for extreme slants)
        covered &= (u0 >= -self.pad) & (u0 <= self.layer_width(uu) - 1 + self.pad)
        return d, u0, v0, covered

    def layer_width(self, uu):
        return self.texture.shape[1] - 2 * self.pad

    def sample(self, u0, v0):
        """Bilinear texture lookup in padded-canvas coordinates."""
        tex = self.texture
        x = np.clip(u0 + self.pad, 0, tex.shape[1] - 1.0)
        y = np.clip(v0 + self.pad, 0, tex.shape[0] - 1.0)
        x0 = np.floor(x).astype(np.intp)
        y0 = np.floor(y).astype(np.intp)
        x1 = np.minimum(x0 + 1, tex.shape[1] - 1)
        y1 = np.minimum(y0 + 1, tex.shape[0] - 1)
        fx = (x - x0).astype(np.float32)
        fy = (y - y0).astype(np.float32)
        if tex.ndim == 3:
            fx = fx[..., None]
            fy = fy[..., None]
        top = tex[y0, x0] * (1 - fx) + tex[y0, x1] * fx
        bot = tex[y1, x0] * (1 - fx) + tex[y1, x1] * fx
        return top * (1 - fy) + bot * fy


def _bake_layers(spec):
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.disparity_range
    max_off = max(spec.grid_cols - 1, spec.grid_rows - 1)
    pad = int(np.ceil(max(abs(lo), abs(hi)) * max_off)) + 2
    return [_BakedLayer(layer, spec, pad, rng) for layer in spec.layers]


def render_scene(spec):
    """Rasterize the scene into views + ground truth for every grid cell."""
    spec.validate()
    baked = _bake_layers(spec)
    s_ref = spec.grid_cols // 2
    t_ref = spec.grid_rows // 2
    vv, uu = np.mgrid[: spec.height, : spec.width].astype(np.float64)

    noise_rng = np.random.default_rng(spec.seed + 1)
    prob_rng = np.random.default_rng(spec.seed + 2)
    num_classes = len(spec.classes)

    views, disparity, labels, probs = [], {}, {}, {}
    for t in range(spec.grid_rows):
        row = []
        for s in range(spec.grid_cols):
            ds, dt = s - s_ref, t - t_ref
            best_d = np.full((spec.height, spec.width), -np.inf)
            best_idx = np.full((spec.height, spec.width), -1, dtype=np.intp)
            hits = []
            for idx, bl in enumerate(baked):
                d, u0, v0, covered = bl.hit(uu, vv, ds, dt)
                hits.append((d, u0, v0))
                front = covered & (d > best_d)
                best_d[front] = d[front]
                best_idx[front] = idx
            if np.any(best_idx < 0):
                raise BadSpec("background layer does not cover the frame")

            img = np.zeros((spec.height, spec.width) + ((3,) if spec.channels == 3 else ()),
                           dtype=np.float32)
            lab = np.zeros((spec.height, spec.width), dtype=np.int32)
            for idx, bl in enumerate(baked):
                sel = best_idx == idx
                if not sel.any():
                    continue
                d, u0, v0 = hits[idx]
                img[sel] = bl.sample(u0[sel], v0[sel])
                lab[sel] = bl.layer.label
            if spec.noise > 0:
                img = np.clip(img + spec.noise * noise_rng.standard_normal(img.shape)
                              .astype(np.float32), 0.0, 1.0)

            row.append(img)
            disparity[(s, t)] = best_d.astype(np.float32)
            labels[(s, t)] = lab
            probs[(s, t)] = _label_probs(lab, num_classes, spec, prob_rng)
        views.append(row)

    lo, hi = spec.disparity_range
    lf = LightField(views=views, disparity_range=(float(lo), float(np.ceil(hi))))
    return SynthDataset(lf=lf, disparity=disparity, labels=labels, probs=probs,
                        classes=list(spec.classes), spec=spec)


def _label_probs(labels, num_classes, spec, rng):
    """One-hot volumes, optionally corrupted the way a real segmenter is:
    label_noise flips a fraction of pixels to a wrong class, temperature
    mixes toward uniform — more strongly near label boundaries and on the
    flipped pixels, so entropy actually predicts error."""
    lab = labels
    flip = np.zeros(lab.shape, dtype=bool)
    if spec.label_noise > 0:
        flip = rng.random(lab.shape) < spec.label_noise
        offset = rng.integers(1, num_classes, size=lab.shape)
        lab = np.where(flip, (lab + offset) % num_classes, lab)
    one_hot = np.zeros(lab.shape + (num_classes,), dtype=np.float32)
    np.put_along_axis(one_hot, lab[..., None].astype(np.intp), 1.0, axis=-1)
    if spec.prob_temperature > 0 or flip.any():
        tau = np.full(lab.shape, spec.prob_temperature, dtype=np.float32)
        if spec.prob_temperature > 0:
            from scipy.ndimage import binary_dilation
            edges = np.zeros(lab.shape, dtype=bool)
            edges[:, 1:] |= labels[:, 1:] != labels[:, :-1]
            edges[1:, :] |= labels[1:, :] != labels[:-1, :]
            tau += 0.5 * binary_dilation(edges, iterations=2)
        tau = np.where(flip, np.maximum(tau, 0.5 + 0.4 * rng.random(lab.shape)), tau)
        tau = np.clip(tau, 0.0, 0.9)[..., None].astype(np.float32)
        one_hot = (1.0 - tau) * one_hot + tau / num_classes
    return one_hot


def render_single_layer(spec, layer_index, s=None, t=None):
    """One layer rendered alone (mask and occluders ignored) into the given
    view; the unoccluded reference used by see-through oracles. Baking is
    identical to render_scene, so textures match the full render exactly."""
    spec.validate()
    baked = _bake_layers(spec)
    bl = baked[layer_index]
    s_ref, t_ref = spec.grid_cols // 2, spec.grid_rows // 2
    if s is None:
        s, t = s_ref, t_ref
    vv, uu = np.mgrid[: spec.height, : spec.width].astype(np.float64)
    d = bl.disparity_at(uu, vv, s - s_ref, t - t_ref)
    u0 = uu - d * (s - s_ref)
    v0 = vv - d * (t - t_ref)
    return bl.sample(u0, v0).astype(np.float32), d.astype(np.float32)


def visibility_counts(dataset, target_label, d_f):
    """Per reference-view pixel: number of views in which the ray aimed at
    the focal plane lands on `target_label` (nearest-neighbor, in bounds).

    This is the independent oracle for see-through coverage: a background
    pixel is recoverable iff its count is >= 1.
    """
    lf = dataset.lf
    s_ref, t_ref = lf.center
    vv, uu = np.mgrid[: lf.height, : lf.width].astype(np.float64)
    counts = np.zeros((lf.height, lf.width), dtype=np.int32)
    for s, t in lf.grid_positions():
        u = uu + d_f * (s - s_ref)
        v = vv + d_f * (t - t_ref)
        ui = np.rint(u).astype(np.intp)
        vi = np.rint(v).astype(np.intp)
        inb = (ui >= 0) & (ui < lf.width) & (vi >= 0) & (vi < lf.height)
        lab = np.zeros_like(counts)
        lab[inb] = dataset.labels[(s, t)][vi[inb], ui[inb]]
        counts += (inb & (lab == target_label)).astype(np.int32)
    return counts


def save_dataset(dataset, outdir, view_format="png"):
    """Emit the dataset in the on-disk layout shared by all pipeline stages:

    outdir/manifest.json + view_<s>_<t>.<ext>   light field
    outdir/probs/                               label-probability volumes
    outdir/gt/                                  ground-truth disparity/labels
    """
    os.makedirs(outdir, exist_ok=True)
    lf = dataset.lf
    lf.view_pattern = f"view_{{s}}_{{t}}.{view_format}"
    save_lightfield(lf, outdir)

    probs_dir = os.path.join(outdir, "probs")
    os.makedirs(probs_dir, exist_ok=True)
    for (s, t), vol in dataset.probs.items():
        save_prob_volume(probs_dir, f"{s}_{t}", vol)
    with open(os.path.join(probs_dir, "classes.json"), "w") as f:
        json.dump({"num_classes": len(dataset.classes), "classes": dataset.classes}, f, indent=2)

    gt_dir = os.path.join(outdir, "gt")
    os.makedirs(gt_dir, exist_ok=True)
    for (s, t), disp in dataset.disparity.items():
        write_pfm(os.path.join(gt_dir, f"disp_{s}_{t}.pfm"), disp)
    for (s, t), lab in dataset.labels.items():
        save_semantic_map(os.path.join(gt_dir, f"sem_{s}_{t}.png"), lab)
    save_palette(os.path.join(gt_dir, "palette.json"), dataset.classes)
    return outdir
