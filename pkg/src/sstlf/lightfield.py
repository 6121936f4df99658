"""Light-field data model: rectified view grids, calibration, sampling, I/O.

A light field is a dense (rows x cols) grid of rectified views sharing one
pixel raster. Grid position (s, t) indexes column and row of the camera
array; pixel position (u, v) indexes column and row inside a view. The
parallax convention used throughout the package: a scene point at disparity
d seen at (u, v) in view (s_ref, t_ref) appears at

    (u + d * (s - s_ref),  v + d * (t - t_ref))

in view (s, t). The virtual focal plane is specified by its disparity d_f in
the same units (pixels per grid step).
"""

import json
import os
from dataclasses import dataclass, field

import cv2
import numpy as np

from .pfm import read_pfm, write_pfm


class LightFieldError(Exception):
    pass


class MissingView(LightFieldError):
    pass


class DimensionMismatch(LightFieldError):
    pass


class BadManifest(LightFieldError):
    pass


class BadViewIndex(LightFieldError):
    pass


def as_view_image(data):
    """Validate and normalize an array to the view-image contract.

    Returns float32, (H, W) or (H, W, 3), all samples finite.
    """
    img = np.asarray(data, dtype=np.float32)
    if img.ndim == 3 and img.shape[2] == 1:
        img = img[:, :, 0]
    if img.ndim not in (2, 3) or (img.ndim == 3 and img.shape[2] != 3):
        raise DimensionMismatch(f"unsupported image shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise DimensionMismatch("empty image")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite samples")
    return img


@dataclass(frozen=True)
class FocalPlane:
    """Virtual focal plane at disparity d_f (pixels per grid step)."""

    d_f: float

    def depth(self, baseline, disparity_scale):
        """Metric depth of the plane; infinite for d_f = 0."""
        if self.d_f == 0:
            return float("inf")
        return baseline * disparity_scale / self.d_f


@dataclass
class ApertureMask:
    """Per-view nonnegative blending weights A(s, t), shape (rows, cols)."""

    weights: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ValueError("aperture weights must be a (rows, cols) grid")
        if np.any(self.weights < 0):
            raise ValueError("aperture weights must be nonnegative")
        if not np.any(self.weights > 0):
            raise ValueError("aperture must have at least one positive weight")
        if self.normalized and not np.isclose(self.weights.sum(), 1.0):
            raise ValueError("normalized aperture must sum to 1")

    @classmethod
    def full(cls, rows, cols):
        return cls(np.ones((rows, cols)))

    @classmethod
    def center(cls, rows, cols):
        w = np.zeros((rows, cols))
        w[rows // 2, cols // 2] = 1.0
        return cls(w)

    @classmethod
    def radius(cls, rows, cols, r):
        """Disc of radius r (in grid steps) around the central view."""
        tt, ss = np.mgrid[:rows, :cols]
        dist = np.hypot(ss - cols // 2, tt - rows // 2)
        w = (dist <= r).astype(np.float64)
        if not w.any():
            w[rows // 2, cols // 2] = 1.0
        return cls(w)

    def normalize(self):
        return ApertureMask(self.weights / self.weights.sum(), normalized=True)


@dataclass
class LightField:
    """Dense rectified view grid plus calibration.

    views[t][s] is the float32 image of grid cell (s, t); all views share
    height, width and channel count. Instances are treated as immutable
    after construction, so reads are safe from concurrent workers.
    """

    views: list
    baseline: float = 1.0
    disparity_scale: float = 1.0
    disparity_range: tuple = (0.0, 16.0)
    view_pattern: str = "view_{s}_{t}.png"
    rectified: bool = True
    class_names: dict = field(default_factory=dict)

    def __post_init__(self):
        rows = len(self.views)
        if rows == 0 or len(self.views[0]) == 0:
            raise DimensionMismatch("empty view grid")
        cols = len(self.views[0])
        ref = None
        for t in range(rows):
            if len(self.views[t]) != cols:
                raise DimensionMismatch("ragged view grid")
            for s in range(cols):
                img = as_view_image(self.views[t][s])
                if ref is None:
                    ref = img.shape
                elif img.shape != ref:
                    raise DimensionMismatch(
                        f"view ({s},{t}) has shape {img.shape}, expected {ref}"
                    )
                self.views[t][s] = img
        lo, hi = self.disparity_range
        if not (np.isfinite(lo) and np.isfinite(hi) and hi >= lo):
            raise BadManifest(f"bad disparity range [{lo}, {hi}]")

    @property
    def grid_rows(self):
        return len(self.views)

    @property
    def grid_cols(self):
        return len(self.views[0])

    @property
    def height(self):
        return self.views[0][0].shape[0]

    @property
    def width(self):
        return self.views[0][0].shape[1]

    @property
    def channels(self):
        v = self.views[0][0]
        return 1 if v.ndim == 2 else v.shape[2]

    @property
    def center(self):
        """Grid index (s, t) of the central (reference) view."""
        return (self.grid_cols // 2, self.grid_rows // 2)

    def view(self, s, t):
        if not (0 <= s < self.grid_cols and 0 <= t < self.grid_rows):
            raise BadViewIndex(f"view ({s},{t}) outside {self.grid_cols}x{self.grid_rows} grid")
        return self.views[t][s]

    def grid_positions(self):
        for t in range(self.grid_rows):
            for s in range(self.grid_cols):
                yield s, t


def reproject(u_ref, v_ref, d_f, s, t, s_ref, t_ref):
    """Pixel in view (s, t) hit by the ray through (u_ref, v_ref) on the
    focal plane at disparity d_f. Works elementwise on arrays."""
    u = u_ref + d_f * (s - s_ref)
    v = v_ref + d_f * (t - t_ref)
    return u, v


def sample_bilinear(img, u, v):
    """Bilinearly sample img at fractional (u, v); vectorized.

    Returns (values, valid). Out-of-bounds positions are reported invalid
    and their values are 0 so callers can renormalize blending weights.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    h, w = img.shape[:2]
    valid = (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)

    uc = np.clip(u, 0, w - 1)
    vc = np.clip(v, 0, h - 1)
    u0 = np.floor(uc).astype(np.intp)
    v0 = np.floor(vc).astype(np.intp)
    u1 = np.minimum(u0 + 1, w - 1)
    v1 = np.minimum(v0 + 1, h - 1)
    fu = (uc - u0).astype(np.float32)
    fv = (vc - v0).astype(np.float32)
    if img.ndim == 3:
        fu = fu[..., None]
        fv = fv[..., None]

    top = img[v0, u0] * (1 - fu) + img[v0, u1] * fu
    bot = img[v1, u0] * (1 - fu) + img[v1, u1] * fu
    out = top * (1 - fv) + bot * fv
    out = np.where(valid[..., None] if img.ndim == 3 else valid, out, 0.0)
    return out.astype(np.float32), valid


def sample_nearest(img, u, v):
    """Nearest-neighbor sample (for categorical maps); same validity rule
    as sample_bilinear so a ray's color/label/disparity agree on bounds."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    h, w = img.shape[:2]
    valid = (u >= 0) & (u <= w - 1) & (v >= 0) & (v <= h - 1)
    ui = np.clip(np.rint(u), 0, w - 1).astype(np.intp)
    vi = np.clip(np.rint(v), 0, h - 1).astype(np.intp)
    return img[vi, ui], valid


def sample_view(lf, s, t, u, v):
    """Sample one view at a fractional pixel position.

    Returns (color, valid); valid is False outside the image, in which case
    the color is the no-sample sentinel 0.
    """
    img = lf.view(s, t)
    out, valid = sample_bilinear(img, u, v)
    return out, bool(np.asarray(valid))


# ---------------------------------------------------------------------------
# file I/O

_MANIFEST_KEYS = ("grid_rows", "grid_cols", "baseline", "disparity_scale")


def _read_image(path):
    """Read PNG/PPM/PFM into float32 in [0, 1] (PFM passes through)."""
    if path.endswith(".pfm"):
        return read_pfm(path)
    raw = cv2.imread(path, cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise MissingView(f"cannot read {path}")
    if raw.ndim == 3:
        if raw.shape[2] == 4:
            raw = raw[:, :, :3]
        raw = raw[:, :, ::-1]  # BGR -> RGB
    if raw.dtype == np.uint8:
        return raw.astype(np.float32) / 255.0
    if raw.dtype == np.uint16:
        return raw.astype(np.float32) / 65535.0
    return raw.astype(np.float32)


def _write_image(path, img):
    img = np.asarray(img, dtype=np.float32)
    if path.endswith(".pfm"):
        write_pfm(path, img)
        return
    arr = np.clip(img, 0.0, 1.0)
    if path.endswith(".png"):
        out = np.round(arr * 65535.0).astype(np.uint16)
    else:  # 8-bit ppm
        out = np.round(arr * 255.0).astype(np.uint8)
    if out.ndim == 3:
        out = out[:, :, ::-1]  # RGB -> BGR
    if not cv2.imwrite(path, out):
        raise LightFieldError(f"cannot write {path}")


def load_manifest(path):
    try:
        with open(path) as f:
            m = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise BadManifest(f"{path}: {e}") from e
    for key in _MANIFEST_KEYS:
        if key not in m:
            raise BadManifest(f"{path}: missing key {key!r}")
    if m["grid_rows"] < 1 or m["grid_cols"] < 1:
        raise BadManifest(f"{path}: bad grid {m['grid_cols']}x{m['grid_rows']}")
    m.setdefault("disparity_range", [0.0, 16.0])
    m.setdefault("view_pattern", "view_{s}_{t}.png")
    return m


def load_lightfield(directory, manifest=None):
    """Load a light field from a directory of per-view images.

    The manifest (default <directory>/manifest.json) declares grid
    dimensions, calibration and the view filename pattern.
    """
    if manifest is None:
        manifest = os.path.join(directory, "manifest.json")
    m = load_manifest(manifest) if isinstance(manifest, str) else dict(manifest)

    rows, cols = m["grid_rows"], m["grid_cols"]
    pattern = m.get("view_pattern", "view_{s}_{t}.png")
    views = []
    for t in range(rows):
        row = []
        for s in range(cols):
            path = os.path.join(directory, pattern.format(s=s, t=t))
            if not os.path.exists(path):
                raise MissingView(f"grid cell ({s},{t}): no file {path}")
            row.append(_read_image(path))
        views.append(row)

    return LightField(
        views=views,
        baseline=float(m["baseline"]),
        disparity_scale=float(m["disparity_scale"]),
        disparity_range=tuple(m.get("disparity_range", (0.0, 16.0))),
        view_pattern=pattern,
        rectified=bool(m.get("rectified", True)),
    )


def save_lightfield(lf, directory, pattern=None):
    """Write all views plus a manifest; pattern extension picks the format."""
    os.makedirs(directory, exist_ok=True)
    pattern = pattern or lf.view_pattern
    for s, t in lf.grid_positions():
        _write_image(os.path.join(directory, pattern.format(s=s, t=t)), lf.view(s, t))
    manifest = {
        "grid_rows": lf.grid_rows,
        "grid_cols": lf.grid_cols,
        "baseline": lf.baseline,
        "disparity_scale": lf.disparity_scale,
        "disparity_range": list(lf.disparity_range),
        "view_pattern": pattern,
        "rectified": lf.rectified,
    }
    with open(os.path.join(directory, "manifest.json"), "w") as f:
        json.dump(manifest, f, indent=2)
    return manifest
