#!/usr/bin/env python3
"""Classic synthetic-aperture refocusing on a generated light field.

Builds a two-layer scene (textured back wall behind a floating bar),
renders a 3x3 camera grid, then refocuses onto each layer. Where the
focal plane matches a layer's disparity that layer snaps into focus and
the other blurs across the aperture.
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from sstlf import ApertureMask, Layer, RenderRequest, SceneSpec, refocus, render_scene

OUT = os.path.join(os.path.dirname(__file__), "out", "01_refocus")
os.makedirs(OUT, exist_ok=True)

spec = SceneSpec(
    width=320, height=240, grid_rows=3, grid_cols=3,
    classes=["background", "wall", "bar"],
    layers=[
        Layer(label=1, disparity=2.0, texture_seed=1),
        Layer(label=2, disparity=7.0, extent=(120, 40, 200, 200), texture_seed=2),
    ],
    seed=42,
)
ds = render_scene(spec)
print(f"rendered {ds.lf.grid_rows}x{ds.lf.grid_cols} grid, "
      f"{ds.lf.width}x{ds.lf.height} px per view")

fig, axes = plt.subplots(1, 3, figsize=(14, 4))
for ax, d_f, title in [
    (axes[0], 2.0, "focus on wall (d_f = 2)"),
    (axes[1], 4.5, "between layers (d_f = 4.5)"),
    (axes[2], 7.0, "focus on bar (d_f = 7)"),
]:
    img, valid = refocus(ds.lf, RenderRequest(d_f=d_f))
    ax.imshow(np.clip(img, 0, 1))
    ax.set_title(title)
    ax.axis("off")
    print(f"d_f = {d_f}: {int(valid.sum())}/{valid.size} pixels got samples")
fig.tight_layout()
fig.savefig(os.path.join(OUT, "focal_stack.png"), dpi=110)

# a single-view aperture degenerates to one (shifted) camera
center_only, _ = refocus(ds.lf, RenderRequest(d_f=2.0, aperture=ApertureMask.center(3, 3)))
err = np.abs(center_only - ds.lf.view(1, 1)).max()
print(f"center-only aperture reproduces the central view exactly: max err = {err:.2e}")
print(f"figures in {OUT}")
