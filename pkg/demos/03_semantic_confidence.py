#!/usr/bin/env python3
"""From soft label maps to a high-confidence semantic map.

Takes noisy label-probability volumes (as an external segmenter would
produce), computes per-pixel entropy, and sweeps the confidence threshold.
The kept threshold maximizes Score = Acc^4 * Cvg against one labeled view:
low thresholds keep only the most certain pixels (high accuracy, low
coverage), high thresholds keep everything.
"""

import os

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from sstlf import Layer, SceneSpec, render_scene
from sstlf.semantics import (
    accuracy_coverage,
    entropy_map,
    hcsm_filter,
    map_labels,
    score_threshold,
)

OUT = os.path.join(os.path.dirname(__file__), "out", "03_semantics")
os.makedirs(OUT, exist_ok=True)

spec = SceneSpec(
    width=224, height=160, grid_rows=3, grid_cols=3,
    classes=["background", "wall", "bush"],
    layers=[
        Layer(label=1, disparity=3.0),
        Layer(label=2, disparity=8.0, mask_coverage=0.35, texture_seed=2),
    ],
    prob_temperature=0.35, label_noise=0.08, seed=13,
)
ds = render_scene(spec)
vol = ds.probs[(1, 1)]
gt = ds.labels[(1, 1)]

pred = map_labels(vol)
ent = entropy_map(vol)
eps, acc, cvg, score = score_threshold(vol, pred, gt, m=4.0)
print(f"chosen epsilon_H = {eps:.4f} nats  (acc {acc:.3f}, cvg {cvg:.3f}, "
      f"score {score:.4f})")

# trace the whole sweep for the plot
sweep = []
for e in np.linspace(1e-4, np.log(3), 200):
    a, c = accuracy_coverage(pred, gt, ent < e)
    sweep.append((e, a, c, a**4 * c))
sweep = np.array(sweep)

mask = hcsm_filter(vol, pred, eps)
kept = np.where(mask.confident, pred, -1)

fig, axes = plt.subplots(2, 2, figsize=(11, 7))
axes[0, 0].imshow(ent, cmap="magma")
axes[0, 0].set_title("label-distribution entropy")
axes[0, 1].imshow(np.ma.masked_equal(kept, -1), cmap="tab10", vmin=0, vmax=9)
axes[0, 1].set_title(f"HCSM ({100 * mask.confident.mean():.0f}% kept)")
axes[1, 0].imshow(pred, cmap="tab10", vmin=0, vmax=9)
axes[1, 0].set_title("raw MAP labels")
axes[1, 1].plot(sweep[:, 0], sweep[:, 1], label="accuracy")
axes[1, 1].plot(sweep[:, 0], sweep[:, 2], label="coverage")
axes[1, 1].plot(sweep[:, 0], sweep[:, 3], label="score = acc$^4$ cvg")
axes[1, 1].axvline(eps, ls="--", c="k", lw=1)
axes[1, 1].set_xlabel("entropy threshold (nats)")
axes[1, 1].legend()
for ax in axes.flat[:3]:
    ax.axis("off")
fig.tight_layout()
fig.savefig(os.path.join(OUT, "hcsm.png"), dpi=110)
print(f"figures in {OUT}")
