"""Semantic label ingestion: probability volumes, entropy, HCSM.

The package never runs a segmentation network; it consumes per-view label
probability volumes written by any external segmenter (or by the synthetic
oracle) and turns them into MAP label maps plus a high-confidence semantic
map (HCSM) gated by label-distribution entropy. The entropy threshold is
picked by maximizing Score = Acc^m * Cvg against one hand-labeled view.
"""

import colorsys
import glob
import json
import os
import re
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .pfm import read_pfm, write_pfm


class SemanticsError(Exception):
    pass


class NoForegroundPixels(SemanticsError):
    pass


BACKGROUND = 0  # class index reserved for "background / unlabeled"


def as_prob_volume(probs):
    """Validate a (H, W, C) probability volume: rows sum to 1, C >= 2."""
    vol = np.asarray(probs, dtype=np.float32)
    if vol.ndim != 3 or vol.shape[2] < 2:
        raise SemanticsError(f"expected (H, W, C>=2) volume, got {vol.shape}")
    if np.any(vol < 0):
        raise SemanticsError("negative probabilities")
    sums = vol.sum(axis=2)
    if np.any(np.abs(sums - 1.0) > 1e-5):
        raise SemanticsError("per-pixel probabilities must sum to 1")
    return vol


def entropy_map(vol):
    """Per-pixel entropy H = -sum p log p in nats, with 0 log 0 = 0."""
    vol = as_prob_volume(vol)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(vol > 0, vol * np.log(vol), 0.0)
    return np.maximum(-terms.sum(axis=2), 0.0).astype(np.float32)


def map_labels(vol):
    """MAP label per pixel; argmax ties break toward the lowest class index."""
    vol = as_prob_volume(vol)
    return np.argmax(vol, axis=2).astype(np.int32)


@dataclass
class ConfidenceMask:
    """HCSM: per-pixel entropy, the confident set H < epsilon_h, and the
    threshold that produced it."""

    entropy: np.ndarray
    confident: np.ndarray
    epsilon_h: float


def hcsm_filter(vol, labels, epsilon_h):
    """Keep only pixels whose label distribution is confidently peaked."""
    ent = entropy_map(vol)
    num_classes = vol.shape[2]
    if not 0 < epsilon_h <= np.log(num_classes) + 1e-9:
        raise SemanticsError(f"epsilon_h {epsilon_h} outside (0, ln C]")
    return ConfidenceMask(entropy=ent, confident=ent < epsilon_h, epsilon_h=float(epsilon_h))


def accuracy_coverage(pred, gt, confident):
    """Precision/recall of the confident foreground labeling vs ground truth.

    Background pixels never count: TP are confident foreground predictions
    that match gt, FP confident foreground predictions that do not, and
    coverage divides by all foreground gt pixels.
    """
    sel = confident & (pred != BACKGROUND)
    tp = int(np.count_nonzero(sel & (pred == gt)))
    fp = int(np.count_nonzero(sel & (pred != gt)))
    fg = int(np.count_nonzero(gt != BACKGROUND))
    acc = tp / (tp + fp) if tp + fp else 0.0
    cvg = tp / fg if fg else 0.0
    return acc, cvg


def score_threshold(vol, labels, gt_view, m=4.0):
    """Sweep epsilon_h over the observed entropy values (plus ln C) and keep
    the one maximizing Score = Acc^m * Cvg against the labeled view.

    Returns (epsilon_h, acc, cvg, score). Ties go to the larger threshold,
    i.e. more coverage at equal score.
    """
    vol = as_prob_volume(vol)
    gt = np.asarray(gt_view)
    if gt.shape != labels.shape:
        raise SemanticsError("ground-truth view shape mismatch")
    if not np.any(gt != BACKGROUND):
        raise NoForegroundPixels("ground truth contains only background")
    if m <= 0:
        raise SemanticsError("score exponent m must be positive")

    ent = entropy_map(vol)
    candidates = np.unique(ent)
    ln_c = float(np.log(vol.shape[2]))
    candidates = np.unique(np.append(candidates, ln_c))
    candidates = candidates[candidates > 0]

    best = (0.0, ln_c, 0.0, 0.0)  # score, eps, acc, cvg
    for eps in candidates:
        acc, cvg = accuracy_coverage(labels, gt, ent < eps)
        score = acc**m * cvg
        if score >= best[0]:
            best = (score, float(eps), acc, cvg)
    score, eps, acc, cvg = best
    return eps, acc, cvg, score


# ---------------------------------------------------------------------------
# file formats

_PROB_RE = re.compile(r"probs_(\d+)_(\d+)_(\d+)\.pfm$")


def save_prob_volume(directory, view, vol):
    """One grayscale PFM per class: probs_<view>_<class>.pfm."""
    vol = as_prob_volume(vol)
    for c in range(vol.shape[2]):
        write_pfm(os.path.join(directory, f"probs_{view}_{c}.pfm"), vol[:, :, c])


def load_prob_volume(directory, view):
    paths = sorted(glob.glob(os.path.join(directory, f"probs_{view}_*.pfm")),
                   key=lambda p: int(p.rsplit("_", 1)[1].split(".")[0]))
    if not paths:
        raise SemanticsError(f"no probability maps for view {view} in {directory}")
    planes = [read_pfm(p) for p in paths]
    return as_prob_volume(np.stack(planes, axis=2))


def list_prob_views(directory):
    """(s, t) pairs that have at least one probability plane on disk."""
    views = set()
    for p in glob.glob(os.path.join(directory, "probs_*_*_*.pfm")):
        match = _PROB_RE.search(os.path.basename(p))
        if match:
            views.add((int(match.group(1)), int(match.group(2))))
    return sorted(views)


def load_classes(directory):
    with open(os.path.join(directory, "classes.json")) as f:
        meta = json.load(f)
    return list(meta["classes"])


def class_color(index):
    """Deterministic display color for a class index (0 stays black)."""
    if index == BACKGROUND:
        return (0, 0, 0)
    hue = (index * 0.61803398875) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.65, 0.95)
    return (int(r * 255), int(g * 255), int(b * 255))


def save_semantic_map(path, labels):
    """8-bit indexed PNG; the embedded palette carries display colors."""
    lab = np.asarray(labels)
    if lab.min() < 0 or lab.max() > 255:
        raise SemanticsError("label indices must fit in 8 bits")
    img = Image.fromarray(lab.astype(np.uint8), mode="P")
    palette = []
    for i in range(256):
        palette.extend(class_color(i))
    img.putpalette(palette)
    img.save(path)


def load_semantic_map(path):
    img = Image.open(path)
    if img.mode not in ("P", "L"):
        raise SemanticsError(f"{path}: expected indexed PNG, got mode {img.mode}")
    return np.asarray(img, dtype=np.int32)


def save_palette(path, classes):
    """JSON sidecar mapping class index -> class name."""
    with open(path, "w") as f:
        json.dump({str(i): name for i, name in enumerate(classes)}, f, indent=2)


def load_palette(path):
    with open(path) as f:
        raw = json.load(f)
    classes = [""] * (max(int(k) for k in raw) + 1)
    for k, name in raw.items():
        classes[int(k)] = name
    return classes
