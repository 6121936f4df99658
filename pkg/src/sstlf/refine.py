"""Disparity-guided semantic refinement.

Low-confidence pixels inherit labels from per-label disparity Gaussians
fitted over the confident set. Where several labels claim the same
disparity (the ground-plane problem: a table top sweeps through every
object's depth), the conflict is settled by distance to the labels'
confident regions plus, when a ground-like label is involved, agreement
between the pixel's surface normal and the regions' normals.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate, distance_transform_edt

from .semantics import BACKGROUND


class RefineError(Exception):
    pass


class NoConfidentPixels(RefineError):
    pass


class EmptyRegion(RefineError):
    pass


GROUND_NAMES = ("ground", "floor", "table")


@dataclass
class RefineParams:
    eps_d: float = 0.1        # peak-normalized density threshold
    sigma_min: float = 0.25   # disparity-spread floor (px)
    min_support: int = 50     # confident pixels needed to fit a label
    p_n: float = 1.0
    p_d: float = 1.0
    tau: float = 0.5          # normal-consistency saturation
    ground_names: tuple = GROUND_NAMES
    use_normals: bool = True


@dataclass
class LabelDepthModel:
    """Per-label disparity Gaussians g_i(d); labels below the support
    threshold are excluded."""

    mu: dict = field(default_factory=dict)
    sigma: dict = field(default_factory=dict)
    count: dict = field(default_factory=dict)

    @property
    def labels(self):
        return sorted(self.mu)

    def density(self, label, d):
        """Peak-normalized density, max 1 at d = mu."""
        mu, sig = self.mu[label], self.sigma[label]
        return np.exp(-((np.asarray(d, dtype=np.float64) - mu) ** 2) / (2 * sig**2))


def _confident(hcsm):
    return hcsm.confident if hasattr(hcsm, "confident") else np.asarray(hcsm, dtype=bool)


def fit_models(hcsm, semmap, dmap, sigma_min=0.25, min_support=50):
    """Sample mean / population stddev of disparity per non-background
    label over the confident pixels. Accepts single maps or parallel lists
    of maps (pooled fit across views)."""
    if isinstance(semmap, (list, tuple)):
        triples = list(zip(hcsm, semmap, dmap))
    else:
        triples = [(hcsm, semmap, dmap)]

    samples = {}
    for h, sm, dm in triples:
        conf = _confident(h)
        sm = np.asarray(sm)
        dm = np.asarray(dm)
        for label in np.unique(sm[conf]):
            if label == BACKGROUND:
                continue
            d = dm[conf & (sm == label)]
            samples.setdefault(int(label), []).append(d)

    model = LabelDepthModel()
    for label, chunks in sorted(samples.items()):
        d = np.concatenate(chunks)
        if d.size < min_support:
            continue
        model.mu[label] = float(d.mean())
        model.sigma[label] = float(max(d.std(), sigma_min))
        model.count[label] = int(d.size)
    if not model.mu:
        raise NoConfidentPixels("no label reached the confident-support threshold")
    return model


@dataclass
class ConflictSet:
    """Pixels claimed by two or more labels: (v, u) rows plus the claimant
    label list per pixel."""

    pixels: np.ndarray                      # (N, 2) int
    candidates: list = field(default_factory=list)  # N tuples of labels

    def __len__(self):
        return len(self.candidates)


def assign_by_disparity(model, dmap, hcsm, semmap, eps_d=0.1):
    """Fill non-confident pixels from the disparity Gaussians.

    A pixel takes label i when g_i(d) > eps_d is unique; with no claimant
    it stays background/unlabeled, with several it lands in the returned
    ConflictSet. Confident pixels are never altered.
    """
    if eps_d <= 0:
        raise RefineError("eps_d must be positive")
    conf = _confident(hcsm)
    dmap = np.asarray(dmap, dtype=np.float64)
    out = np.where(conf, np.asarray(semmap), BACKGROUND).astype(np.int32)

    labels = model.labels
    dens = np.stack([model.density(lb, dmap) for lb in labels])  # (L, H, W)
    claims = dens > eps_d
    claims[:, conf] = False
    nclaims = claims.sum(axis=0)

    single = nclaims == 1
    if single.any():
        winner = np.argmax(claims, axis=0)
        out[single] = np.asarray(labels, dtype=np.int32)[winner[single]]

    multi = np.argwhere(nclaims >= 2)
    cands = []
    for v, u in multi:
        cands.append(tuple(lb for k, lb in enumerate(labels) if claims[k, v, u]))
    return out, ConflictSet(pixels=multi, candidates=cands)


def compute_normals(dmap, window=5):
    """Unit normals (du, dv, -1)/|.| of the disparity surface; gradients
    from a least-squares plane fit over a window (noise robust)."""
    d = np.asarray(dmap, dtype=np.float64)
    if np.isnan(d).any():
        raise RefineError("disparity map must be hole-free for normals")
    r = window // 2
    offs = np.arange(-r, r + 1, dtype=np.float64)
    ku = np.tile(offs, (window, 1))
    ku /= (ku**2).sum()
    kv = ku.T.copy()
    gu = correlate(d, ku, mode="nearest")
    gv = correlate(d, kv, mode="nearest")
    n = np.stack([gu, gv, -np.ones_like(gu)], axis=-1)
    return n / np.linalg.norm(n, axis=-1, keepdims=True)


def normal_consistency(m, region_normals, tau=0.5):
    """Saturating alignment score in [0, 1): mean cosine similarity of m
    against the region, mapped through x / (x + tau) with negative
    alignment clamped to zero."""
    mean_n = region_normals.reshape(-1, 3).mean(axis=0)
    x = np.maximum(np.asarray(m) @ mean_n, 0.0)
    return x / (x + tau)


def _distance_consistency(pixels, region_mask):
    """min/max squared-distance ratio from each pixel to the region; close
    to 0 next to the region, toward 1 at its far side."""
    coords = np.argwhere(region_mask)
    if coords.size == 0:
        raise EmptyRegion("conflict candidate has an empty confident region")
    dmin = distance_transform_edt(~region_mask)[pixels[:, 0], pixels[:, 1]]
    diff = pixels[:, None, :].astype(np.float64) - coords[None, :, :]
    dmax = np.sqrt((diff**2).sum(axis=2)).max(axis=1)
    dmax = np.maximum(dmax, 1e-9)
    return (dmin / dmax) ** 2


def resolve_conflicts(conflicts, regions, normals, dmap, model, params=None,
                      ground_labels=()):
    """Choose one label per conflict pixel by minimizing
    E = p_d * E_d - p_n * E_n; the normal term enters only when a ground
    label is among the candidates (and normals are enabled). Exact energy
    ties fall back to the higher disparity-Gaussian density, then the
    lower label index. Returns the chosen label per conflict pixel."""
    params = params or RefineParams()
    if len(conflicts) == 0:
        return np.zeros(0, dtype=np.int32)
    pixels = conflicts.pixels
    dvals = np.asarray(dmap, dtype=np.float64)[pixels[:, 0], pixels[:, 1]]
    mvecs = normals[pixels[:, 0], pixels[:, 1]] if normals is not None else None

    involved = sorted({lb for cand in conflicts.candidates for lb in cand})
    e_d, c_n, dens = {}, {}, {}
    for lb in involved:
        if lb not in regions or not regions[lb].any():
            raise EmptyRegion(f"label {lb} has no confident region")
        e_d[lb] = _distance_consistency(pixels, regions[lb])
        if mvecs is not None:
            c_n[lb] = normal_consistency(mvecs, normals[regions[lb]], params.tau)
        dens[lb] = model.density(lb, dvals)

    choice = np.zeros(len(conflicts), dtype=np.int32)
    for i, cand in enumerate(conflicts.candidates):
        gate = params.use_normals and mvecs is not None and \
            any(lb in ground_labels for lb in cand)
        best = None
        for lb in cand:
            e = params.p_d * e_d[lb][i]
            if gate:
                e -= params.p_n * c_n[lb][i]
            key = (e, -dens[lb][i], lb)
            if best is None or key < best[0]:
                best = (key, lb)
        choice[i] = best[1]
    return choice


def ground_label_indices(classes, ground_names=GROUND_NAMES):
    names = {n.lower() for n in ground_names}
    return tuple(i for i, name in enumerate(classes) if name.lower() in names)


def refine_labels(hcsm, semmap, dmap, classes=None, params=None, model=None):
    """Full refinement for one view: fit (unless a pooled model is given),
    assign by disparity, then resolve conflicts. Returns the refined map;
    confident pixels pass through untouched."""
    params = params or RefineParams()
    if model is None:
        model = fit_models(hcsm, semmap, dmap, params.sigma_min, params.min_support)
    out, conflicts = assign_by_disparity(model, dmap, hcsm, semmap, params.eps_d)
    if len(conflicts):
        conf = _confident(hcsm)
        sm = np.asarray(semmap)
        regions = {lb: conf & (sm == lb) for lb in model.labels}
        normals = compute_normals(dmap) if params.use_normals else None
        ground = ground_label_indices(classes, params.ground_names) if classes else ()
        choice = resolve_conflicts(conflicts, regions, normals, dmap, model,
                                   params, ground_labels=ground)
        out[conflicts.pixels[:, 0], conflicts.pixels[:, 1]] = choice
    return out
