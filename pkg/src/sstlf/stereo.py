"""Per-view dense disparity for wide-baseline light fields.

Pipeline per horizontal view pair: census+NCC matching cost, cross-based
cost aggregation over color-grown support regions, 4-direction scanline
SGM, parabolic subpixel refinement, then a 5x5 median and an intensity-
gated bilateral filter. Per view, the pairwise map is verified against the
two views where its content reappears at p+d and p+2d, partitioned into
correct / mismatch / occlusion, and repaired by a linear reprojection
search (occlusions) or a 16-ray median of correct neighbors (mismatches).

Disparity convention matches the light-field model: a point at disparity d
seen at pixel u in view s sits at u + d*(s' - s) in view s'. A view's map
is computed against its s-1 neighbor, so matching compares V(p) with
neighbor(p - d) and the unreliable band is the left pixel margin.
"""

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import median_filter, uniform_filter


class StereoError(Exception):
    pass


class DegenerateRange(StereoError):
    pass


class GridTooSmall(StereoError):
    pass


class UnfillableRow(StereoError):
    pass


CORRECT, MISMATCH, OCCLUSION = 0, 1, 2

HOLE = np.nan  # disparity-map hole sentinel (PFM-native)


@dataclass
class StereoParams:
    """Tunables for the whole chain; defaults assume cost in [0, 1]."""

    alpha: float = 0.7        # census vs NCC blend
    census_win: tuple = (7, 9)
    ncc_win: int = 9
    p1: float = 1.0
    p2: float = 8.0
    tau_c: float = 0.03       # cross-aggregation color gate
    l_max: int = 17           # cross-aggregation max arm
    eps_i: float = 0.03       # bilateral intensity gate
    aggregate: bool = True

    def __post_init__(self):
        if self.p2 < self.p1 or self.p1 < 0:
            raise StereoError("need P2 >= P1 >= 0")


@dataclass
class CostVolume:
    """cost[v, u, i] for disparity hypothesis d_lo + i; lower is better."""

    cost: np.ndarray
    d_lo: int
    d_hi: int

    @property
    def levels(self):
        return self.d_hi - self.d_lo + 1


def to_gray(img):
    img = np.asarray(img, dtype=np.float32)
    return img if img.ndim == 2 else img.mean(axis=2)


def _shift_x(arr, d, fill=None):
    """out[v, u] = arr[v, u - d]; vacated columns take `fill` (default:
    edge replicate)."""
    if d == 0:
        return arr.copy()
    out = np.empty_like(arr)
    if d > 0:
        out[:, d:] = arr[:, :-d]
        out[:, :d] = arr[:, :1] if fill is None else fill
    else:
        out[:, :d] = arr[:, -d:]
        out[:, d:] = arr[:, -1:] if fill is None else fill
    return out


def census_transform(gray, win=(7, 9)):
    """Pack neighbor-less-than-center bits of a win[0] x win[1] window into
    one uint64 per pixel (borders use edge replication)."""
    ph, pw = win[0] // 2, win[1] // 2
    h, w = gray.shape
    padded = np.pad(gray, ((ph, ph), (pw, pw)), mode="edge")
    code = np.zeros((h, w), dtype=np.uint64)
    for dy in range(-ph, ph + 1):
        for dx in range(-pw, pw + 1):
            if dy == 0 and dx == 0:
                continue
            neigh = padded[ph + dy : ph + dy + h, pw + dx : pw + dx + w]
            code = (code << np.uint64(1)) | (neigh < gray).astype(np.uint64)
    return code


def matching_cost(left, right, d_range, params=None):
    """Cost volume between a rectified pair; left(p) vs right(p - d).

    cost = alpha * normalized census Hamming + (1 - alpha) * (1 - NCC)/2,
    both terms in [0, 1]. Undefined NCC (textureless window) contributes
    the neutral value 0.5; positions whose match falls outside the right
    image get the maximum cost 1.
    """
    params = params or StereoParams()
    d_lo, d_hi = int(d_range[0]), int(d_range[1])
    if d_hi <= d_lo:
        raise DegenerateRange(f"need d_hi > d_lo, got [{d_lo}, {d_hi}]")
    gl, gr = to_gray(left), to_gray(right)
    if gl.shape != gr.shape:
        raise StereoError("pair images differ in size")
    h, w = gl.shape
    if d_hi - d_lo >= w:
        raise DegenerateRange("disparity range wider than the image")

    bits = params.census_win[0] * params.census_win[1] - 1
    cl = census_transform(gl, params.census_win)
    cr = census_transform(gr, params.census_win)

    box = lambda a: uniform_filter(a, size=params.ncc_win, mode="nearest")
    gl64 = gl.astype(np.float64)
    mean_l = box(gl64)
    var_l = np.maximum(box(gl64 * gl64) - mean_l**2, 0.0)

    u = np.arange(w)
    cost = np.empty((h, w, d_hi - d_lo + 1), dtype=np.float32)
    for i, d in enumerate(range(d_lo, d_hi + 1)):
        census_cost = np.bitwise_count(cl ^ _shift_x(cr, d)).astype(np.float32) / bits

        rs = _shift_x(gr, d).astype(np.float64)
        mean_r = box(rs)
        var_r = np.maximum(box(rs * rs) - mean_r**2, 0.0)
        cov = box(gl64 * rs) - mean_l * mean_r
        defined = (var_l > 1e-10) & (var_r > 1e-10)
        with np.errstate(invalid="ignore", divide="ignore"):
            ncc = np.where(defined, cov / np.sqrt(var_l * var_r), 0.0)
        ncc_cost = np.clip((1.0 - ncc) / 2.0, 0.0, 1.0)

        plane = params.alpha * census_cost + (1 - params.alpha) * ncc_cost.astype(np.float32)
        plane[:, (u - d < 0) | (u - d > w - 1)] = 1.0
        cost[:, :, i] = plane
    return CostVolume(cost=cost, d_lo=d_lo, d_hi=d_hi)


# ---------------------------------------------------------------------------
# cross-based cost aggregation

def compute_arms(guide, tau_c=0.03, l_max=17):
    """Per-pixel cross arms (left, right, up, down): how far the support
    region extends while the guide color stays within tau_c of the anchor
    pixel. Arms never leave the image."""
    g = np.asarray(guide, dtype=np.float32)
    if g.ndim == 2:
        g = g[:, :, None]
    h, w = g.shape[:2]
    arms = np.zeros((h, w, 4), dtype=np.int32)
    for a, (dy, dx) in enumerate([(0, -1), (0, 1), (-1, 0), (1, 0)]):
        ok = np.ones((h, w), dtype=bool)
        for k in range(1, l_max + 1):
            oy, ox = dy * k, dx * k
            shifted = np.full_like(g, np.inf)
            ys = slice(max(0, -oy), min(h, h - oy))
            xs = slice(max(0, -ox), min(w, w - ox))
            yd = slice(max(0, oy), min(h, h + oy))
            xd = slice(max(0, ox), min(w, w + ox))
            shifted[ys, xs] = g[yd, xd]
            diff = np.abs(shifted - g).max(axis=2)
            ok &= diff <= tau_c
            arms[:, :, a] += ok
    return arms


def aggregate_cross(cv, guide, tau_c=0.03, l_max=17):
    """Average each cost over the cross-grown support region (horizontal
    pass inside the vertical arm), per disparity hypothesis."""
    arms = compute_arms(guide, tau_c, l_max)
    c = cv.cost.astype(np.float64)
    h, w, d = c.shape
    rows = np.arange(h)[:, None]
    cols = np.arange(w)[None, :]

    csum = np.concatenate([np.zeros((h, 1, d)), np.cumsum(c, axis=1)], axis=1)
    hsum = csum[rows, cols + arms[:, :, 1] + 1] - csum[rows, cols - arms[:, :, 0]]
    hcnt = (arms[:, :, 0] + arms[:, :, 1] + 1).astype(np.float64)

    vsum = np.concatenate([np.zeros((1, w, d)), np.cumsum(hsum, axis=0)], axis=0)
    vcnt = np.concatenate([np.zeros((1, w)), np.cumsum(hcnt, axis=0)], axis=0)
    total = vsum[rows + arms[:, :, 3] + 1, cols] - vsum[rows - arms[:, :, 2], cols]
    count = vcnt[rows + arms[:, :, 3] + 1, cols] - vcnt[rows - arms[:, :, 2], cols]
    return CostVolume(cost=(total / count[:, :, None]).astype(np.float32),
                      d_lo=cv.d_lo, d_hi=cv.d_hi)


# ---------------------------------------------------------------------------
# semi-global matching

def _scan(cost, axis, reverse, p1, p2):
    """One scanline DP pass of the smoothness energy along one direction."""
    c = np.moveaxis(cost, axis, 0)
    if reverse:
        c = c[::-1]
    n, m, d = c.shape
    out = np.empty((n, m, d), dtype=np.float32)
    out[0] = c[0]
    inf = np.float32(np.inf)
    for i in range(1, n):
        prev = out[i - 1]
        minprev = prev.min(axis=-1, keepdims=True)
        up = np.empty_like(prev)
        up[:, 1:] = prev[:, :-1]
        up[:, 0] = inf
        down = np.empty_like(prev)
        down[:, :-1] = prev[:, 1:]
        down[:, -1] = inf
        cand = np.minimum(np.minimum(prev, minprev + p2),
                          np.minimum(up, down) + p1)
        out[i] = c[i] + cand - minprev
    if reverse:
        out = out[::-1]
    return np.moveaxis(out, 0, axis)


def sgm_aggregate(cv, p1=1.0, p2=8.0):
    """Sum the DP passes over the two horizontal and two vertical
    directions; same shape as the input volume."""
    if not (p2 >= p1 >= 0):
        raise StereoError("need P2 >= P1 >= 0")
    acc = np.zeros_like(cv.cost, dtype=np.float32)
    for axis, reverse in ((1, False), (1, True), (0, False), (0, True)):
        acc += _scan(cv.cost, axis, reverse, np.float32(p1), np.float32(p2))
    return CostVolume(cost=acc, d_lo=cv.d_lo, d_hi=cv.d_hi)


def wta(cv):
    """Winner-take-all disparity; ties break toward the lower hypothesis."""
    return (cv.d_lo + np.argmin(cv.cost, axis=2)).astype(np.float32)


def sgm(cv, p1=1.0, p2=8.0):
    return wta(sgm_aggregate(cv, p1, p2))


def sgm_energy(cv, disp, p1, p2):
    """Smoothness energy of an integer disparity labeling: data term plus
    P1/P2 jump penalties over the 4-neighborhood (each pair counted twice,
    as in the per-pixel neighborhood sum)."""
    idx = np.clip(np.rint(disp).astype(np.intp) - cv.d_lo, 0, cv.levels - 1)
    data = np.take_along_axis(cv.cost, idx[:, :, None], axis=2)[:, :, 0].sum()
    smooth = 0.0
    d = np.rint(disp)
    for diff in (np.abs(d[:, 1:] - d[:, :-1]), np.abs(d[1:, :] - d[:-1, :])):
        smooth += 2 * (p1 * np.count_nonzero(diff == 1) + p2 * np.count_nonzero(diff > 1))
    return float(data + smooth)


def subpixel(cv, disp):
    """Parabola through the costs at (d-1, d, d+1); offset clamped to
    +-0.5 and skipped at the ends of the hypothesis range."""
    idx = np.rint(disp).astype(np.intp) - cv.d_lo
    interior = (idx >= 1) & (idx <= cv.levels - 2)
    ic = np.clip(idx, 1, cv.levels - 2)
    c0 = np.take_along_axis(cv.cost, (ic - 1)[:, :, None], axis=2)[:, :, 0].astype(np.float64)
    c1 = np.take_along_axis(cv.cost, ic[:, :, None], axis=2)[:, :, 0].astype(np.float64)
    c2 = np.take_along_axis(cv.cost, (ic + 1)[:, :, None], axis=2)[:, :, 0].astype(np.float64)
    denom = c0 - 2 * c1 + c2
    with np.errstate(invalid="ignore", divide="ignore"):
        offset = np.where(denom > 1e-12, (c0 - c2) / (2 * denom), 0.0)
    offset = np.clip(offset, -0.5, 0.5)
    offset[~interior] = 0.0
    return (disp + offset).astype(np.float32)


def refine_filters(disp, guide, eps_i=0.03, size=5):
    """5x5 median, then the intensity-gated bilateral average: neighbors
    enter only when the guide intensity differs by less than eps_i, each
    weighted by a unit Gaussian of its spatial distance."""
    if eps_i <= 0:
        raise StereoError("eps_i must be positive (the gate keeps the center pixel)")
    med = median_filter(disp.astype(np.float32), size=size, mode="nearest")
    gray = to_gray(guide).astype(np.float64)
    h, w = med.shape
    r = size // 2
    acc = np.zeros((h, w), dtype=np.float64)
    norm = np.zeros((h, w), dtype=np.float64)
    med64 = med.astype(np.float64)
    for dy in range(-r, r + 1):
        for dx in range(-r, r + 1):
            g = np.exp(-(dy * dy + dx * dx) / 2.0)
            ys = slice(max(0, -dy), min(h, h - dy))
            xs = slice(max(0, -dx), min(w, w - dx))
            yd = slice(max(0, dy), min(h, h + dy))
            xd = slice(max(0, dx), min(w, w + dx))
            gate = np.abs(gray[yd, xd] - gray[ys, xs]) < eps_i
            wgt = g * gate
            acc[ys, xs] += med64[yd, xd] * wgt
            norm[ys, xs] += wgt
    return (acc / norm).astype(np.float32)


# ---------------------------------------------------------------------------
# multi-view consistency and hole filling

def _lookup(dmap, shift):
    """dmap[v, round(u + shift[v, u])] plus an in-bounds mask."""
    h, w = dmap.shape
    tgt = np.rint(np.arange(w)[None, :] + shift).astype(np.intp)
    inb = (tgt >= 0) & (tgt < w)
    vals = dmap[np.arange(h)[:, None], np.clip(tgt, 0, w - 1)]
    return vals, inb


def consistency_label(d_r, d_l1, d_l2, d_range):
    """Three-way partition of the reference map.

    correct: the pixel's own disparity d reappears (within 1 px) at p+d in
    d_l1 or at p+2d in d_l2. mismatch: some other integer hypothesis would
    be consistent. occlusion: none is. d_l2 may be None (grids with only
    one usable neighbor), dropping its term.
    """
    d_lo, d_hi = int(d_range[0]), int(d_range[1])

    def consistent(d):
        v1, in1 = _lookup(d_l1, d)
        ok = in1 & (np.abs(d - v1) <= 1.0)
        if d_l2 is not None:
            v2, in2 = _lookup(d_l2, 2 * d)
            ok |= in2 & (np.abs(d - v2) <= 1.0)
        return ok

    labels = np.full(d_r.shape, OCCLUSION, dtype=np.uint8)
    labels[consistent(d_r)] = CORRECT
    any_other = np.zeros(d_r.shape, dtype=bool)
    for dd in range(d_lo, d_hi + 1):
        any_other |= consistent(np.full(d_r.shape, float(dd)))
    labels[(labels != CORRECT) & any_other] = MISMATCH
    return labels


def _reprojection_fill(d_l, require=None):
    """For every target column p, the disparity of the leftmost source
    pixel p' with round(p' - d_l(p')) == p (the linear right search, run
    for all rows at once). NaN where no source pixel maps to p."""
    h, w = d_l.shape
    tgt = np.rint(np.arange(w)[None, :] - d_l).astype(np.intp)
    ok = (tgt >= 0) & (tgt < w)
    if require is not None:
        ok &= require
    fill = np.full((h, w), np.nan, dtype=np.float32)
    for pp in range(w - 1, -1, -1):
        rows = np.nonzero(ok[:, pp])[0]
        fill[rows, tgt[rows, pp]] = d_l[rows, pp]
    return fill


_RAY_DIRS = [(0, 1), (0, -1), (1, 0), (-1, 0), (1, 1), (1, -1), (-1, 1), (-1, -1),
             (1, 2), (1, -2), (-1, 2), (-1, -2), (2, 1), (2, -1), (-2, 1), (-2, -1)]


def _nearest_correct_along(d_r, correct, dy, dx):
    """Disparity of the nearest correct pixel from each pixel along one ray
    direction (NaN when the ray exits the image first)."""
    h, w = d_r.shape
    out = np.where(correct, d_r, np.nan).astype(np.float32)
    if dy == 0:
        order = range(w - 2, -1, -1) if dx > 0 else range(1, w)
        for u in order:
            src = u + dx
            col = out[:, u]
            miss = np.isnan(col)
            col[miss] = out[miss, src]
        return out
    order = range(h - 1 - abs(dy), -1, -1) if dy > 0 else range(abs(dy), h)
    for v in order:
        src = out[v + dy]
        row = np.where(correct[v], d_r[v], _shift_x(src[None, :], -dx, fill=np.nan)[0])
        out[v] = row
    return out


def occlusion_fill(d_r, labels, d_l1, d_l2):
    """Repair mismatch and occlusion pixels; correct pixels are untouched.

    Occlusions first take the linear reprojection search into d_l1 (only
    source pixels that are themselves consistent with d_l2 qualify), then
    the same search into d_l2, then fall back to the mismatch strategy.
    Mismatches take the median of the nearest correct pixels along 16 rays.
    Rows without any correct pixel inherit from the nearest labeled row.
    """
    correct = labels == CORRECT
    if not correct.any():
        raise UnfillableRow("view has no correct pixels to fill from")
    out = d_r.astype(np.float32).copy()
    h, w = out.shape

    occl = labels == OCCLUSION
    if occl.any():
        if d_l2 is not None:
            v1, in1 = _lookup(d_l2, d_l1)  # verify d_l1 sources against d_l2
            verified = in1 & (np.abs(d_l1 - v1) <= 1.0)
        else:
            verified = None
        fill1 = _reprojection_fill(d_l1, require=verified)
        use = occl & ~np.isnan(fill1)
        out[use] = fill1[use]
        rest = occl & np.isnan(fill1)
        if rest.any() and d_l2 is not None:
            fill2 = _reprojection_fill(d_l2)
            use = rest & ~np.isnan(fill2)
            out[use] = fill2[use]
            rest &= np.isnan(fill2)
    else:
        rest = occl

    todo = (labels == MISMATCH) | rest
    if todo.any():
        rays = np.stack([_nearest_correct_along(d_r, correct, dy, dx)
                         for dy, dx in _RAY_DIRS])
        with np.errstate(all="ignore"):
            med = np.nanmedian(rays, axis=0)
        use = todo & ~np.isnan(med)
        out[use] = med[use]
        todo &= np.isnan(med)

    if todo.any():
        # ray-less leftovers: nearest correct in the row, else nearest row
        row_has = correct.any(axis=1)
        for v in np.nonzero(todo.any(axis=1))[0]:
            if row_has[v]:
                cols = np.nonzero(correct[v])[0]
                for u in np.nonzero(todo[v])[0]:
                    out[v, u] = d_r[v, cols[np.argmin(np.abs(cols - u))]]
            else:
                good = np.nonzero(row_has)[0]
                vs = good[np.argmin(np.abs(good - v))]
                cols = np.nonzero(correct[vs])[0]
                for u in np.nonzero(todo[v])[0]:
                    out[v, u] = d_r[vs, cols[np.argmin(np.abs(cols - u))]]
    return out


# ---------------------------------------------------------------------------
# light-field orchestration

def pair_disparity(ref, other, d_range, params=None):
    """Full single-pair chain; `other` is the view where the content of
    `ref` appears at p - d."""
    params = params or StereoParams()
    cv = matching_cost(ref, other, d_range, params)
    if params.aggregate:
        cv = aggregate_cross(cv, ref, params.tau_c, params.l_max)
    agg = sgm_aggregate(cv, params.p1, params.p2)
    disp = subpixel(agg, wta(agg))
    return refine_filters(disp, ref, params.eps_i)


def lf_disparity(lf, params=None, d_range=None):
    """Per-view disparity maps for the whole grid.

    Each view is matched against its s-1 neighbor (s=0 mirrored), verified
    against the s+1/s+2 maps (the two rightmost views mirrored), its
    unreliable pixel margin forced to occlusion, and filled. Returns
    {(s, t): float32 map}; maps contain no holes.
    """
    params = params or StereoParams()
    cols, rows = lf.grid_cols, lf.grid_rows
    if cols < 3:
        raise GridTooSmall("need at least 3 grid columns for consistency checks")
    if d_range is None:
        lo, hi = lf.disparity_range
        d_range = (int(np.floor(lo)), int(np.ceil(hi)))
    d_hi = int(d_range[1])

    out = {}
    for t in range(rows):
        raw = {}
        for s in range(cols):
            if s >= 1:
                raw[s] = pair_disparity(lf.view(s, t), lf.view(s - 1, t), d_range, params)
            else:
                dm = pair_disparity(lf.view(0, t)[:, ::-1], lf.view(1, t)[:, ::-1],
                                    d_range, params)
                raw[0] = dm[:, ::-1]

        margin = min(d_hi, lf.width - 1)
        for s in range(cols):
            if s + 2 < cols:
                d_r, d_l1, d_l2 = raw[s], raw[s + 1], raw[s + 2]
                flip = False
            elif s - 2 >= 0:
                d_r = raw[s][:, ::-1]
                d_l1 = raw[s - 1][:, ::-1]
                d_l2 = raw[s - 2][:, ::-1]
                flip = True
            else:
                # middle view of a 3-column grid: one usable neighbor
                d_r, d_l1, d_l2 = raw[s], raw[s + 1], None
                flip = False
            labels = consistency_label(d_r, d_l1, d_l2, d_range)
            # force the pair-matching blind margin: left margin for views
            # matched against s-1, right margin for the mirrored view s=0 —
            # expressed in the (possibly flipped) consistency frame
            if margin > 0:
                if (s == 0) == flip:
                    labels[:, :margin] = OCCLUSION
                else:
                    labels[:, -margin:] = OCCLUSION
            filled = occlusion_fill(d_r, labels, d_l1, d_l2)
            out[(s, t)] = filled[:, ::-1].copy() if flip else filled
    return out
