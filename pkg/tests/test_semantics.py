import numpy as np
import pytest

from sstlf.semantics import (
    BACKGROUND,
    NoForegroundPixels,
    SemanticsError,
    accuracy_coverage,
    as_prob_volume,
    entropy_map,
    hcsm_filter,
    load_palette,
    load_prob_volume,
    load_semantic_map,
    map_labels,
    save_palette,
    save_prob_volume,
    save_semantic_map,
    score_threshold,
)


def _random_volume(rng, h, w, c):
    logits = rng.standard_normal((h, w, c))
    e = np.exp(logits * 3.0)
    return (e / e.sum(axis=2, keepdims=True)).astype(np.float32)


# --- entropy -----------------------------------------------------------------

def test_entropy_one_hot_is_zero():
    vol = np.zeros((2, 2, 4), dtype=np.float32)
    vol[..., 2] = 1.0
    assert np.all(entropy_map(vol) == 0.0)


def test_entropy_uniform_is_ln_c():
    for c in (2, 3, 7):
        vol = np.full((3, 3, c), 1.0 / c, dtype=np.float32)
        assert np.abs(entropy_map(vol) - np.log(c)).max() < 1e-6


def test_entropy_half_half():
    vol = np.array([[[0.5, 0.5]]], dtype=np.float32)
    assert abs(float(entropy_map(vol)[0, 0]) - np.log(2)) < 1e-7


def test_entropy_bounds_fuzzed(rng):
    # 10^5 pixels of random distributions stay inside [0, ln C]
    vol = _random_volume(rng, 250, 400, 5)
    ent = entropy_map(vol)
    assert ent.size == 100_000
    assert ent.min() >= 0.0
    assert ent.max() <= np.log(5) + 1e-6


# --- MAP labels --------------------------------------------------------------

def test_map_labels_argmax():
    vol = np.array([[[0.1, 0.7, 0.2]]], dtype=np.float32)
    assert int(map_labels(vol)[0, 0]) == 1


def test_map_labels_tie_breaks_low_index():
    vol = np.array([[[0.5, 0.5]]], dtype=np.float32)
    assert int(map_labels(vol)[0, 0]) == 0


def test_map_labels_constant_one_hot():
    vol = np.zeros((4, 6, 3), dtype=np.float32)
    vol[..., 2] = 1.0
    assert np.all(map_labels(vol) == 2)


def test_map_labels_invariant_under_rescaling(rng):
    vol = _random_volume(rng, 20, 30, 4)
    base = map_labels(vol)
    scaled = as_prob_volume((vol * 7.0) / (vol * 7.0).sum(axis=2, keepdims=True))
    assert np.array_equal(map_labels(scaled), base)


def test_prob_volume_validation():
    with pytest.raises(SemanticsError):
        as_prob_volume(np.full((2, 2, 3), 0.5, dtype=np.float32))
    with pytest.raises(SemanticsError):
        as_prob_volume(np.ones((2, 2, 1), dtype=np.float32))


# --- HCSM / score sweep ------------------------------------------------------

def test_hcsm_all_confident_at_max_epsilon(rng):
    vol = _random_volume(rng, 10, 10, 3)
    mask = hcsm_filter(vol, map_labels(vol), np.log(3))
    # strictly-below ln C everywhere except exactly-uniform pixels
    assert mask.confident.sum() == np.count_nonzero(mask.entropy < np.log(3))


def test_hcsm_epsilon_near_zero_keeps_only_one_hot():
    vol = np.zeros((2, 2, 3), dtype=np.float32)
    vol[0, 0, 1] = 1.0
    vol[0, 1] = [0.9, 0.1, 0.0]
    vol[1, 0] = [1.0, 0.0, 0.0]
    vol[1, 1] = [1 / 3, 1 / 3, 1 / 3]
    mask = hcsm_filter(vol, map_labels(vol), 1e-9)
    assert mask.confident.tolist() == [[True, False], [True, False]]


def test_hcsm_coverage_counting_oracle(rng):
    vol = _random_volume(rng, 40, 40, 4)
    ent = entropy_map(vol)
    eps = float(np.median(ent))
    mask = hcsm_filter(vol, map_labels(vol), eps)
    assert mask.confident.sum() == int((ent < eps).sum())


def test_coverage_monotone_in_epsilon(rng):
    vol = _random_volume(rng, 30, 30, 3)
    ent = entropy_map(vol)
    sizes = [int((ent < e).sum()) for e in np.sort(np.unique(ent))]
    assert all(b >= a for a, b in zip(sizes, sizes[1:]))


def test_score_formula_example():
    # Acc=0.9, Cvg=0.5, m=4 -> 0.9^4 * 0.5
    assert abs(0.9**4 * 0.5 - 0.32805) < 1e-12


def test_perfect_predictions_score_one(rng):
    labels_gt = rng.integers(0, 3, size=(20, 20)).astype(np.int32)
    labels_gt[0, 0] = 1  # ensure some foreground
    vol = np.zeros((20, 20, 3), dtype=np.float32)
    np.put_along_axis(vol, labels_gt[..., None], 1.0, axis=2)
    eps, acc, cvg, score = score_threshold(vol, map_labels(vol), labels_gt, m=4.0)
    assert acc == 1.0 and cvg == 1.0 and score == 1.0
    assert abs(eps - np.log(3)) < 1e-12


def test_score_sweep_matches_bruteforce(rng):
    """Independent oracle: evaluate Score at every distinct entropy (plus
    ln C) directly and compare the maximum."""
    vol = _random_volume(rng, 32, 32, 4)
    # ground truth partially disagrees with the MAP labels
    gt = map_labels(vol).copy()
    flip = rng.random(gt.shape) < 0.3
    gt[flip] = rng.integers(0, 4, size=int(flip.sum()))
    m = 4.0

    pred = map_labels(vol)
    ent = entropy_map(vol)
    best_score, best_eps = 0.0, float(np.log(4))
    for eps in np.append(np.unique(ent), np.log(4)):
        if eps <= 0:
            continue
        acc, cvg = accuracy_coverage(pred, gt, ent < eps)
        score = acc**m * cvg
        if score >= best_score:
            best_score, best_eps = float(score), float(eps)

    eps, acc, cvg, score = score_threshold(vol, pred, gt, m=m)
    assert abs(score - best_score) < 1e-12
    assert abs(eps - best_eps) < 1e-12


def test_score_threshold_requires_foreground():
    vol = np.zeros((4, 4, 3), dtype=np.float32)
    vol[..., 0] = 1.0
    gt = np.zeros((4, 4), dtype=np.int32)
    with pytest.raises(NoForegroundPixels):
        score_threshold(vol, map_labels(vol), gt)


def test_accuracy_coverage_excludes_background():
    pred = np.array([[1, 0], [2, 1]], dtype=np.int32)
    gt = np.array([[1, 2], [2, 2]], dtype=np.int32)
    conf = np.ones((2, 2), dtype=bool)
    acc, cvg = accuracy_coverage(pred, gt, conf)
    # predictions: (1,ok) (0,bg skipped) (2,ok) (1,wrong): TP=2 FP=1
    assert abs(acc - 2 / 3) < 1e-12
    # foreground gt pixels: 4 -> Cvg = 2/4
    assert abs(cvg - 0.5) < 1e-12


# --- file formats ------------------------------------------------------------

def test_prob_volume_roundtrip(tmp_path, rng):
    vol = _random_volume(rng, 8, 9, 3)
    save_prob_volume(tmp_path, "1_2", vol)
    back = load_prob_volume(tmp_path, "1_2")
    assert np.allclose(back, vol, atol=1e-6)


def test_semantic_map_roundtrip(tmp_path, rng):
    labels = rng.integers(0, 5, size=(16, 12)).astype(np.int32)
    path = tmp_path / "sem.png"
    save_semantic_map(path, labels)
    assert np.array_equal(load_semantic_map(str(path)), labels)


def test_palette_roundtrip(tmp_path):
    classes = ["background", "bush", "person"]
    path = tmp_path / "palette.json"
    save_palette(path, classes)
    assert load_palette(str(path)) == classes
    assert BACKGROUND == 0
