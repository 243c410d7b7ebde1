from fractions import Fraction

import numpy as np
import pytest

from streetscape.errors import DimensionMismatchError, ValidationError
from streetscape.mask import IGNORE, LabelMask
from streetscape.metrics import ConfusionMatrix, evaluate_pairs


def brute_force_iou(pred, truth, classes):
    """Set-based oracle: |{pred=c} ∩ {truth=c}| / |{pred=c} ∪ {truth=c}| over
    non-ignored pixels, as exact rationals."""
    out = {}
    keep = (pred.data != IGNORE) & (truth.data != IGNORE)
    for c in classes:
        p = (pred.data == c) & keep
        t = (truth.data == c) & keep
        union = int((p | t).sum())
        inter = int((p & t).sum())
        out[c] = Fraction(inter, union) if union else None
    return out


def cm_iou_fractions(cm):
    tp = np.diag(cm.counts)
    fp = cm.counts.sum(axis=0) - tp
    fn = cm.counts.sum(axis=1) - tp
    return {
        c: (Fraction(int(tp[i]), int(tp[i] + fp[i] + fn[i]))
            if tp[i] + fp[i] + fn[i] > 0 else None)
        for i, c in enumerate(cm.classes)
    }


def test_perfect_prediction_is_diagonal(rng):
    truth = LabelMask(rng.choice(np.array([0, 2], np.uint8), size=(4, 4)))
    cm = ConfusionMatrix([0, 2]).accumulate(truth, truth)
    assert cm.counts.sum() == 16
    assert (cm.counts == np.diag(np.diag(cm.counts))).all()
    assert all(v == 1.0 for v in cm.iou_per_class().values() if v is not None)


def test_all_ignore_truth_leaves_cm_unchanged(rng):
    pred = LabelMask(rng.choice(np.array([0, 1], np.uint8), size=(5, 5)))
    truth = LabelMask(np.full((5, 5), IGNORE, np.uint8))
    cm = ConfusionMatrix([0, 1]).accumulate(pred, truth)
    assert cm.counts.sum() == 0


def test_ignore_in_pred_also_excluded(rng):
    pred = LabelMask(np.array([[IGNORE, 0]], np.uint8))
    truth = LabelMask(np.array([[0, 0]], np.uint8))
    cm = ConfusionMatrix([0]).accumulate(pred, truth)
    assert cm.counts.sum() == 1


def test_accumulate_matches_double_loop(rng):
    classes = [0, 1, 2]
    pred = LabelMask(rng.choice(np.array(classes + [IGNORE], np.uint8), size=(32, 32)))
    truth = LabelMask(rng.choice(np.array(classes + [IGNORE], np.uint8), size=(32, 32)))
    cm = ConfusionMatrix(classes).accumulate(pred, truth)
    expected = np.zeros((3, 3), dtype=np.int64)
    for i in range(32):
        for j in range(32):
            t, p = int(truth.data[i, j]), int(pred.data[i, j])
            if t != IGNORE and p != IGNORE:
                expected[t][p] += 1
    assert (cm.counts == expected).all()


def test_accumulate_errors():
    with pytest.raises(DimensionMismatchError):
        ConfusionMatrix([0, 1]).accumulate(
            LabelMask(np.zeros((2, 2), np.uint8)), LabelMask(np.zeros((3, 2), np.uint8))
        )
    with pytest.raises(ValidationError, match="7"):
        ConfusionMatrix([0, 1]).accumulate(
            LabelMask(np.full((2, 2), 7, np.uint8)), LabelMask(np.zeros((2, 2), np.uint8))
        )


def test_iou_hand_computed():
    counts = np.array([[3, 2], [1, 0]])  # class 0: TP=3, FN=2, FP=1
    cm = ConfusionMatrix([0, 1], counts)
    assert cm.iou_per_class()[0] == pytest.approx(3 / 6)


def test_iou_zero_intersection():
    counts = np.array([[0, 5], [5, 0]])
    cm = ConfusionMatrix([0, 1], counts)
    assert cm.iou_per_class()[0] == 0.0


def test_mean_iou_rules():
    counts = np.array([[4, 0, 0], [4, 0, 0], [0, 0, 0]])
    cm = ConfusionMatrix([0, 1, 2], counts)
    per = cm.iou_per_class()
    assert per[0] == 0.5 and per[1] == 0.0 and per[2] is None
    assert cm.mean_iou() == pytest.approx(0.25)  # undefined class excluded
    assert cm.mean_iou([0]) == pytest.approx(0.5)
    with pytest.raises(ValidationError):
        cm.mean_iou([9])


def test_mean_iou_all_undefined():
    cm = ConfusionMatrix([0, 1])
    assert cm.mean_iou() is None


def test_label_swap_symmetry(rng):
    classes = [0, 1, 2]
    pred = LabelMask(rng.choice(np.array(classes, np.uint8), size=(16, 16)))
    truth = LabelMask(rng.choice(np.array(classes, np.uint8), size=(16, 16)))
    a = ConfusionMatrix(classes).accumulate(pred, truth)
    b = ConfusionMatrix(classes).accumulate(truth, pred)
    assert (a.counts == b.counts.T).all()
    assert a.iou_per_class() == b.iou_per_class()


def test_accumulation_additivity(rng):
    classes = [0, 1]
    images = [
        (
            LabelMask(rng.choice(np.array(classes, np.uint8), size=(8, 8))),
            LabelMask(rng.choice(np.array(classes, np.uint8), size=(8, 8))),
        )
        for _ in range(4)
    ]
    total = ConfusionMatrix(classes)
    for p, t in images:
        total.accumulate(p, t)
    summed = ConfusionMatrix(classes)
    for p, t in images:
        summed = summed + ConfusionMatrix(classes).accumulate(p, t)
    assert (total.counts == summed.counts).all()


def test_oracle_equivalence(rng):
    classes = [0, 1, 2]
    for _ in range(50):
        pred = LabelMask(rng.choice(np.array(classes + [IGNORE], np.uint8), size=(8, 8)))
        truth = LabelMask(rng.choice(np.array(classes + [IGNORE], np.uint8), size=(8, 8)))
        cm = ConfusionMatrix(classes).accumulate(pred, truth)
        assert cm_iou_fractions(cm) == brute_force_iou(pred, truth, classes)


def test_evaluate_pairs_micro_macro(rng):
    classes = [0, 2]
    pairs = []
    for i in range(3):
        t = LabelMask(rng.choice(np.array(classes, np.uint8), size=(6, 6)))
        pairs.append((f"img{i}", t, t))
    result = evaluate_pairs(pairs, classes, macro=True)
    assert result["mean_iou"] == 1.0
    assert result["images"] == 3
    assert result["pixels_evaluated"] == 108
    assert result["macro_mean_iou"] == 1.0
    assert len(result["per_image"]) == 3


def test_cm_rejects_ignore_class():
    with pytest.raises(ValidationError):
        ConfusionMatrix([0, IGNORE])
