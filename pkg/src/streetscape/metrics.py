"""Confusion-matrix accumulation and per-class / mean Intersection-over-Union.

IGNORE (255) pixels in either mask are excluded from accumulation. Dataset
IoU aggregates counts before dividing (micro); a per-image macro average is
available for comparison.
"""

from __future__ import annotations

from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import DimensionMismatchError, ValidationError
from .mask import IGNORE, LabelMask


class ConfusionMatrix:
    """K x K pixel-count table; counts[g][p] = pixels of truth class g predicted p."""

    def __init__(self, classes: Sequence[int], counts: Optional[np.ndarray] = None):
        classes = tuple(int(c) for c in classes)
        if not classes:
            raise ValidationError("confusion matrix needs at least one class")
        if len(set(classes)) != len(classes):
            raise ValidationError("duplicate class ids")
        if IGNORE in classes:
            raise ValidationError("IGNORE (255) cannot index a confusion matrix")
        self.classes = classes
        k = len(classes)
        if counts is None:
            counts = np.zeros((k, k), dtype=np.int64)
        else:
            counts = np.asarray(counts, dtype=np.int64)
            if counts.shape != (k, k) or (counts < 0).any():
                raise ValidationError(f"counts must be non-negative {k}x{k}")
        self.counts = counts
        self._index = np.full(256, -1, dtype=np.int64)
        for i, c in enumerate(classes):
            self._index[c] = i

    def copy(self) -> "ConfusionMatrix":
        return ConfusionMatrix(self.classes, self.counts.copy())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        if other.classes != self.classes:
            raise ValidationError("cannot add confusion matrices over different classes")
        return ConfusionMatrix(self.classes, self.counts + other.counts)

    def accumulate(self, pred: LabelMask, truth: LabelMask) -> "ConfusionMatrix":
        """Add one image pair's pixel counts in place; returns self."""
        if pred.data.shape != truth.data.shape:
            raise DimensionMismatchError(
                f"pred {pred.data.shape} and truth {truth.data.shape} dimensions differ"
            )
        p = pred.data.reshape(-1)
        t = truth.data.reshape(-1)
        keep = (p != IGNORE) & (t != IGNORE)
        p, t = p[keep], t[keep]
        pi, ti = self._index[p], self._index[t]
        for name, arr, ids in (("pred", pi, p), ("truth", ti, t)):
            if (arr < 0).any():
                bad = int(ids[arr < 0][0])
                raise ValidationError(f"{name} mask contains class id {bad} outside the label space")
        k = len(self.classes)
        self.counts += np.bincount(ti * k + pi, minlength=k * k).reshape(k, k)
        return self

    def iou_per_class(self) -> dict[int, Optional[float]]:
        """IoU_c = TP / (TP + FP + FN); None where the denominator is 0."""
        tp = np.diag(self.counts)
        denom = self.counts.sum(axis=0) + self.counts.sum(axis=1) - tp
        out: dict[int, Optional[float]] = {}
        for i, c in enumerate(self.classes):
            out[c] = float(tp[i] / denom[i]) if denom[i] > 0 else None
        return out

    def mean_iou(self, eval_classes: Optional[Iterable[int]] = None) -> Optional[float]:
        """Arithmetic mean of defined per-class IoUs; None if all are undefined."""
        if eval_classes is None:
            eval_classes = self.classes
        eval_classes = [int(c) for c in eval_classes]
        unknown = set(eval_classes) - set(self.classes)
        if unknown:
            raise ValidationError(f"unknown class id(s) in eval set: {sorted(unknown)}")
        per_class = self.iou_per_class()
        defined = [per_class[c] for c in eval_classes if per_class[c] is not None]
        return sum(defined) / len(defined) if defined else None

    @property
    def pixels(self) -> int:
        return int(self.counts.sum())


def evaluate_pairs(
    pairs: Iterable[tuple[str, LabelMask, LabelMask]],
    classes: Sequence[int],
    macro: bool = False,
) -> dict:
    """Evaluate (id, pred, truth) pairs; micro-aggregated metrics plus optional
    per-image IoU rows when macro is on."""
    total = ConfusionMatrix(classes)
    per_image = []
    n = 0
    for image_id, pred, truth in pairs:
        n += 1
        cm = ConfusionMatrix(classes).accumulate(pred, truth)
        total = total + cm
        if macro:
            per_image.append(
                {
                    "image_id": image_id,
                    "per_class_iou": cm.iou_per_class(),
                    "mean_iou": cm.mean_iou(),
                }
            )
    result = {
        "per_class_iou": total.iou_per_class(),
        "mean_iou": total.mean_iou(),
        "pixels_evaluated": total.pixels,
        "images": n,
    }
    if macro:
        defined = [r["mean_iou"] for r in per_image if r["mean_iou"] is not None]
        result["per_image"] = per_image
        result["macro_mean_iou"] = sum(defined) / len(defined) if defined else None
    return result
