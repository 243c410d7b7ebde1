"""Contour coverage analysis: per-class coverage fractions, the
secondary/primary area ratio, aggregation over image sets, and overlay
rendering (facades blue, billboards red)."""

from __future__ import annotations

import enum
import statistics
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatchError, ValidationError
from .mask import CanonicalClass, LabelMask, class_areas

CSV_HEADER = (
    "image_id,primary_pct,secondary_pct,sky_pct,road_pct,other_pct,ignore_pct,ratio_sp"
)


class DenominatorMode(str, enum.Enum):
    WHOLE_IMAGE = "whole_image"
    NON_SKY_ROAD = "non_sky_road"


@dataclass(frozen=True)
class ContourReport:
    image_id: str
    coverage: dict[CanonicalClass, float]
    ratio_sp: Optional[float]  # None = undefined (no primary pixels)
    denominator_mode: DenominatorMode = DenominatorMode.WHOLE_IMAGE

    def csv_row(self) -> str:
        def pct(c: CanonicalClass) -> str:
            return f"{100.0 * self.coverage.get(c, 0.0):.4f}"

        ratio = "" if self.ratio_sp is None else f"{100.0 * self.ratio_sp:.4f}"
        cc = CanonicalClass
        return ",".join(
            [self.image_id, pct(cc.PRIMARY), pct(cc.SECONDARY), pct(cc.SKY),
             pct(cc.ROAD), pct(cc.OTHER), pct(cc.IGNORE), ratio]
        )


def analyze(
    mask: LabelMask,
    image_id: str,
    mode: DenominatorMode = DenominatorMode.WHOLE_IMAGE,
) -> ContourReport:
    """Coverage fraction per class and secondary/primary pixel ratio.

    In NON_SKY_ROAD mode the denominator is the pixel count that is neither
    sky nor road, and SKY/ROAD drop out of the coverage map; the ratio is
    identical in both modes since numerator and denominator share it.
    """
    areas = class_areas(mask)
    primary = areas.get(int(CanonicalClass.PRIMARY), 0)
    secondary = areas.get(int(CanonicalClass.SECONDARY), 0)
    if mode == DenominatorMode.WHOLE_IMAGE:
        classes = list(CanonicalClass)
        denom = mask.width * mask.height
    else:
        classes = [c for c in CanonicalClass if c not in (CanonicalClass.SKY, CanonicalClass.ROAD)]
        denom = sum(areas.get(int(c), 0) for c in classes)
    coverage = {c: (areas.get(int(c), 0) / denom if denom else 0.0) for c in classes}
    ratio = (secondary / primary) if primary > 0 else None
    return ContourReport(image_id=image_id, coverage=coverage, ratio_sp=ratio,
                         denominator_mode=mode)


def _stats(values: Sequence[float]) -> Optional[dict[str, float]]:
    if not values:
        return None
    return {
        "mean": statistics.fmean(values),
        "median": statistics.median(values),
        "min": min(values),
        "max": max(values),
    }


def aggregate(reports: Sequence[ContourReport]) -> dict:
    """Summary stats over a report list; undefined ratios are counted, not averaged."""
    if not reports:
        raise ValidationError("cannot aggregate an empty report list")
    ratios = [r.ratio_sp for r in reports if r.ratio_sp is not None]
    coverage_stats = {}
    for c in CanonicalClass:
        vals = [r.coverage[c] for r in reports if c in r.coverage]
        if vals:
            coverage_stats[c.name] = _stats(vals)
    return {
        "images": len(reports),
        "undefined_ratios": len(reports) - len(ratios),
        "ratio_sp": _stats(ratios),
        "coverage": coverage_stats,
    }


def render_overlay(
    image: np.ndarray,
    mask: LabelMask,
    alpha: float = 0.5,
    primary_color: tuple[int, int, int] = (0, 0, 255),
    secondary_color: tuple[int, int, int] = (255, 0, 0),
) -> np.ndarray:
    """Blend PRIMARY pixels toward blue and SECONDARY toward red; RGB in/out."""
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValidationError(f"image must be HxWx3 RGB, got shape {image.shape}")
    if image.shape[:2] != mask.data.shape:
        raise DimensionMismatchError(
            f"image {image.shape[:2]} and mask {mask.data.shape} dimensions differ"
        )
    out = image.astype(np.float64)
    for class_id, color in (
        (int(CanonicalClass.PRIMARY), primary_color),
        (int(CanonicalClass.SECONDARY), secondary_color),
    ):
        sel = mask.data == class_id
        out[sel] = (1.0 - alpha) * out[sel] + alpha * np.asarray(color, dtype=np.float64)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)
