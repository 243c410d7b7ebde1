"""Canonical label masks: representation, remapping, area counting and fusion.

A mask is a row-major grid of 8-bit class ids. The canonical label space is
{OTHER, PRIMARY, SECONDARY, SKY, ROAD} plus the reserved IGNORE id 255 for
pixels excluded from metrics and analysis (unlabeled regions, warp fill).
"""

from __future__ import annotations

import enum
import io
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from PIL import Image

from .errors import DimensionMismatchError, FormatError, ValidationError

IGNORE = 255


class CanonicalClass(enum.IntEnum):
    OTHER = 0
    PRIMARY = 1
    SECONDARY = 2
    SKY = 3
    ROAD = 4
    IGNORE = 255


CANONICAL_IDS = frozenset(int(c) for c in CanonicalClass)

# Palette used when writing canonical masks as indexed PNG. Index = class id.
_PALETTE_COLORS = {
    int(CanonicalClass.OTHER): (90, 90, 90),
    int(CanonicalClass.PRIMARY): (0, 0, 255),
    int(CanonicalClass.SECONDARY): (255, 0, 0),
    int(CanonicalClass.SKY): (135, 206, 235),
    int(CanonicalClass.ROAD): (128, 64, 128),
    int(CanonicalClass.IGNORE): (0, 0, 0),
}


@dataclass(frozen=True, eq=False)
class LabelMask:
    """Immutable per-pixel class-id grid, shape (height, width), dtype uint8."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValidationError(f"mask must be 2-D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"mask dimensions must be positive, got {arr.shape}")
        if arr.dtype != np.uint8:
            arr = arr.astype(np.uint8, casting="safe")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]

    def __eq__(self, other) -> bool:
        if not isinstance(other, LabelMask):
            return NotImplemented
        return np.array_equal(self.data, other.data)

    def is_canonical(self) -> bool:
        return bool(np.isin(np.unique(self.data), list(CANONICAL_IDS)).all())


@dataclass(frozen=True)
class ClassMap:
    """Total mapping from an 8-bit source label space to canonical classes.

    Ids absent from `entries` map to `default`; IGNORE always maps to IGNORE.
    """

    entries: Mapping[int, CanonicalClass]
    default: CanonicalClass = CanonicalClass.OTHER

    def __post_init__(self):
        for src, dst in self.entries.items():
            if not 0 <= int(src) <= 255:
                raise ValidationError(f"source id {src} outside 8-bit range")
            if int(src) == IGNORE and int(dst) != IGNORE:
                raise ValidationError("IGNORE (255) must map to IGNORE")

    def lut(self) -> np.ndarray:
        table = np.full(256, int(self.default), dtype=np.uint8)
        for src, dst in self.entries.items():
            table[int(src)] = int(dst)
        table[IGNORE] = IGNORE
        return table


def cityscapes_to_canonical() -> ClassMap:
    """Default Cityscapes label-id map: building/wall -> PRIMARY, sky -> SKY,
    road -> ROAD, everything else (incl. sidewalk) -> OTHER."""
    return ClassMap(
        entries={
            11: CanonicalClass.PRIMARY,  # building
            12: CanonicalClass.PRIMARY,  # wall
            23: CanonicalClass.SKY,
            7: CanonicalClass.ROAD,
        },
        default=CanonicalClass.OTHER,
    )


def class_areas(mask: LabelMask) -> dict[int, int]:
    """Pixel count per class id; only ids present in the mask appear."""
    counts = np.bincount(mask.data.reshape(-1), minlength=256)
    return {int(i): int(n) for i, n in enumerate(counts) if n > 0}


def remap(mask: LabelMask, class_map: ClassMap) -> LabelMask:
    """Apply a ClassMap pixel-wise; output is in the canonical label space."""
    return LabelMask(class_map.lut()[mask.data])


def merge(primary_pred: LabelMask, secondary_pred: LabelMask) -> LabelMask:
    """Composite two canonical masks: SECONDARY pixels of the second mask win,
    everything else comes from the first (billboards occlude facades)."""
    if primary_pred.data.shape != secondary_pred.data.shape:
        raise DimensionMismatchError(
            f"mask dimensions differ: {primary_pred.data.shape} vs "
            f"{secondary_pred.data.shape}"
        )
    out = primary_pred.data.copy()
    sec = secondary_pred.data == int(CanonicalClass.SECONDARY)
    out[sec] = int(CanonicalClass.SECONDARY)
    return LabelMask(out)


def save_mask_png(mask: LabelMask) -> bytes:
    """Encode a mask as single-channel 8-bit indexed PNG (palette index = class id)."""
    img = Image.fromarray(mask.data, mode="P")
    palette = [0] * 768
    for idx, (r, g, b) in _PALETTE_COLORS.items():
        palette[3 * idx : 3 * idx + 3] = [r, g, b]
    img.putpalette(palette)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def load_mask_png(data: bytes) -> LabelMask:
    """Decode a single-channel 8-bit PNG into a LabelMask, values verbatim."""
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise FormatError(f"cannot decode PNG stream: {exc}") from exc
    if img.format != "PNG":
        raise FormatError(f"expected PNG, got {img.format}")
    if img.mode not in ("L", "P"):
        raise FormatError(
            f"mask PNG must be single-channel 8-bit (mode L or P), got mode {img.mode}"
        )
    return LabelMask(np.asarray(img, dtype=np.uint8))
