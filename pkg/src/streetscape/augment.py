"""Joint image+mask augmentation: flip, affine, crop, contrast, perspective,
downscale, and a seeded pipeline combining them.

Images are resampled bilinearly, masks always nearest-neighbor (class ids are
categorical). Out-of-frame regions are filled with black in the image and
IGNORE in the mask so warped borders never pollute metrics. Identity
parameters are exact no-ops.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Any

import cv2
import numpy as np

from .errors import DimensionMismatchError, GeometryError, SchemaError, ValidationError
from .mask import IGNORE, LabelMask
from .rng import hash64

_LUMA = np.array([0.299, 0.587, 0.114])

KINDS = ("flip_h", "affine", "random_crop", "random_contrast", "perspective", "downscale")


@dataclass(frozen=True)
class Sample:
    image: np.ndarray  # (H, W, 3) uint8 RGB
    mask: LabelMask

    def __post_init__(self):
        img = np.asarray(self.image, dtype=np.uint8)
        if img.ndim != 3 or img.shape[2] != 3:
            raise ValidationError(f"image must be HxWx3, got shape {img.shape}")
        if img.shape[:2] != self.mask.data.shape:
            raise DimensionMismatchError(
                f"image {img.shape[:2]} and mask {self.mask.data.shape} dimensions differ"
            )
        object.__setattr__(self, "image", img)

    @property
    def width(self) -> int:
        return self.image.shape[1]

    @property
    def height(self) -> int:
        return self.image.shape[0]


def flip_h(s: Sample) -> Sample:
    return Sample(image=s.image[:, ::-1], mask=LabelMask(s.mask.data[:, ::-1]))


def _warp(s: Sample, matrix: np.ndarray, perspective_warp: bool) -> Sample:
    size = (s.width, s.height)
    warp = cv2.warpPerspective if perspective_warp else cv2.warpAffine
    img = warp(
        s.image, matrix, size,
        flags=cv2.INTER_LINEAR, borderMode=cv2.BORDER_CONSTANT, borderValue=(0, 0, 0),
    )
    msk = warp(
        s.mask.data, matrix, size,
        flags=cv2.INTER_NEAREST, borderMode=cv2.BORDER_CONSTANT, borderValue=IGNORE,
    )
    return Sample(image=img, mask=LabelMask(msk))


def affine(
    s: Sample,
    shift: tuple[float, float] = (0.0, 0.0),
    scale: float = 1.0,
    rotate: float = 0.0,
) -> Sample:
    """Shift (fractions of W/H), scale and rotate (degrees) about the image center."""
    if scale <= 0:
        raise ValidationError(f"scale must be positive, got {scale}")
    if shift == (0.0, 0.0) and scale == 1.0 and rotate == 0.0:
        return s
    center = ((s.width - 1) / 2.0, (s.height - 1) / 2.0)
    m = cv2.getRotationMatrix2D(center, rotate, scale)
    m[0, 2] += shift[0] * s.width
    m[1, 2] += shift[1] * s.height
    return _warp(s, m, perspective_warp=False)


def random_crop(s: Sample, out_w: int, out_h: int, rng: np.random.Generator) -> Sample:
    if out_w < 1 or out_h < 1 or out_w > s.width or out_h > s.height:
        raise ValidationError(
            f"crop {out_w}x{out_h} invalid for {s.width}x{s.height} input"
        )
    x0 = int(rng.integers(0, s.width - out_w + 1))
    y0 = int(rng.integers(0, s.height - out_h + 1))
    return Sample(
        image=s.image[y0 : y0 + out_h, x0 : x0 + out_w],
        mask=LabelMask(s.mask.data[y0 : y0 + out_h, x0 : x0 + out_w]),
    )


def random_contrast(image: np.ndarray, factor: float) -> np.ndarray:
    """Rescale pixel values about the per-image grayscale (luma) mean."""
    if factor <= 0:
        raise ValidationError(f"contrast factor must be positive, got {factor}")
    if factor == 1.0:
        return image
    mean = float((image.astype(np.float64) * _LUMA).sum(axis=2).mean())
    out = mean + factor * (image.astype(np.float64) - mean)
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def perspective(s: Sample, corner_displacements) -> Sample:
    """Four-point perspective warp; displacements are (dx, dy) fractions per corner
    in order TL, TR, BR, BL. The displaced quad is mapped back to the full frame."""
    disp = np.asarray(corner_displacements, dtype=np.float64)
    if disp.shape != (4, 2):
        raise ValidationError(f"need four (dx, dy) displacements, got shape {disp.shape}")
    if not disp.any():
        return s
    w, h = s.width, s.height
    corners = np.array([[0, 0], [w - 1, 0], [w - 1, h - 1], [0, h - 1]], dtype=np.float64)
    displaced = corners + disp * np.array([w, h], dtype=np.float64)
    if not _is_convex(displaced):
        raise GeometryError("displaced corners do not form a convex quadrilateral")
    m = cv2.getPerspectiveTransform(displaced.astype(np.float32), corners.astype(np.float32))
    if abs(np.linalg.det(m)) < 1e-12:
        raise GeometryError("degenerate (non-invertible) homography")
    return _warp(s, m, perspective_warp=True)


def _is_convex(quad: np.ndarray) -> bool:
    signs = []
    for i in range(4):
        a, b, c = quad[i], quad[(i + 1) % 4], quad[(i + 2) % 4]
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if cross == 0:
            return False
        signs.append(cross > 0)
    return len(set(signs)) == 1


def downscale(s: Sample, factor: float) -> Sample:
    if not 0 < factor <= 1:
        raise ValidationError(f"downscale factor must be in (0, 1], got {factor}")
    if factor == 1.0:
        return s
    out_w, out_h = int(s.width * factor), int(s.height * factor)
    if out_w < 1 or out_h < 1:
        raise ValidationError(f"factor {factor} collapses {s.width}x{s.height} to zero size")
    img = cv2.resize(s.image, (out_w, out_h), interpolation=cv2.INTER_LINEAR)
    msk = cv2.resize(s.mask.data, (out_w, out_h), interpolation=cv2.INTER_NEAREST)
    return Sample(image=img, mask=LabelMask(msk))


@dataclass(frozen=True)
class AugmentStep:
    kind: str
    probability: float = 1.0
    params: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown step kind {self.kind!r}")
        if not 0.0 <= self.probability <= 1.0:
            raise ValidationError(f"probability must be in [0, 1], got {self.probability}")
        for key, rng in self.params.items():
            if isinstance(rng, (list, tuple)) and len(rng) == 2 and rng[0] > rng[1]:
                raise ValidationError(f"step {self.kind}: range {key} has min > max")


@dataclass(frozen=True)
class AugmentSpec:
    steps: tuple[AugmentStep, ...]
    base_seed: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "base_seed": self.base_seed,
                "steps": [
                    {"kind": st.kind, "probability": st.probability, "params": st.params}
                    for st in self.steps
                ],
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str | bytes) -> "AugmentSpec":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(
                f"malformed augment spec JSON at line {exc.lineno} column {exc.colno}: {exc.msg}"
            ) from exc
        if not isinstance(doc, dict) or "steps" not in doc:
            raise SchemaError("augment spec must be an object with a 'steps' list")
        steps = tuple(
            AugmentStep(
                kind=st.get("kind", ""),
                probability=st.get("probability", 1.0),
                params=st.get("params", {}),
            )
            for st in doc["steps"]
        )
        return cls(steps=steps, base_seed=int(doc.get("base_seed", 0)))


def default_spec(base_seed: int = 0) -> AugmentSpec:
    """The full transform list with conventional ranges (all overridable)."""
    return AugmentSpec(
        base_seed=base_seed,
        steps=(
            AugmentStep("flip_h", 0.5),
            AugmentStep("affine", 0.5, {
                "shift_x": [-0.1, 0.1], "shift_y": [-0.1, 0.1],
                "scale": [0.9, 1.1], "rotate": [-15.0, 15.0],
            }),
            AugmentStep("random_crop", 0.5, {"crop_frac": 0.9}),
            AugmentStep("random_contrast", 0.5, {"factor": [0.8, 1.2]}),
            AugmentStep("perspective", 0.5, {"max_displacement": 0.1}),
            AugmentStep("downscale", 0.5, {"factor": [0.25, 0.5]}),
        ),
    )


def _uniform(rng: np.random.Generator, bounds, fallback) -> float:
    lo, hi = bounds if bounds is not None else fallback
    return float(rng.uniform(lo, hi))


def _apply_step(step: AugmentStep, s: Sample, rng: np.random.Generator) -> Sample:
    p = step.params
    if step.kind == "flip_h":
        return flip_h(s)
    if step.kind == "affine":
        return affine(
            s,
            shift=(
                _uniform(rng, p.get("shift_x"), (-0.1, 0.1)),
                _uniform(rng, p.get("shift_y"), (-0.1, 0.1)),
            ),
            scale=_uniform(rng, p.get("scale"), (0.9, 1.1)),
            rotate=_uniform(rng, p.get("rotate"), (-15.0, 15.0)),
        )
    if step.kind == "random_crop":
        frac = float(p.get("crop_frac", 0.9))
        out_w = max(1, int(s.width * frac))
        out_h = max(1, int(s.height * frac))
        return random_crop(s, out_w, out_h, rng)
    if step.kind == "random_contrast":
        return replace(s, image=random_contrast(s.image, _uniform(rng, p.get("factor"), (0.8, 1.2))))
    if step.kind == "perspective":
        lim = float(p.get("max_displacement", 0.1))
        # Corners pull inward-or-outward independently but stay convex by
        # construction when |d| < 0.5 in both axes.
        disp = rng.uniform(-lim, lim, size=(4, 2))
        return perspective(s, disp)
    if step.kind == "downscale":
        return downscale(s, _uniform(rng, p.get("factor"), (0.25, 0.5)))
    raise ValidationError(f"unknown step kind {step.kind!r}")


def apply_pipeline(spec: AugmentSpec, s: Sample, sample_id: str) -> Sample:
    """Run the step list on one sample.

    All randomness comes from a PCG64 stream seeded with
    hash64(base_seed, sample_id), so a sample's output does not depend on
    where it sits in a batch or on thread count.
    """
    rng = np.random.Generator(np.random.PCG64(hash64(spec.base_seed, sample_id)))
    out = s
    for step in spec.steps:
        if float(rng.random()) < step.probability:
            out = _apply_step(step, out, rng)
    return out
