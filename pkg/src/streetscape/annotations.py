"""Polygon annotation parsing and rasterization to label masks.

Annotation JSON schema:
    {"image_id": str, "image_width": int, "image_height": int,
     "shapes": [{"label": str, "points": [[x, y], ...],
                 "holes": [[[x, y], ...], ...]}]}

Rasterization rule: a pixel belongs to a polygon iff its center (x+0.5, y+0.5)
is inside under the even-odd rule; shapes are filled in list order (later wins);
holes subtract only from their own shape.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import GeometryError, LabelResolutionError, SchemaError
from .mask import CanonicalClass, LabelMask


@dataclass(frozen=True)
class Shape:
    label: str
    exterior: np.ndarray          # (N, 2) float64
    holes: tuple[np.ndarray, ...] = ()


@dataclass(frozen=True)
class PolygonAnnotation:
    image_id: str
    image_width: int
    image_height: int
    shapes: tuple[Shape, ...] = field(default_factory=tuple)


def _as_ring(points, where: str) -> np.ndarray:
    ring = np.asarray(points, dtype=np.float64)
    if ring.ndim != 2 or ring.shape[1] != 2 or ring.shape[0] < 3:
        raise GeometryError(f"{where}: a ring needs >= 3 [x, y] vertices")
    if not np.isfinite(ring).all():
        raise GeometryError(f"{where}: vertex coordinates must be finite")
    return ring


def parse_annotation(text: str | bytes) -> PolygonAnnotation:
    """Parse and validate an annotation JSON document.

    Unknown labels are kept verbatim; they are resolved at rasterization time.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(
            f"malformed annotation JSON at line {exc.lineno} column {exc.colno}: "
            f"{exc.msg}"
        ) from exc
    if not isinstance(doc, dict):
        raise SchemaError("annotation document must be a JSON object")
    for key in ("image_id", "image_width", "image_height", "shapes"):
        if key not in doc:
            raise SchemaError(f"missing required field {key!r}")
    width, height = doc["image_width"], doc["image_height"]
    if not isinstance(width, int) or not isinstance(height, int) or width < 1 or height < 1:
        raise SchemaError("image_width/image_height must be positive integers")
    if not isinstance(doc["shapes"], list):
        raise SchemaError("field 'shapes' must be a list")

    shapes = []
    for i, raw in enumerate(doc["shapes"]):
        if not isinstance(raw, dict):
            raise SchemaError(f"shape {i} must be an object")
        for key in ("label", "points"):
            if key not in raw:
                raise SchemaError(f"shape {i}: missing required field {key!r}")
        label = raw["label"]
        if not isinstance(label, str) or not label:
            raise SchemaError(f"shape {i}: label must be a non-empty string")
        exterior = _as_ring(raw["points"], f"shape {i}")
        holes = tuple(
            _as_ring(h, f"shape {i} hole {j}") for j, h in enumerate(raw.get("holes", []))
        )
        shapes.append(Shape(label=label, exterior=exterior, holes=holes))
    return PolygonAnnotation(
        image_id=str(doc["image_id"]),
        image_width=width,
        image_height=height,
        shapes=tuple(shapes),
    )


def annotation_to_json(ann: PolygonAnnotation) -> str:
    doc = {
        "image_id": ann.image_id,
        "image_width": ann.image_width,
        "image_height": ann.image_height,
        "shapes": [
            {
                "label": s.label,
                "points": s.exterior.tolist(),
                "holes": [h.tolist() for h in s.holes],
            }
            for s in ann.shapes
        ],
    }
    return json.dumps(doc)


def _ring_parity(ring: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Even-odd crossing parity of a +x ray from each (xs, ys) grid center."""
    parity = np.zeros((ys.size, xs.size), dtype=bool)
    x1, y1 = ring[:, 0], ring[:, 1]
    x2, y2 = np.roll(x1, -1), np.roll(y1, -1)
    for ex1, ey1, ex2, ey2 in zip(x1, y1, x2, y2):
        if ey1 == ey2:
            continue
        lo, hi = (ey1, ey2) if ey1 < ey2 else (ey2, ey1)
        rows = (ys >= lo) & (ys < hi)
        if not rows.any():
            continue
        xint = ex1 + (ys[rows] - ey1) * (ex2 - ex1) / (ey2 - ey1)
        parity[rows] ^= xs[None, :] < xint[:, None]
    return parity


def fill_polygon(
    rings: Sequence[np.ndarray], width: int, height: int
) -> np.ndarray:
    """Boolean inside-mask of a polygon given as exterior + hole rings (even-odd)."""
    all_pts = np.concatenate(rings, axis=0)
    x0 = max(0, int(math.floor(all_pts[:, 0].min() - 0.5)))
    x1 = min(width, int(math.ceil(all_pts[:, 0].max() + 0.5)))
    y0 = max(0, int(math.floor(all_pts[:, 1].min() - 0.5)))
    y1 = min(height, int(math.ceil(all_pts[:, 1].max() + 0.5)))
    out = np.zeros((height, width), dtype=bool)
    if x1 <= x0 or y1 <= y0:
        return out
    xs = np.arange(x0, x1, dtype=np.float64) + 0.5
    ys = np.arange(y0, y1, dtype=np.float64) + 0.5
    parity = np.zeros((ys.size, xs.size), dtype=bool)
    for ring in rings:
        parity ^= _ring_parity(ring, xs, ys)
    out[y0:y1, x0:x1] = parity
    return out


def rasterize(
    ann: PolygonAnnotation,
    table: Mapping[str, CanonicalClass | int],
    default: CanonicalClass | int | None = None,
) -> LabelMask:
    """Burn an annotation's shapes into a canonical mask over an OTHER background."""
    out = np.full(
        (ann.image_height, ann.image_width), int(CanonicalClass.OTHER), dtype=np.uint8
    )
    for shape in ann.shapes:
        if shape.label in table:
            class_id = int(table[shape.label])
        elif default is not None:
            class_id = int(default)
        else:
            raise LabelResolutionError(
                f"label {shape.label!r} not in the label table and no default given"
            )
        inside = fill_polygon((shape.exterior, *shape.holes), ann.image_width, ann.image_height)
        out[inside] = class_id
    return LabelMask(out)


def shoelace_area(ring: np.ndarray) -> float:
    x, y = ring[:, 0], ring[:, 1]
    return abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))) / 2.0


def perimeter(ring: np.ndarray) -> float:
    return float(np.linalg.norm(ring - np.roll(ring, -1, axis=0), axis=1).sum())
