"""Dataset manifest loading and deterministic train/val/test splitting.

Manifest CSV columns: id,image_path,annotation_path (header required;
annotation_path may be empty). Split shuffles ids with a SplitMix64-driven
Fisher-Yates shuffle and partitions by largest-remainder apportionment.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import SchemaError, ValidationError
from .rng import fisher_yates

_REQUIRED_COLUMNS = ("id", "image_path", "annotation_path")


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    image_path: str
    annotation_path: Optional[str] = None


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if not e.id or not e.image_path:
                raise ValidationError(f"entry {e.id!r}: id and image_path must be non-empty")
            if e.id in seen:
                raise ValidationError(f"duplicate id {e.id!r} in manifest")
            seen.add(e.id)

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(e.id for e in self.entries)


@dataclass(frozen=True)
class SplitAssignment:
    train: frozenset[str]
    val: frozenset[str]
    test: frozenset[str]
    seed: int
    ratios: tuple[float, float, float]
    order: tuple[str, ...] = field(default=(), repr=False)  # shuffled id order

    def to_json(self) -> str:
        by_bucket = {"train": self.train, "val": self.val, "test": self.test}
        doc = {
            "seed": self.seed,
            "ratios": list(self.ratios),
            **{k: sorted(v) for k, v in by_bucket.items()},
        }
        return json.dumps(doc, indent=2)


def load_manifest(text: str | bytes) -> DatasetManifest:
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise SchemaError("manifest is empty; header row required") from None
    header = [h.strip() for h in header]
    if header != list(_REQUIRED_COLUMNS):
        raise SchemaError(
            f"manifest header must be {','.join(_REQUIRED_COLUMNS)}, got {','.join(header)}"
        )
    entries = []
    for row_num, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise SchemaError(f"row {row_num}: expected 3 columns, got {len(row)}")
        ann = row[2].strip() or None
        entries.append(ManifestEntry(id=row[0].strip(), image_path=row[1].strip(), annotation_path=ann))
    return DatasetManifest(entries=tuple(entries))


def apportion(n: int, ratios: Sequence[float]) -> list[int]:
    """Largest-remainder bucket sizes; ties go to the earlier bucket."""
    floors = [math.floor(n * r) for r in ratios]
    remainders = [n * r - f for r, f in zip(ratios, floors)]
    leftover = n - sum(floors)
    order = sorted(range(len(ratios)), key=lambda i: (-remainders[i], i))
    for i in order[:leftover]:
        floors[i] += 1
    return floors


def split(
    manifest: DatasetManifest,
    ratios: tuple[float, float, float],
    seed: int,
) -> SplitAssignment:
    """Deterministic train/val/test partition at the given proportions."""
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValidationError(f"ratios must be three positive fractions, got {ratios}")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValidationError(f"ratios must sum to 1, got sum {sum(ratios)!r}")
    if not manifest.entries:
        raise ValidationError("manifest is empty; nothing to split")
    order = fisher_yates(list(manifest.ids), seed)
    n_train, n_val, n_test = apportion(len(order), ratios)
    return SplitAssignment(
        train=frozenset(order[:n_train]),
        val=frozenset(order[n_train : n_train + n_val]),
        test=frozenset(order[n_train + n_val :]),
        seed=seed,
        ratios=tuple(ratios),
        order=tuple(order),
    )
