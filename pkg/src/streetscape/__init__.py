"""Streetscape aesthetics toolkit: facade/billboard segmentation masks,
IoU evaluation, coverage analysis, augmentation, and model inference."""

from .mask import (
    IGNORE,
    CanonicalClass,
    ClassMap,
    LabelMask,
    cityscapes_to_canonical,
    class_areas,
    load_mask_png,
    merge,
    remap,
    save_mask_png,
)
from .annotations import PolygonAnnotation, Shape, parse_annotation, rasterize
from .dataset import DatasetManifest, SplitAssignment, load_manifest, split
from .metrics import ConfusionMatrix, evaluate_pairs
from .analysis import ContourReport, DenominatorMode, aggregate, analyze, render_overlay
from .augment import AugmentSpec, Sample, apply_pipeline, default_spec

__version__ = "0.1.0"

__all__ = [
    "IGNORE",
    "CanonicalClass",
    "ClassMap",
    "LabelMask",
    "cityscapes_to_canonical",
    "class_areas",
    "load_mask_png",
    "merge",
    "remap",
    "save_mask_png",
    "PolygonAnnotation",
    "Shape",
    "parse_annotation",
    "rasterize",
    "DatasetManifest",
    "SplitAssignment",
    "load_manifest",
    "split",
    "ConfusionMatrix",
    "evaluate_pairs",
    "ContourReport",
    "DenominatorMode",
    "aggregate",
    "analyze",
    "render_overlay",
    "AugmentSpec",
    "Sample",
    "apply_pipeline",
    "default_spec",
    "__version__",
]
