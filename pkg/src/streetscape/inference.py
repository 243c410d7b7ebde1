"""Segmentation inference over pluggable backends.

A backend takes an HxWx3 uint8 RGB image and returns per-pixel class scores
(H'xW'xC float) over its declared label space. The bundled model backend runs
TorchScript files (the exchange format emitted by the export tool); array
backends serve tests and precomputed score maps. Discrete label maps are
upsampled to the input resolution with nearest-neighbor so classes never blend.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import cv2
import numpy as np

from .errors import BackendError, SchemaError, ValidationError
from .mask import CanonicalClass, ClassMap, LabelMask, merge, remap

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class PreprocessSpec:
    target_size: Optional[tuple[int, int]] = None  # (W, H); None keeps input size
    mean: tuple[float, float, float] = IMAGENET_MEAN
    std: tuple[float, float, float] = IMAGENET_STD
    channel_order: str = "RGB"

    def __post_init__(self):
        if any(s <= 0 for s in self.std):
            raise ValidationError(f"std components must be positive, got {self.std}")
        if self.target_size is not None and any(d < 1 for d in self.target_size):
            raise ValidationError(f"target size must be positive, got {self.target_size}")
        if self.channel_order not in ("RGB", "BGR"):
            raise ValidationError(f"channel order must be RGB or BGR, got {self.channel_order}")


def preprocess(image: np.ndarray, spec: PreprocessSpec) -> np.ndarray:
    """Resize (bilinear), scale to [0, 1], then normalize per channel. HWC float32."""
    image = np.asarray(image, dtype=np.uint8)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValidationError(f"image must be HxWx3, got shape {image.shape}")
    if spec.channel_order == "BGR":
        image = image[:, :, ::-1]
    if spec.target_size is not None and (image.shape[1], image.shape[0]) != spec.target_size:
        image = cv2.resize(image, spec.target_size, interpolation=cv2.INTER_LINEAR)
    out = image.astype(np.float32) / 255.0
    out -= np.asarray(spec.mean, dtype=np.float32)
    out /= np.asarray(spec.std, dtype=np.float32)
    return out


class SegmentationBackend(Protocol):
    label_space: tuple[int, ...]

    def infer(self, image: np.ndarray) -> np.ndarray:
        """HxWx3 uint8 RGB -> (H', W', C) float scores, C = len(label_space)."""
        ...


@dataclass(frozen=True)
class ArrayBackend:
    """Backend returning a fixed score field; used in tests and for precomputed maps.

    Set emits_probabilities when the field already holds probabilities so
    predict_secondary skips the softmax/sigmoid activation.
    """

    scores: np.ndarray  # (H', W', C)
    label_space: tuple[int, ...]
    emits_probabilities: bool = False

    def infer(self, image: np.ndarray) -> np.ndarray:
        if self.scores.shape[2] != len(self.label_space):
            raise BackendError("score channels do not match the label space")
        return self.scores


@dataclass(frozen=True)
class ConstantBackend:
    """Backend scoring one class at a fixed value everywhere, at input resolution."""

    class_index: int
    label_space: tuple[int, ...]
    value: float = 1.0
    emits_probabilities: bool = False

    def infer(self, image: np.ndarray) -> np.ndarray:
        h, w = image.shape[:2]
        scores = np.zeros((h, w, len(self.label_space)), dtype=np.float32)
        scores[:, :, self.class_index] = self.value
        return scores


@dataclass
class TorchScriptBackend:
    """Runs a TorchScript segmentation model (NCHW float in, NCHW scores out)."""

    model_path: str
    label_space: tuple[int, ...]
    preprocess_spec: PreprocessSpec = field(default_factory=PreprocessSpec)

    def __post_init__(self):
        if not Path(self.model_path).is_file():
            raise BackendError(f"model file not found: {self.model_path}")
        try:
            import torch
        except ImportError as exc:
            raise BackendError("torch is required to run TorchScript models") from exc
        self._torch = torch
        try:
            self._module = torch.jit.load(self.model_path, map_location="cpu")
            self._module.eval()
        except Exception as exc:
            raise BackendError(f"cannot load TorchScript model {self.model_path}: {exc}") from exc

    def infer(self, image: np.ndarray) -> np.ndarray:
        torch = self._torch
        x = preprocess(image, self.preprocess_spec)
        tensor = torch.from_numpy(np.ascontiguousarray(x.transpose(2, 0, 1))[None])
        try:
            with torch.no_grad():
                y = self._module(tensor)
        except Exception as exc:
            raise BackendError(f"inference failed: {exc}") from exc
        if isinstance(y, dict):  # torchvision segmentation heads return {"out": ...}
            y = y["out"]
        scores = y[0].numpy().transpose(1, 2, 0)
        if not np.isfinite(scores).all():
            raise BackendError("backend produced non-finite scores")
        if scores.shape[2] != len(self.label_space):
            raise BackendError(
                f"model emits {scores.shape[2]} channels but label space has "
                f"{len(self.label_space)} classes"
            )
        return scores


def _upsample_labels(labels: np.ndarray, width: int, height: int) -> np.ndarray:
    if labels.shape == (height, width):
        return labels
    return cv2.resize(labels, (width, height), interpolation=cv2.INTER_NEAREST)


def predict_secondary(
    image: np.ndarray,
    backend: SegmentationBackend,
    threshold: float = 0.5,
    billboard_class: Optional[int] = None,
) -> LabelMask:
    """Binary billboard mask: SECONDARY where the billboard score >= threshold.

    2-channel backends are softmaxed, 1-channel ones passed through a sigmoid
    (unless the backend declares emits_probabilities); backends with more
    channels need an explicit billboard_class and probability scores.
    """
    scores = np.asarray(backend.infer(image), dtype=np.float64)
    c = scores.shape[2]
    probabilities = getattr(backend, "emits_probabilities", False)
    if probabilities and c <= 2:
        idx = 0 if c == 1 else (
            1 if billboard_class is None else int(backend.label_space.index(billboard_class))
        )
        prob = scores[:, :, idx]
    elif c == 1:
        prob = 1.0 / (1.0 + np.exp(-scores[:, :, 0]))
    elif c == 2:
        idx = 1 if billboard_class is None else int(backend.label_space.index(billboard_class))
        shifted = scores - scores.max(axis=2, keepdims=True)
        e = np.exp(shifted)
        prob = e[:, :, idx] / e.sum(axis=2)
    else:
        if billboard_class is None:
            raise BackendError(
                "backend label space is not binary; billboard_class is required"
            )
        if billboard_class not in backend.label_space:
            raise BackendError(f"billboard class {billboard_class} not in backend label space")
        prob = scores[:, :, backend.label_space.index(billboard_class)]
    binary = np.where(prob >= threshold, int(CanonicalClass.SECONDARY),
                      int(CanonicalClass.OTHER)).astype(np.uint8)
    return LabelMask(_upsample_labels(binary, image.shape[1], image.shape[0]))


def predict_primary(
    image: np.ndarray,
    backend: SegmentationBackend,
    class_map: ClassMap,
) -> LabelMask:
    """Per-pixel argmax over backend scores (ties -> lowest class index), remapped
    to the canonical label space."""
    scores = np.asarray(backend.infer(image), dtype=np.float64)
    arg = scores.argmax(axis=2)
    labels = np.asarray(backend.label_space, dtype=np.uint8)[arg]
    labels = _upsample_labels(labels, image.shape[1], image.shape[0])
    return remap(LabelMask(labels), class_map)


def predict_composite(
    image: np.ndarray,
    primary_backend: SegmentationBackend,
    secondary_backend: SegmentationBackend,
    class_map: ClassMap,
    threshold: float = 0.5,
    billboard_class: Optional[int] = None,
) -> LabelMask:
    return merge(
        predict_primary(image, primary_backend, class_map),
        predict_secondary(image, secondary_backend, threshold, billboard_class),
    )


@dataclass(frozen=True)
class ModelConfig:
    """Model config JSON: {"model_path", "label_space", "input_size",
    "normalization": {"mean", "std"}, "billboard_class"}."""

    model_path: str
    label_space: tuple[int, ...]
    input_size: Optional[tuple[int, int]] = None
    mean: tuple[float, float, float] = IMAGENET_MEAN
    std: tuple[float, float, float] = IMAGENET_STD
    billboard_class: Optional[int] = None

    @classmethod
    def from_json(cls, text: str | bytes) -> "ModelConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"malformed model config JSON: {exc.msg}") from exc
        for key in ("model_path", "label_space"):
            if key not in doc:
                raise SchemaError(f"model config missing required field {key!r}")
        norm = doc.get("normalization", {})
        return cls(
            model_path=doc["model_path"],
            label_space=tuple(int(c) for c in doc["label_space"]),
            input_size=tuple(doc["input_size"]) if doc.get("input_size") else None,
            mean=tuple(norm.get("mean", IMAGENET_MEAN)),
            std=tuple(norm.get("std", IMAGENET_STD)),
            billboard_class=doc.get("billboard_class"),
        )

    def load_backend(self) -> TorchScriptBackend:
        return TorchScriptBackend(
            model_path=self.model_path,
            label_space=self.label_space,
            preprocess_spec=PreprocessSpec(
                target_size=self.input_size, mean=self.mean, std=self.std
            ),
        )
