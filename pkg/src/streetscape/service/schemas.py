"""Pydantic request/response models for the HTTP service.

Binary payloads (PNG images and masks) travel base64-encoded inside JSON.
"""

from __future__ import annotations

import base64
from typing import Any, Optional

from pydantic import BaseModel, Field, field_validator


def b64(data: bytes) -> str:
    return base64.b64encode(data).decode("ascii")


def unb64(text: str) -> bytes:
    return base64.b64decode(text.encode("ascii"))


class AnalyzeRequest(BaseModel):
    image_id: str
    mask_png: str = Field(description="base64 indexed PNG, palette index = class id")
    denominator_mode: str = "whole_image"


class ContourReportOut(BaseModel):
    image_id: str
    coverage: dict[str, float]
    ratio_sp: Optional[float]
    denominator_mode: str


class AggregateRequest(BaseModel):
    reports: list[ContourReportOut]


class OverlayRequest(BaseModel):
    image_png: str
    mask_png: str
    alpha: float = 0.5


class OverlayResponse(BaseModel):
    overlay_png: str


class EvaluatePair(BaseModel):
    image_id: str
    pred_png: str
    truth_png: str


class EvaluateRequest(BaseModel):
    pairs: list[EvaluatePair]
    classes: list[int]
    macro: bool = False


class EvaluateResponse(BaseModel):
    per_class_iou: dict[int, Optional[float]]
    mean_iou: Optional[float]
    pixels_evaluated: int
    images: int
    macro_mean_iou: Optional[float] = None
    per_image: Optional[list[dict[str, Any]]] = None


class SplitRequest(BaseModel):
    manifest_csv: str
    ratios: tuple[float, float, float]
    seed: int

    @field_validator("seed")
    @classmethod
    def _seed_64bit(cls, v: int) -> int:
        if v.bit_length() > 64:
            raise ValueError("seed must fit in 64 bits")
        return v


class SplitResponse(BaseModel):
    seed: int
    ratios: list[float]
    train: list[str]
    val: list[str]
    test: list[str]


class AugmentStepIn(BaseModel):
    kind: str
    probability: float = 1.0
    params: dict[str, Any] = Field(default_factory=dict)


class AugmentSpecIn(BaseModel):
    steps: list[AugmentStepIn]
    base_seed: int = 0


class AugmentRequest(BaseModel):
    image_png: str
    mask_png: str
    sample_id: str
    spec: AugmentSpecIn


class AugmentResponse(BaseModel):
    image_png: str
    mask_png: str


class RasterizeRequest(BaseModel):
    annotation_json: str
    labels: dict[str, int] = Field(default_factory=dict)
    default_class: Optional[int] = None


class MaskResponse(BaseModel):
    mask_png: str


class InferRequest(BaseModel):
    image_png: str
    kind: str = "composite"  # primary | secondary | composite
    threshold: float = 0.5


class HealthResponse(BaseModel):
    status: str
    version: str
    models: dict[str, bool]
