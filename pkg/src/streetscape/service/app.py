"""FastAPI application exposing the toolkit's operations.

Model-backed inference endpoints activate only when the app is created with
model configs (or the STREETSCAPE_PRIMARY_MODEL / STREETSCAPE_SECONDARY_MODEL
environment variables point at config files); everything else is stateless.
"""

from __future__ import annotations

import io
import os
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from PIL import Image

from .. import __version__
from ..analysis import ContourReport, DenominatorMode, aggregate, analyze, render_overlay
from ..augment import AugmentSpec, AugmentStep, Sample, apply_pipeline
from ..annotations import parse_annotation, rasterize
from ..dataset import load_manifest, split
from ..errors import BackendError, FormatError, StreetscapeError, ValidationError
from ..inference import (
    ModelConfig,
    predict_composite,
    predict_primary,
    predict_secondary,
)
from ..mask import CanonicalClass, LabelMask, cityscapes_to_canonical, load_mask_png, save_mask_png
from ..metrics import evaluate_pairs
from . import schemas as sc


def _decode_image(data_b64: str) -> np.ndarray:
    try:
        img = Image.open(io.BytesIO(sc.unb64(data_b64))).convert("RGB")
    except Exception as exc:
        raise FormatError(f"cannot decode image PNG: {exc}") from exc
    return np.asarray(img, dtype=np.uint8)


def _decode_mask(data_b64: str) -> LabelMask:
    return load_mask_png(sc.unb64(data_b64))


def _report_out(report: ContourReport) -> sc.ContourReportOut:
    return sc.ContourReportOut(
        image_id=report.image_id,
        coverage={c.name: v for c, v in report.coverage.items()},
        ratio_sp=report.ratio_sp,
        denominator_mode=report.denominator_mode.value,
    )


def _report_in(out: sc.ContourReportOut) -> ContourReport:
    return ContourReport(
        image_id=out.image_id,
        coverage={CanonicalClass[k]: v for k, v in out.coverage.items()},
        ratio_sp=out.ratio_sp,
        denominator_mode=DenominatorMode(out.denominator_mode),
    )


def create_app(
    primary_model: Optional[ModelConfig] = None,
    secondary_model: Optional[ModelConfig] = None,
) -> FastAPI:
    app = FastAPI(title="streetscape", version=__version__)
    state = {"primary": None, "secondary": None,
             "primary_cfg": primary_model, "secondary_cfg": secondary_model}

    for role, env in (("primary", "STREETSCAPE_PRIMARY_MODEL"),
                      ("secondary", "STREETSCAPE_SECONDARY_MODEL")):
        if state[f"{role}_cfg"] is None and os.environ.get(env):
            path = Path(os.environ[env])
            if not path.is_file():
                raise BackendError(f"model config not found: {path}")
            state[f"{role}_cfg"] = ModelConfig.from_json(path.read_text())

    def backend(role: str):
        cfg = state[f"{role}_cfg"]
        if cfg is None:
            raise HTTPException(503, detail=f"no {role} model configured on this server")
        if state[role] is None:
            state[role] = cfg.load_backend()
        return state[role]

    @app.exception_handler(StreetscapeError)
    async def _domain_error(request, exc: StreetscapeError):
        from fastapi.responses import JSONResponse

        status = 400 if isinstance(exc, (ValidationError, FormatError)) else 500
        return JSONResponse(status_code=status, content={"detail": str(exc)})

    @app.get("/health", response_model=sc.HealthResponse)
    def health():
        return sc.HealthResponse(
            status="ok",
            version=__version__,
            models={role: state[f"{role}_cfg"] is not None
                    for role in ("primary", "secondary")},
        )

    @app.post("/masks/analyze", response_model=sc.ContourReportOut)
    def masks_analyze(req: sc.AnalyzeRequest):
        mask = _decode_mask(req.mask_png)
        report = analyze(mask, req.image_id, DenominatorMode(req.denominator_mode))
        return _report_out(report)

    @app.post("/masks/aggregate")
    def masks_aggregate(req: sc.AggregateRequest):
        return aggregate([_report_in(r) for r in req.reports])

    @app.post("/masks/overlay", response_model=sc.OverlayResponse)
    def masks_overlay(req: sc.OverlayRequest):
        image = _decode_image(req.image_png)
        blended = render_overlay(image, _decode_mask(req.mask_png), alpha=req.alpha)
        buf = io.BytesIO()
        Image.fromarray(blended).save(buf, format="PNG")
        return sc.OverlayResponse(overlay_png=sc.b64(buf.getvalue()))

    @app.post("/masks/rasterize", response_model=sc.MaskResponse)
    def masks_rasterize(req: sc.RasterizeRequest):
        ann = parse_annotation(req.annotation_json)
        table = {k: CanonicalClass(v) for k, v in req.labels.items()}
        if not table:
            table = {}
        default = CanonicalClass(req.default_class) if req.default_class is not None else None
        mask = rasterize(ann, table, default=default)
        return sc.MaskResponse(mask_png=sc.b64(save_mask_png(mask)))

    @app.post("/metrics/evaluate", response_model=sc.EvaluateResponse)
    def metrics_evaluate(req: sc.EvaluateRequest):
        pairs = (
            (p.image_id, _decode_mask(p.pred_png), _decode_mask(p.truth_png))
            for p in req.pairs
        )
        result = evaluate_pairs(pairs, req.classes, macro=req.macro)
        if req.macro:
            for row in result["per_image"]:
                row["per_class_iou"] = {str(k): v for k, v in row["per_class_iou"].items()}
        return sc.EvaluateResponse(**result)

    @app.post("/dataset/split", response_model=sc.SplitResponse)
    def dataset_split(req: sc.SplitRequest):
        assignment = split(load_manifest(req.manifest_csv), req.ratios, req.seed)
        return sc.SplitResponse(
            seed=assignment.seed,
            ratios=list(assignment.ratios),
            train=sorted(assignment.train),
            val=sorted(assignment.val),
            test=sorted(assignment.test),
        )

    @app.post("/augment/apply", response_model=sc.AugmentResponse)
    def augment_apply(req: sc.AugmentRequest):
        sample = Sample(image=_decode_image(req.image_png), mask=_decode_mask(req.mask_png))
        spec = AugmentSpec(
            steps=tuple(
                AugmentStep(kind=st.kind, probability=st.probability, params=st.params)
                for st in req.spec.steps
            ),
            base_seed=req.spec.base_seed,
        )
        out = apply_pipeline(spec, sample, req.sample_id)
        buf = io.BytesIO()
        Image.fromarray(out.image).save(buf, format="PNG")
        return sc.AugmentResponse(
            image_png=sc.b64(buf.getvalue()),
            mask_png=sc.b64(save_mask_png(out.mask)),
        )

    @app.post("/inference/predict", response_model=sc.MaskResponse)
    def inference_predict(req: sc.InferRequest):
        image = _decode_image(req.image_png)
        cmap = cityscapes_to_canonical()
        if req.kind == "primary":
            mask = predict_primary(image, backend("primary"), cmap)
        elif req.kind == "secondary":
            cfg = state["secondary_cfg"]
            mask = predict_secondary(
                image, backend("secondary"), req.threshold,
                cfg.billboard_class if cfg else None,
            )
        elif req.kind == "composite":
            cfg = state["secondary_cfg"]
            mask = predict_composite(
                image, backend("primary"), backend("secondary"), cmap,
                req.threshold, cfg.billboard_class if cfg else None,
            )
        else:
            raise ValidationError(f"unknown inference kind {req.kind!r}")
        return sc.MaskResponse(mask_png=sc.b64(save_mask_png(mask)))

    return app


app = create_app()
