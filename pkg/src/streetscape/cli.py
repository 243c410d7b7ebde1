"""Command-line interface: a thin client over the HTTP service.

By default commands talk to an in-process instance of the FastAPI app through
an ASGI transport (no server needs to be running); pass --server URL to use a
deployed one. Files live on the client side: commands read local inputs, ship
them to the service, and write the responses back to disk.

Exit codes: 0 success, 1 environment/I-O failure, 2 user/validation error.
"""

from __future__ import annotations

import functools
import io
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import click
import httpx
from PIL import Image

from .analysis import CSV_HEADER
from .service.app import create_app
from .service.schemas import b64, unb64
from .inference import ModelConfig

IMAGE_EXTS = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}


class CommandError(Exception):
    def __init__(self, exit_code: int, message: str):
        super().__init__(message)
        self.exit_code = exit_code


def _read_bytes(path: Path) -> bytes:
    try:
        return path.read_bytes()
    except OSError as exc:
        raise CommandError(1, f"cannot read {path}: {exc.strerror or exc}") from exc


def _read_text(path: Path) -> str:
    return _read_bytes(path).decode("utf-8")


def _write(path: Path, data: bytes | str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if isinstance(data, str):
            path.write_text(data)
        else:
            path.write_bytes(data)
    except OSError as exc:
        raise CommandError(1, f"cannot write {path}: {exc.strerror or exc}") from exc


def _load_image_b64(path: Path) -> str:
    # Normalize any input format to RGB PNG for the wire.
    try:
        img = Image.open(io.BytesIO(_read_bytes(path))).convert("RGB")
    except CommandError:
        raise
    except Exception as exc:
        raise CommandError(2, f"cannot decode image {path}: {exc}") from exc
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return b64(buf.getvalue())


class ServiceClient:
    def __init__(self, server: str | None, primary_model: Path | None = None,
                 secondary_model: Path | None = None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=120.0)
        else:
            configs = {}
            for role, path in (("primary_model", primary_model),
                               ("secondary_model", secondary_model)):
                if path is not None:
                    if not path.is_file():
                        raise CommandError(1, f"model config not found: {path}")
                    configs[role] = ModelConfig.from_json(_read_text(path))
            # In-process mode: drive the ASGI app directly, no server needed.
            from fastapi.testclient import TestClient

            self._client = TestClient(create_app(**configs), raise_server_exceptions=False)

    def post(self, path: str, payload: dict) -> dict:
        try:
            resp = self._client.post(path, json=payload)
        except httpx.HTTPError as exc:
            raise CommandError(1, f"service request failed: {exc}") from exc
        if resp.status_code >= 400:
            try:
                detail = resp.json().get("detail", resp.text)
            except ValueError:
                detail = resp.text
            # 503 = endpoint needs a model that was not configured: user error.
            code = 2 if resp.status_code < 500 or resp.status_code == 503 else 1
            raise CommandError(code, f"{path}: {detail}")
        return resp.json()


def _run(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            fn(*args, **kwargs)
        except CommandError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(exc.exit_code)

    return wrapper


def _parse_ratios(text: str) -> tuple[float, float, float]:
    parts = text.split(":") if ":" in text else text.split(",")
    try:
        values = tuple(float(p) for p in parts)
    except ValueError:
        raise CommandError(2, f"ratios must be numeric, got {text!r}") from None
    if len(values) != 3:
        raise CommandError(2, f"ratios need exactly three components, got {text!r}")
    return values


def _files_by_stem(directory: Path, exts: set[str]) -> dict[str, Path]:
    if not directory.is_dir():
        raise CommandError(1, f"directory not found: {directory}")
    return {p.stem: p for p in sorted(directory.iterdir())
            if p.suffix.lower() in exts and p.is_file()}


def _parallel(jobs: int, items, worker):
    """Run worker over items, preserving deterministic (sorted-input) order."""
    if jobs <= 1:
        return [worker(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, items))


@click.group()
@click.option("--server", default=None, help="Base URL of a running service; default runs in-process.")
@click.option("--jobs", default=1, show_default=True, help="Parallel workers for batch commands.")
@click.option("--verbose", is_flag=True, help="Print per-file progress.")
@click.pass_context
def main(ctx, server, jobs, verbose):
    """Streetscape aesthetics toolkit."""
    ctx.obj = {"server": server, "jobs": max(1, jobs), "verbose": verbose}


def _client(ctx, primary_model=None, secondary_model=None) -> ServiceClient:
    return ServiceClient(ctx.obj["server"], primary_model, secondary_model)


@main.command()
@click.argument("manifest", type=click.Path(path_type=Path))
@click.option("--ratios", default="0.68:0.12:0.2", show_default=True)
@click.option("--seed", type=int, required=True)
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.pass_context
@_run
def split(ctx, manifest: Path, ratios, seed, out):
    """Deterministic train/val/test split of a manifest CSV."""
    if not manifest.is_file():
        raise CommandError(1, f"manifest file not found: {manifest}")
    result = _client(ctx).post("/dataset/split", {
        "manifest_csv": _read_text(manifest),
        "ratios": _parse_ratios(ratios),
        "seed": seed,
    })
    if out:
        _write(out, json.dumps(result, indent=2))
    click.echo(f"{len(result['train'])} {len(result['val'])} {len(result['test'])}")


@main.command()
@click.argument("pred_dir", type=click.Path(path_type=Path))
@click.argument("truth_dir", type=click.Path(path_type=Path))
@click.option("--classes", default="0,1,2,3,4", show_default=True,
              help="Comma-separated class ids to evaluate.")
@click.option("--macro", is_flag=True, help="Also report per-image (macro) IoU.")
@click.option("--secondary-only", is_flag=True, help="Headline the billboard-class IoU.")
@click.option("--out", type=click.Path(path_type=Path), default=None)
@click.option("--macro-csv", type=click.Path(path_type=Path), default=None)
@click.pass_context
@_run
def evaluate(ctx, pred_dir: Path, truth_dir: Path, classes, macro, secondary_only, out, macro_csv):
    """Mean IoU of predicted vs ground-truth mask directories (paired by stem)."""
    preds = _files_by_stem(pred_dir, {".png"})
    truths = _files_by_stem(truth_dir, {".png"})
    unmatched = sorted(set(preds) ^ set(truths))
    if unmatched:
        shown = ", ".join(unmatched[:10])
        raise CommandError(2, f"{len(unmatched)} unmatched id(s): {shown}")
    if not preds:
        raise CommandError(2, "no inputs: prediction directory has no .png masks")
    pairs = [
        {"image_id": stem, "pred_png": b64(_read_bytes(preds[stem])),
         "truth_png": b64(_read_bytes(truths[stem]))}
        for stem in sorted(preds)
    ]
    class_ids = [int(c) for c in classes.split(",")]
    result = _client(ctx).post("/metrics/evaluate", {
        "pairs": pairs, "classes": class_ids, "macro": macro,
    })
    if out:
        _write(out, json.dumps(result, indent=2))
    if macro_csv and macro:
        lines = ["image_id,mean_iou"]
        for r in result["per_image"]:
            value = "" if r["mean_iou"] is None else f"{r['mean_iou']:.6f}"
            lines.append(f"{r['image_id']},{value}")
        _write(macro_csv, "\n".join(lines) + "\n")
    if secondary_only:
        iou = result["per_class_iou"].get("2")
        click.echo(f"secondary_iou={'undefined' if iou is None else f'{iou:.4f}'}")
    mean = result["mean_iou"]
    click.echo(f"mean_iou={'undefined' if mean is None else f'{mean:.4f}'}")


@main.command()
@click.argument("input_dir", type=click.Path(path_type=Path))
@click.option("--out-dir", type=click.Path(path_type=Path), required=True)
@click.option("--mode", type=click.Choice(["whole_image", "non_sky_road"]),
              default="whole_image", show_default=True)
@click.option("--overlay", is_flag=True, help="Write overlay PNGs (needs --images-dir in mask mode).")
@click.option("--images-dir", type=click.Path(path_type=Path), default=None)
@click.option("--primary-model", type=click.Path(path_type=Path), default=None)
@click.option("--secondary-model", type=click.Path(path_type=Path), default=None)
@click.pass_context
@_run
def analyze(ctx, input_dir: Path, out_dir: Path, mode, overlay, images_dir,
            primary_model, secondary_model):
    """Coverage fractions and S/P ratio per image; CSV + JSON summary.

    INPUT_DIR holds canonical mask PNGs, or images when model configs are given
    (masks are then inferred first).
    """
    infer_mode = primary_model is not None or secondary_model is not None
    client = _client(ctx, primary_model, secondary_model)
    if infer_mode:
        inputs = _files_by_stem(input_dir, IMAGE_EXTS)
    else:
        inputs = _files_by_stem(input_dir, {".png"})
    if not inputs:
        raise CommandError(2, f"no inputs in {input_dir}")
    images = _files_by_stem(images_dir, IMAGE_EXTS) if images_dir else {}

    def one(stem: str):
        if infer_mode:
            image_png = _load_image_b64(inputs[stem])
            mask_png = client.post("/inference/predict", {
                "image_png": image_png, "kind": "composite",
            })["mask_png"]
        else:
            image_png = None
            mask_png = b64(_read_bytes(inputs[stem]))
        report = client.post("/masks/analyze", {
            "image_id": stem, "mask_png": mask_png, "denominator_mode": mode,
        })
        overlay_png = None
        if overlay:
            if image_png is None:
                if stem not in images:
                    raise CommandError(2, f"--overlay needs an image for {stem} (use --images-dir)")
                image_png = _load_image_b64(images[stem])
            overlay_png = client.post("/masks/overlay", {
                "image_png": image_png, "mask_png": mask_png,
            })["overlay_png"]
        if ctx.obj["verbose"]:
            click.echo(f"analyzed {stem}", err=True)
        return stem, report, overlay_png, mask_png

    results = _parallel(ctx.obj["jobs"], sorted(inputs), one)
    rows = [CSV_HEADER]
    for stem, report, overlay_png, mask_png in results:
        cov = report["coverage"]
        ratio = report["ratio_sp"]
        rows.append(",".join([
            stem,
            *(f"{100.0 * cov.get(k, 0.0):.4f}"
              for k in ("PRIMARY", "SECONDARY", "SKY", "ROAD", "OTHER", "IGNORE")),
            "" if ratio is None else f"{100.0 * ratio:.4f}",
        ]))
        if overlay_png:
            _write(out_dir / "overlays" / f"{stem}.png", unb64(overlay_png))
        if infer_mode:
            _write(out_dir / "masks" / f"{stem}.png", unb64(mask_png))
    _write(out_dir / "report.csv", "\n".join(rows) + "\n")
    summary = client.post("/masks/aggregate", {"reports": [r for _, r, _, _ in results]})
    _write(out_dir / "summary.json", json.dumps(summary, indent=2))
    click.echo(f"analyzed {len(results)} image(s) -> {out_dir}")


@main.command()
@click.argument("manifest", type=click.Path(path_type=Path))
@click.argument("spec_path", type=click.Path(path_type=Path))
@click.option("--seed", type=int, required=True)
@click.option("--out-dir", type=click.Path(path_type=Path), required=True)
@click.pass_context
@_run
def augment(ctx, manifest: Path, spec_path: Path, seed, out_dir: Path):
    """Materialize augmented copies of the manifest's image/annotation pairs."""
    from .augment import AugmentSpec
    from .dataset import load_manifest
    from .errors import StreetscapeError

    if not manifest.is_file():
        raise CommandError(1, f"manifest file not found: {manifest}")
    if not spec_path.is_file():
        raise CommandError(1, f"augment spec not found: {spec_path}")
    try:
        spec = AugmentSpec.from_json(_read_text(spec_path))
        entries = load_manifest(_read_text(manifest)).entries
    except StreetscapeError as exc:
        raise CommandError(2, str(exc)) from exc
    client = _client(ctx)
    root = manifest.parent
    spec_doc = json.loads(spec.to_json())
    spec_doc["base_seed"] = seed

    def one(entry):
        image_path = root / entry.image_path
        image_bytes = _read_bytes(image_path)
        image_png = _load_image_b64(image_path)
        mask_bytes = None
        if entry.annotation_path:
            ann_path = root / entry.annotation_path
            if ann_path.suffix.lower() == ".json":
                mask_png = client.post("/masks/rasterize", {
                    "annotation_json": _read_text(ann_path),
                    "labels": {"billboard": 2, "sign": 2},
                    "default_class": 2,
                })["mask_png"]
            else:
                mask_bytes = _read_bytes(ann_path)
                mask_png = b64(mask_bytes)
        else:
            # No annotation: augment against an all-OTHER background mask.
            with Image.open(io.BytesIO(image_bytes)) as im:
                w, h = im.size
            blank = Image.new("L", (w, h), 0)
            buf = io.BytesIO()
            blank.save(buf, format="PNG")
            mask_png = b64(buf.getvalue())
        result = client.post("/augment/apply", {
            "image_png": image_png, "mask_png": mask_png,
            "sample_id": entry.id, "spec": spec_doc,
        })
        out_image = out_dir / entry.image_path
        out_mask = out_dir / f"{Path(entry.image_path).with_suffix('').as_posix()}_mask.png"
        # Copy originals verbatim when augmentation was a no-op so outputs are
        # byte-identical, not just pixel-identical.
        if result["image_png"] == image_png and image_path.suffix.lower() == ".png":
            _write(out_image, image_bytes)
        else:
            _write(out_image.with_suffix(".png"), unb64(result["image_png"]))
        if mask_bytes is not None and result["mask_png"] == b64(mask_bytes):
            _write(out_mask, mask_bytes)
        else:
            _write(out_mask, unb64(result["mask_png"]))
        if ctx.obj["verbose"]:
            click.echo(f"augmented {entry.id}", err=True)
        return entry.id

    done = _parallel(ctx.obj["jobs"], list(entries), one)
    click.echo(f"augmented {len(done)} sample(s) -> {out_dir}")


@main.command()
@click.argument("image_dir", type=click.Path(path_type=Path))
@click.option("--primary-model", type=click.Path(path_type=Path), default=None)
@click.option("--secondary-model", type=click.Path(path_type=Path), default=None)
@click.option("--kind", type=click.Choice(["primary", "secondary", "composite"]),
              default="composite", show_default=True)
@click.option("--threshold", default=0.5, show_default=True)
@click.option("--out-dir", type=click.Path(path_type=Path), required=True)
@click.pass_context
@_run
def infer(ctx, image_dir: Path, primary_model, secondary_model, kind, threshold, out_dir: Path):
    """Run segmentation models over an image directory; writes canonical mask PNGs."""
    client = _client(ctx, primary_model, secondary_model)
    images = _files_by_stem(image_dir, IMAGE_EXTS)
    if not images:
        raise CommandError(2, f"no inputs in {image_dir}")

    def one(stem: str):
        mask_png = client.post("/inference/predict", {
            "image_png": _load_image_b64(images[stem]),
            "kind": kind, "threshold": threshold,
        })["mask_png"]
        _write(out_dir / f"{stem}.png", unb64(mask_png))
        if ctx.obj["verbose"]:
            click.echo(f"inferred {stem}", err=True)
        return stem

    done = _parallel(ctx.obj["jobs"], sorted(images), one)
    click.echo(f"inferred {len(done)} image(s) -> {out_dir}")


@main.command()
@click.argument("image_dir", type=click.Path(path_type=Path))
@click.argument("mask_dir", type=click.Path(path_type=Path))
@click.option("--alpha", default=0.5, show_default=True)
@click.option("--out-dir", type=click.Path(path_type=Path), required=True)
@click.pass_context
@_run
def overlay(ctx, image_dir: Path, mask_dir: Path, alpha, out_dir: Path):
    """Blend masks over images (facades blue, billboards red); paired by stem."""
    images = _files_by_stem(image_dir, IMAGE_EXTS)
    masks = _files_by_stem(mask_dir, {".png"})
    both = sorted(set(images) & set(masks))
    if not both:
        raise CommandError(2, "no image/mask pairs found")
    client = _client(ctx)

    def one(stem: str):
        result = client.post("/masks/overlay", {
            "image_png": _load_image_b64(images[stem]),
            "mask_png": b64(_read_bytes(masks[stem])),
            "alpha": alpha,
        })
        _write(out_dir / f"{stem}.png", unb64(result["overlay_png"]))
        return stem

    done = _parallel(ctx.obj["jobs"], both, one)
    click.echo(f"rendered {len(done)} overlay(s) -> {out_dir}")


if __name__ == "__main__":
    main()
