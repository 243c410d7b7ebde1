"""Convert a PyTorch segmentation checkpoint to a TorchScript file plus the
model-config JSON the analysis service consumes, verifying numerical parity
between the original and exported model on sample images.

Accepted checkpoint flavors:
  - a TorchScript archive (re-exported at the fixed input size),
  - a pickled nn.Module,
  - a bare state_dict together with an --arch builder name.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import torch
from torch import nn

PARITY_TOLERANCE = 1e-3
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
N_PARITY_IMAGES = 3


class ExportError(Exception):
    pass


class ParityError(ExportError):
    """Exported model diverges from the source checkpoint beyond tolerance."""


@dataclass
class ExportManifest:
    source_checkpoint: str
    exported_path: str
    input_size: tuple[int, int]  # (W, H)
    normalization: dict
    format: str
    opset: Optional[int]  # retained for exchange formats that version operators
    channels: int
    parity: float
    valid: bool

    def validate(self) -> None:
        if self.parity > PARITY_TOLERANCE:
            raise ParityError(
                f"max-abs-diff {self.parity:.3e} exceeds tolerance {PARITY_TOLERANCE:.0e}"
            )
        if not Path(self.exported_path).is_file():
            raise ExportError(f"exported model missing: {self.exported_path}")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "ExportManifest":
        doc = json.loads(text)
        doc["input_size"] = tuple(doc["input_size"])
        return cls(**doc)


class _ScoreHead(nn.Module):
    """Normalizes heads that return {"out": scores} (torchvision style) to a tensor."""

    def __init__(self, model: nn.Module):
        super().__init__()
        self.model = model

    def forward(self, x):
        y = self.model(x)
        if isinstance(y, dict):
            y = y["out"]
        return y


def _build_arch(name: str, num_classes: int) -> nn.Module:
    if name == "deeplabv3_resnet50":
        from torchvision.models.segmentation import deeplabv3_resnet50

        return deeplabv3_resnet50(weights=None, weights_backbone=None,
                                  num_classes=num_classes, aux_loss=False)
    raise ExportError(f"unknown architecture {name!r}")


def load_checkpoint(
    path: str | Path,
    arch: Optional[str] = None,
    num_classes: Optional[int] = None,
) -> nn.Module:
    path = Path(path)
    if not path.is_file():
        raise ExportError(f"checkpoint not found: {path}")
    try:
        model = torch.jit.load(str(path), map_location="cpu")
        model.eval()
        return model
    except Exception:
        pass  # not a TorchScript archive
    try:
        obj = torch.load(str(path), map_location="cpu", weights_only=False)
    except Exception as exc:
        raise ExportError(f"cannot load checkpoint {path}: {exc}") from exc
    if isinstance(obj, nn.Module):
        obj.eval()
        return obj
    if isinstance(obj, dict):
        state = obj.get("state_dict", obj)
        if arch is None or num_classes is None:
            raise ExportError(
                "checkpoint is a state_dict; --arch and --num-classes are required"
            )
        model = _build_arch(arch, num_classes)
        model.load_state_dict(state)
        model.eval()
        return model
    raise ExportError(f"unsupported checkpoint content: {type(obj).__name__}")


def _parity_inputs(input_size: tuple[int, int]) -> torch.Tensor:
    w, h = input_size
    gen = torch.Generator().manual_seed(0)
    return torch.randn(N_PARITY_IMAGES, 3, h, w, generator=gen)


def export(
    checkpoint_path: str | Path,
    out_path: str | Path,
    input_size: tuple[int, int],
    arch: Optional[str] = None,
    num_classes: Optional[int] = None,
    normalization: Optional[dict] = None,
    billboard_class: Optional[int] = None,
) -> ExportManifest:
    """Export at a fixed input size; writes out_path, a manifest JSON beside it,
    and a model-config.json matching the analysis service's schema."""
    out_path = Path(out_path)
    if len(input_size) != 2 or any(d < 1 for d in input_size):
        raise ExportError(f"input size must be positive (W, H), got {input_size}")
    model = _ScoreHead(load_checkpoint(checkpoint_path, arch, num_classes))
    model.eval()
    w, h = input_size
    example = torch.zeros(1, 3, h, w)
    try:
        with torch.no_grad():
            reference_out = model(example)
            scripted = torch.jit.trace(model, example)
    except Exception as exc:
        raise ExportError(f"tracing failed: {exc}") from exc
    channels = int(reference_out.shape[1])
    out_path.parent.mkdir(parents=True, exist_ok=True)
    scripted.save(str(out_path))

    reloaded = torch.jit.load(str(out_path), map_location="cpu")
    reloaded.eval()
    inputs = _parity_inputs(input_size)
    with torch.no_grad():
        diffs = [
            float((model(x[None]) - reloaded(x[None])).abs().max()) for x in inputs
        ]
    parity = max(diffs)

    normalization = normalization or {"mean": list(IMAGENET_MEAN), "std": list(IMAGENET_STD)}
    manifest = ExportManifest(
        source_checkpoint=str(checkpoint_path),
        exported_path=str(out_path),
        input_size=(w, h),
        normalization=normalization,
        format="torchscript",
        opset=None,
        channels=channels,
        parity=parity,
        valid=parity <= PARITY_TOLERANCE,
    )
    manifest.validate()
    out_path.with_suffix(".manifest.json").write_text(manifest.to_json())

    if billboard_class is None and channels == 2:
        billboard_class = 1
    model_config = {
        "model_path": str(out_path),
        "label_space": list(range(channels)),
        "input_size": [w, h],
        "normalization": normalization,
        "billboard_class": billboard_class,
    }
    (out_path.parent / "model-config.json").write_text(json.dumps(model_config, indent=2))
    return manifest
