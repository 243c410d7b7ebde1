"""The export tool's model-config.json must be directly consumable by the
inference module (the packages' only shared interface)."""

import numpy as np
import pytest

torch = pytest.importorskip("torch")
model_export = pytest.importorskip("model_export")

from streetscape.inference import ModelConfig, predict_secondary
from streetscape.mask import CanonicalClass


class RedDetector(torch.nn.Module):
    def forward(self, x):
        red = x[:, 0:1]
        return torch.cat([-red * 6.0, red * 6.0], dim=1)


def test_exported_model_runs_through_inference(tmp_path):
    checkpoint = tmp_path / "net.pth"
    torch.save(RedDetector(), checkpoint)
    manifest = model_export.export(
        checkpoint, tmp_path / "net.pt", input_size=(8, 8),
        normalization={"mean": [0.5, 0.5, 0.5], "std": [1.0, 1.0, 1.0]},
    )
    assert manifest.valid
    cfg = ModelConfig.from_json((tmp_path / "model-config.json").read_text())
    backend = cfg.load_backend()
    image = np.zeros((8, 8, 3), np.uint8)
    image[:, :4, 0] = 255
    mask = predict_secondary(image, backend, billboard_class=cfg.billboard_class)
    assert (mask.data[:, :4] == int(CanonicalClass.SECONDARY)).all()
    assert (mask.data[:, 4:] == int(CanonicalClass.OTHER)).all()
