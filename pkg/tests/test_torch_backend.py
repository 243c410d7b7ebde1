"""End-to-end checks of the TorchScript model backend and model-config wiring."""

import json

import numpy as np
import pytest

torch = pytest.importorskip("torch")

from streetscape.inference import ModelConfig, predict_secondary
from streetscape.mask import CanonicalClass

from conftest import random_image

CC = CanonicalClass


class BrightnessHead(torch.nn.Module):
    """Billboard logit goes positive where the red channel is above mid-gray."""

    def forward(self, x):
        red = x[:, 0:1]
        return torch.cat([-red * 4.0, red * 4.0], dim=1)


@pytest.fixture
def model_config(tmp_path):
    path = tmp_path / "model.pt"
    torch.jit.script(BrightnessHead()).save(str(path))
    cfg = {
        "model_path": str(path),
        "label_space": [0, 1],
        "input_size": None,
        "normalization": {"mean": [0.5, 0.5, 0.5], "std": [1.0, 1.0, 1.0]},
        "billboard_class": 1,
    }
    cfg_path = tmp_path / "model-config.json"
    cfg_path.write_text(json.dumps(cfg))
    return cfg_path


def test_torchscript_backend_thresholds_by_brightness(model_config, rng):
    cfg = ModelConfig.from_json(model_config.read_text())
    backend = cfg.load_backend()
    image = np.zeros((6, 6, 3), np.uint8)
    image[:3, :, 0] = 255  # bright red top half
    mask = predict_secondary(image, backend, billboard_class=cfg.billboard_class)
    assert (mask.data[:3] == int(CC.SECONDARY)).all()
    assert (mask.data[3:] == int(CC.OTHER)).all()


def test_torchscript_backend_is_deterministic(model_config, rng):
    cfg = ModelConfig.from_json(model_config.read_text())
    backend = cfg.load_backend()
    image = random_image(rng, 8, 8)
    a = predict_secondary(image, backend, billboard_class=1)
    b = predict_secondary(image, backend, billboard_class=1)
    assert a == b


def test_cli_infer_with_model(model_config, tmp_path):
    from click.testing import CliRunner
    from PIL import Image

    from streetscape.cli import main
    from streetscape.mask import load_mask_png

    images = tmp_path / "images"
    images.mkdir()
    arr = np.zeros((4, 4, 3), np.uint8)
    arr[:, :, 0] = 255
    Image.fromarray(arr).save(images / "red.png")
    out_dir = tmp_path / "pred"
    result = CliRunner().invoke(main, [
        "infer", str(images), "--secondary-model", str(model_config),
        "--kind", "secondary", "--out-dir", str(out_dir),
    ])
    assert result.exit_code == 0, result.output
    mask = load_mask_png((out_dir / "red.png").read_bytes())
    assert (mask.data == int(CC.SECONDARY)).all()
