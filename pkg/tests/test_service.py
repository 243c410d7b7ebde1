import numpy as np
import pytest
from fastapi.testclient import TestClient

from streetscape.mask import CanonicalClass, LabelMask, load_mask_png, save_mask_png
from streetscape.service import create_app
from streetscape.service.schemas import b64, unb64

from conftest import random_image, random_mask

CC = CanonicalClass


@pytest.fixture
def client():
    return TestClient(create_app())


def png_image_b64(image):
    import io

    from PIL import Image

    buf = io.BytesIO()
    Image.fromarray(image).save(buf, format="PNG")
    return b64(buf.getvalue())


def test_health(client):
    body = client.get("/health").json()
    assert body["status"] == "ok"
    assert body["models"] == {"primary": False, "secondary": False}


def test_analyze_endpoint(client, rng):
    mask = LabelMask(np.full((10, 10), int(CC.PRIMARY), np.uint8))
    resp = client.post("/masks/analyze", json={
        "image_id": "a", "mask_png": b64(save_mask_png(mask)),
    })
    assert resp.status_code == 200
    body = resp.json()
    assert body["coverage"]["PRIMARY"] == 1.0
    assert body["ratio_sp"] == 0.0


def test_analyze_bad_mask_is_400(client):
    resp = client.post("/masks/analyze", json={"image_id": "a", "mask_png": b64(b"junk")})
    assert resp.status_code == 400


def test_aggregate_endpoint(client, rng):
    mask = random_mask(rng, 8, 8)
    report = client.post("/masks/analyze", json={
        "image_id": "a", "mask_png": b64(save_mask_png(mask)),
    }).json()
    summary = client.post("/masks/aggregate", json={"reports": [report, report]}).json()
    assert summary["images"] == 2


def test_overlay_endpoint(client, rng):
    image = random_image(rng, 6, 6)
    mask = LabelMask(np.zeros((6, 6), np.uint8))
    resp = client.post("/masks/overlay", json={
        "image_png": png_image_b64(image), "mask_png": b64(save_mask_png(mask)),
    })
    assert resp.status_code == 200

    import io

    from PIL import Image

    out = np.asarray(Image.open(io.BytesIO(unb64(resp.json()["overlay_png"]))))
    assert np.array_equal(out, image)


def test_rasterize_endpoint(client):
    ann = (
        '{"image_id": "x", "image_width": 8, "image_height": 4,'
        ' "shapes": [{"label": "billboard", "points": [[0,0],[4,0],[4,2],[0,2]]}]}'
    )
    resp = client.post("/masks/rasterize", json={
        "annotation_json": ann, "labels": {"billboard": 2},
    })
    mask = load_mask_png(unb64(resp.json()["mask_png"]))
    assert int((mask.data == 2).sum()) == 8


def test_evaluate_endpoint(client, rng):
    mask = random_mask(rng, 8, 8, ids=[0, 2])
    png = b64(save_mask_png(mask))
    resp = client.post("/metrics/evaluate", json={
        "pairs": [{"image_id": "a", "pred_png": png, "truth_png": png}],
        "classes": [0, 2],
        "macro": True,
    })
    body = resp.json()
    assert body["mean_iou"] == 1.0
    assert body["pixels_evaluated"] == 64
    assert body["macro_mean_iou"] == 1.0


def test_split_endpoint_and_validation(client):
    csv = "id,image_path,annotation_path\n" + "".join(
        f"i{k},p{k}.png,\n" for k in range(10)
    )
    body = client.post("/dataset/split", json={
        "manifest_csv": csv, "ratios": [0.6, 0.2, 0.2], "seed": 1,
    }).json()
    assert (len(body["train"]), len(body["val"]), len(body["test"])) == (6, 2, 2)
    resp = client.post("/dataset/split", json={
        "manifest_csv": csv, "ratios": [0.5, 0.2, 0.2], "seed": 1,
    })
    assert resp.status_code == 400
    assert "ratios" in resp.json()["detail"]


def test_augment_endpoint_deterministic(client, rng):
    image = random_image(rng, 12, 12)
    mask = random_mask(rng, 12, 12)
    payload = {
        "image_png": png_image_b64(image),
        "mask_png": b64(save_mask_png(mask)),
        "sample_id": "s1",
        "spec": {"base_seed": 7, "steps": [
            {"kind": "flip_h", "probability": 1.0},
            {"kind": "random_contrast", "probability": 1.0, "params": {"factor": [0.8, 1.2]}},
        ]},
    }
    a = client.post("/augment/apply", json=payload).json()
    b = client.post("/augment/apply", json=payload).json()
    assert a == b
    out_mask = load_mask_png(unb64(a["mask_png"]))
    assert out_mask == LabelMask(mask.data[:, ::-1])


def test_inference_unconfigured_is_503(client, rng):
    resp = client.post("/inference/predict", json={
        "image_png": png_image_b64(random_image(rng, 4, 4)), "kind": "composite",
    })
    assert resp.status_code == 503
