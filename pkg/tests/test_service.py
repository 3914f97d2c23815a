import base64

import numpy as np
import pytest
import torch
from fastapi.testclient import TestClient

from clsr.core.image import RoiBox
from clsr.core.io import decode_png_bytes, encode_png_bytes
from clsr.flops import flops_estimate
from clsr.model import ClsrModel
from clsr.service import SessionStore, create_app

from conftest import rand_image, tiny_config


@pytest.fixture
def model():
    torch.manual_seed(0)
    cfg = tiny_config()
    cfg.service.max_sessions = 2
    cfg.service.default_pad = 4
    m = ClsrModel(cfg)
    m.eval()
    return m


@pytest.fixture
def client(model):
    return TestClient(create_app(model, model_hash="deadbeef"))


def png_b64(img):
    return base64.b64encode(encode_png_bytes(img)).decode("ascii")


def open_session(client, rng, h=36, w=36):
    img = rand_image(rng, h=h, w=w)
    resp = client.post("/v1/sessions", json={"image_png_b64": png_b64(img)})
    assert resp.status_code == 200, resp.text
    return img, resp.json()


def test_create_session_summary(client, rng):
    _, body = open_session(client, rng)
    assert set(body) >= {"session_id", "height", "width", "context_gflops", "post_gflops"}
    assert body["height"] == 36 and body["width"] == 36
    assert body["context_gflops"] > 0
    assert body["post_gflops"] > body["context_gflops"]


def test_same_image_two_sessions_distinct_ids(client, rng):
    img = rand_image(rng, h=36, w=36)
    r1 = client.post("/v1/sessions", json={"image_png_b64": png_b64(img)}).json()
    r2 = client.post("/v1/sessions", json={"image_png_b64": png_b64(img)}).json()
    assert r1["session_id"] != r2["session_id"]
    assert r1["context_gflops"] == r2["context_gflops"]


def test_restore_roi_roundtrip(client, model, rng):
    img, body = open_session(client, rng)
    sid = body["session_id"]
    resp = client.post(f"/v1/sessions/{sid}/roi",
                       json={"top": 6, "left": 6, "height": 12, "width": 12, "pad": 4})
    assert resp.status_code == 200
    out = resp.json()
    sr = decode_png_bytes(base64.b64decode(out["sr_png_b64"]))
    s = model.cfg.backbone.scale
    assert sr.shape == (3, 12 * s, 12 * s)
    assert out["scale"] == s
    assert out["roi_gflops"] > 0
    assert out["elapsed_ms"] >= 0

    # response equals a cold restoration up to 8-bit quantization
    decoded = decode_png_bytes(encode_png_bytes(img))  # what the server saw
    cold = model.restore(decoded, RoiBox(6, 6, 12, 12), pad=4)
    assert np.abs(sr - cold).max() <= 0.5 / 255 + 1e-6


def test_identical_boxes_identical_bytes(client, rng):
    _, body = open_session(client, rng)
    sid = body["session_id"]
    req = {"top": 0, "left": 0, "height": 12, "width": 12}
    a = client.post(f"/v1/sessions/{sid}/roi", json=req).json()["sr_png_b64"]
    b = client.post(f"/v1/sessions/{sid}/roi", json=req).json()["sr_png_b64"]
    assert a == b


def test_flops_accounting_additive(client, model, rng):
    _, body = open_session(client, rng)
    sid = body["session_id"]
    req = {"top": 2, "left": 2, "height": 12, "width": 12, "pad": 4}
    gflops = [client.post(f"/v1/sessions/{sid}/roi", json=req).json()["roi_gflops"]
              for _ in range(5)]
    assert all(g == gflops[0] for g in gflops)
    est = flops_estimate(model.cfg, 12, (36, 36), n_rois=5, pad=4)
    total = body["context_gflops"] + sum(gflops)
    assert total == pytest.approx(est.total / 1e9, rel=1e-9)


def test_store_accounting_exact(model, rng):
    store = SessionStore(model, max_sessions=4, idle_ttl_s=100, max_pixels=10_000)
    img = rand_image(rng, h=36, w=36)
    session = store.create(encode_png_bytes(img))
    from clsr.flops import roi_increment_flops

    for _ in range(5):
        session.roi_flops_spent += roi_increment_flops(model.cfg, 12, 12, 36, 36, 4)
    est = flops_estimate(model.cfg, 12, (36, 36), n_rois=5, pad=4)
    assert session.flops_spent.total == est.total  # exact integer equality


def test_unknown_session_404(client):
    resp = client.post("/v1/sessions/nope/roi",
                       json={"top": 0, "left": 0, "height": 8, "width": 8})
    assert resp.status_code == 404


def test_invalid_box_422(client, rng):
    _, body = open_session(client, rng)
    sid = body["session_id"]
    resp = client.post(f"/v1/sessions/{sid}/roi",
                       json={"top": 30, "left": 30, "height": 12, "width": 12})
    assert resp.status_code == 422


def test_bad_payload_400(client):
    resp = client.post("/v1/sessions", json={"image_png_b64": "bm90IGEgcG5n"})
    assert resp.status_code == 400
    resp = client.post("/v1/sessions", json={"image_png_b64": "!!!not-base64!!!"})
    assert resp.status_code == 400


def test_oversize_413(model, rng):
    model.cfg.service.max_pixels = 100
    client = TestClient(create_app(model))
    resp = client.post("/v1/sessions", json={"image_png_b64": png_b64(rand_image(rng, h=36, w=36))})
    assert resp.status_code == 413
    model.cfg.service.max_pixels = 4096 * 4096


def test_drop_idempotent(client, rng):
    _, body = open_session(client, rng)
    sid = body["session_id"]
    assert client.delete(f"/v1/sessions/{sid}").json() == {}
    assert client.delete(f"/v1/sessions/{sid}").status_code == 200
    resp = client.post(f"/v1/sessions/{sid}/roi",
                       json={"top": 0, "left": 0, "height": 8, "width": 8})
    assert resp.status_code == 404


def test_lru_eviction_cap_two(client, rng):
    ids = [open_session(client, rng)[1]["session_id"] for _ in range(3)]
    # cap is 2: the first (oldest-idle) session is gone
    resp = client.post(f"/v1/sessions/{ids[0]}/roi",
                       json={"top": 0, "left": 0, "height": 8, "width": 8})
    assert resp.status_code == 404
    for sid in ids[1:]:
        resp = client.post(f"/v1/sessions/{sid}/roi",
                           json={"top": 0, "left": 0, "height": 8, "width": 8})
        assert resp.status_code == 200


def test_healthz(client):
    body = client.get("/v1/healthz").json()
    assert body == {"status": "ok", "model_hash": "deadbeef"}


def test_concurrent_restores_match_serial(model, rng):
    import concurrent.futures

    store = SessionStore(model, max_sessions=4, idle_ttl_s=600, max_pixels=10**7)
    img = rand_image(rng, h=36, w=36)
    session = store.create(encode_png_bytes(img))
    boxes = [RoiBox(2 * i, 2 * i, 12, 12) for i in range(6)]

    def restore(box):
        return model.restore(session.context.squeeze(0).numpy(), box, pad=4,
                             artifacts=session.artifacts)

    serial = [restore(b) for b in boxes]
    with concurrent.futures.ThreadPoolExecutor(max_workers=4) as pool:
        parallel = list(pool.map(restore, boxes))
    for a, b in zip(serial, parallel):
        assert np.abs(a - b).max() < 1e-6
