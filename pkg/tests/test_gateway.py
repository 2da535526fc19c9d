import json

import numpy as np
import pytest
from fastapi.testclient import TestClient

from mixexplore.dataset import rescale_dimension, uniform_sample, validate_mixture
from mixexplore.neighbors import WeightedMetric, similarity_scores
from mixexplore.sensitivity import SmoothGradConfig, smoothgrad
from mixexplore.service.app import build_context, create_app


@pytest.fixture(scope="module")
def ctx(small_dataset, small_ensemble, small_embedding):
    return build_context(small_dataset, small_ensemble, small_embedding)


@pytest.fixture(scope="module")
def client(ctx):
    return TestClient(create_app(ctx))


def make_session(client, seed=7):
    resp = client.post("/api/session", json={"seed": seed})
    assert resp.status_code == 200
    return resp.json()


def test_meta(client, small_dataset):
    body = client.get("/api/meta").json()
    assert body["n_records"] == len(small_dataset)
    assert len(body["input_names"]) == 6
    assert len(body["output_names"]) == 64
    assert "request" in body and "fingerprints" in body
    assert body["fingerprints"]["dataset"] == small_dataset.fingerprint()
    assert body["stats"]["out_mean"] == [float(v) for v in small_dataset.stats.out_mean]


def test_create_session_mirrors_core(client):
    body = make_session(client, seed=123)
    assert body["mixture"] == uniform_sample(123).as_list()
    assert body["revision"] == 1
    assert body["request"] == {"seed": 123}


def test_adjust_input_mirrors_core(client):
    session = make_session(client, seed=5)
    resp = client.post(f"/api/session/{session['session_id']}/input",
                       json={"dim": 0, "value": 0.5})
    expected = rescale_dimension(uniform_sample(5), 0, 0.5)
    assert resp.json()["mixture"] == expected.as_list()


def test_search_mirrors_core(client, ctx):
    session = make_session(client, seed=9)
    hits = client.post(f"/api/session/{session['session_id']}/search", json={"k": 4}).json()["hits"]
    expected = ctx.resources.input_index.query(uniform_sample(9).ratios, 4)
    assert [h["id"] for h in hits] == [h.id for h in expected]
    assert [h["distance"] for h in hits] == [h.distance for h in expected]
    row = ctx.dataset.row_of(hits[0]["id"])
    assert hits[0]["input"] == [float(v) for v in ctx.dataset.inputs[row]]
    assert hits[0]["output"] == [float(v) for v in ctx.dataset.outputs[row]]


def test_select_target_suggest_flow(client, ctx):
    session = make_session(client, seed=11)
    sid = session["session_id"]
    state = client.post(f"/api/session/{sid}/select", json={"record_id": 20}).json()["state"]
    assert state["record_id"] == 20
    state = client.post(f"/api/session/{sid}/target",
                        json={"output_index": 3, "value": 1.5}).json()["state"]
    assert state["adjustments"] == {"3": 1.5}

    hits = client.post(f"/api/session/{sid}/suggest", json={"k": 6}).json()["hits"]
    target = ctx.dataset.outputs[ctx.dataset.row_of(20)].copy()
    target[3] = 1.5
    metric = WeightedMetric.boosted(ctx.dataset.stats, [3], ctx.resources.beta)
    expected = ctx.resources.output_index.query(target, metric, 6)
    assert [h["id"] for h in hits] == [h.id for h in expected]


def test_interpolate_and_commit_flow(client, ctx):
    session = make_session(client, seed=13)
    sid = session["session_id"]
    client.post(f"/api/session/{sid}/select", json={"record_id": 4})
    body = client.post(f"/api/session/{sid}/interpolate",
                       json={"to_id": 77, "steps": 9}).json()
    path = body["path"]
    assert len(path) == 9
    assert path[0]["lambda"] == 1.0 and path[-1]["lambda"] == 0.0
    for step in path:
        assert abs(sum(step["input"]) - 1.0) <= 1e-9
        assert len(step["predicted"]) == 64
        assert len(step["embed_xy"]) == 2

    mid = 4
    state = client.post(f"/api/session/{sid}/commit", json={"step_index": mid}).json()["state"]
    assert state["record_id"] == path[mid]["snapped_id"]
    assert state["mixture"] == path[mid]["input"]


def test_pick_endpoint(client):
    session = make_session(client, seed=15)
    state = client.post(f"/api/session/{session['session_id']}/pick",
                        json={"record_id": 33}).json()["state"]
    assert state["record_id"] == 33


def test_embedding_pagination_concat_equals_full(client, ctx):
    total = len(ctx.embeddings["output"])
    page_size = 700
    ids, xy = [], []
    page = 0
    while True:
        body = client.get(f"/api/embedding?space=output&page={page}&page_size={page_size}").json()
        assert body["total"] == total
        if not body["ids"]:
            break
        ids.extend(body["ids"])
        xy.extend(body["xy"])
        page += 1
    emap = ctx.embeddings["output"]
    assert ids == [int(i) for i in emap.ids]
    assert xy == [[float(a), float(b)] for a, b in emap.coords]


def test_embedding_unknown_space_404(client):
    assert client.get("/api/embedding?space=input").status_code == 404


def test_point_endpoint(client, ctx):
    body = client.get("/api/point/12?selected=40").json()
    row = ctx.dataset.row_of(12)
    assert body["input"] == [float(v) for v in ctx.dataset.inputs[row]]
    assert body["output"] == [float(v) for v in ctx.dataset.outputs[row]]
    _, scores = similarity_scores(ctx.dataset, 40)
    assert body["similarity_to_selection"] == float(scores[row])
    assert body["embed_xy"] == [float(v) for v in ctx.embeddings["output"].coordinates_of(12)]


def test_similarity_pagination(client, ctx):
    scores_all = []
    page = 0
    while True:
        body = client.get(f"/api/similarity?selected=8&page={page}&page_size=900").json()
        if not body["ids"]:
            break
        scores_all.extend(body["scores"])
        page += 1
    _, expected = similarity_scores(ctx.dataset, 8)
    assert scores_all == [float(v) for v in expected]


def test_sensitivity_endpoint_mirrors_core(client, ctx):
    mixture = uniform_sample(3).as_list()
    body = client.post("/api/sensitivity", json={
        "mixture": mixture, "output_index": 5, "n_samples": 20, "seed": 9,
    }).json()
    config = SmoothGradConfig(n_samples=20, seed=9)
    expected = smoothgrad(ctx.ensemble, validate_mixture(mixture), 5, config)
    assert body["values"] == [float(v) for v in expected.values]
    assert body["tangent"] == [float(v) for v in expected.tangent]
    assert body["clamp_count"] == expected.clamp_count
    assert abs(sum(body["tangent"])) <= 1e-9


def test_error_unknown_record_404(client):
    session = make_session(client, seed=21)
    resp = client.post(f"/api/session/{session['session_id']}/select",
                       json={"record_id": 10**8})
    assert resp.status_code == 404
    assert resp.json()["code"] == "not_found"


def test_error_unknown_session_404(client):
    resp = client.post("/api/session/does-not-exist/search", json={})
    assert resp.status_code == 404


def test_error_malformed_body_400(client):
    session = make_session(client, seed=22)
    resp = client.post(f"/api/session/{session['session_id']}/input",
                       json={"dim": 17, "value": 0.5})
    assert resp.status_code == 400
    body = resp.json()
    assert body["code"] == "validation"
    assert "dim" in (body.get("field") or "")


def test_error_target_without_anchor_400(client):
    session = make_session(client, seed=23)
    resp = client.post(f"/api/session/{session['session_id']}/target",
                       json={"output_index": 0, "value": 1.0})
    assert resp.status_code == 400
    assert "select" in resp.json()["message"]


def test_session_busy_409(client, ctx):
    session = make_session(client, seed=24)
    sid = session["session_id"]
    lock = ctx.store.lock(sid)
    assert lock.acquire(blocking=False)
    try:
        resp = client.post(f"/api/session/{sid}/search", json={"k": 1})
        assert resp.status_code == 409
        assert resp.json()["code"] == "session_busy"
    finally:
        lock.release()


def test_responses_carry_echo_and_fingerprints(client):
    session = make_session(client, seed=25)
    for path, payload in [
        (f"/api/session/{session['session_id']}/search", {"k": 2}),
        ("/api/sensitivity", {"mixture": uniform_sample(1).as_list(), "output_index": 0,
                              "n_samples": 5}),
    ]:
        body = client.post(path, json=payload).json()
        assert body["fingerprints"]["dataset"]
        assert body["fingerprints"]["model"]
        for key, value in payload.items():
            assert body["request"][key] == value


def test_json_numbers_roundtrip_full_precision(client, ctx):
    body = client.get("/api/point/5").json()
    row = ctx.dataset.row_of(5)
    assert np.array_equal(np.asarray(body["output"]), ctx.dataset.outputs[row])


def test_get_session_state(client):
    session = make_session(client, seed=30)
    body = client.get(f"/api/session/{session['session_id']}").json()
    assert body["state"]["mixture"] == session["mixture"]
    assert body["state"]["revision"] == 1
