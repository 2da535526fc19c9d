"""Record real API responses as fixtures for the frontend test suite.

Builds a small deterministic stack (the first record's input is pinned to the
canonical drag-rescale mixture), serves it in-process, scripts one session,
and stores every raw response body under frontend/tests/fixtures/.

Run from the repository root:  python scripts/record_ui_fixtures.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from mixexplore import oracle
from mixexplore.dataset import ColumnSchema, Dataset, compute_stats
from mixexplore.embedding import TsneConfig, embed_dataset
from mixexplore.service.app import build_context, create_app
from mixexplore.surrogate import TrainConfig, train

FIXTURES = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures"

CANONICAL = np.array([0.2, 0.16, 0.16, 0.16, 0.16, 0.16])


def build_stack():
    spec = oracle.with_noise_fraction(oracle.default_spec(2), 0.01)
    base = oracle.generate(spec, 300, seed=6)
    inputs = base.inputs.copy()
    inputs[0] = CANONICAL
    outputs = base.outputs.copy()
    outputs[0] = oracle.analytic_output(spec, CANONICAL)
    ds = Dataset(schema=ColumnSchema.default(), ids=base.ids.copy(),
                 inputs=inputs, outputs=outputs)
    compute_stats(ds)
    ensemble = train(ds, TrainConfig(n_trees=8, max_depth=3, seed=1))
    emap = embed_dataset(ds, "output", TsneConfig(
        perplexity=12.0, n_iter=200, theta=0.0, seed=3, subsample_cap=1000))
    return build_context(ds, ensemble, emap)


def main() -> int:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    ctx = build_stack()
    client = TestClient(create_app(ctx))

    def record(name: str, response) -> dict:
        assert response.status_code == 200, (name, response.text)
        (FIXTURES / f"{name}.json").write_text(response.text + "\n")
        print(f"recorded {name}.json")
        return response.json()

    record("meta", client.get("/api/meta"))
    session = record("session", client.post("/api/session", json={"seed": 5}))
    sid = session["session_id"]

    record("search_initial", client.post(f"/api/session/{sid}/search", json={"k": 10}))
    select = record("select", client.post(f"/api/session/{sid}/select", json={"record_id": 0}))
    record("search_anchored", client.post(f"/api/session/{sid}/search", json={"k": 10}))
    record("drag", client.post(f"/api/session/{sid}/input", json={"dim": 0, "value": 0.5}))

    # re-anchor for the output flow (the drag detached the record)
    record("reselect", client.post(f"/api/session/{sid}/select", json={"record_id": 0}))
    target_value = select["state"]["mixture"] and ctx.dataset.outputs[0, 3] + 0.5
    target = record("target", client.post(
        f"/api/session/{sid}/target", json={"output_index": 3, "value": float(target_value)}))
    suggest = record("suggest", client.post(f"/api/session/{sid}/suggest", json={"k": 8}))
    to_id = next(h["id"] for h in suggest["hits"] if h["id"] != 0)

    interp = record("interpolate", client.post(
        f"/api/session/{sid}/interpolate", json={"to_id": to_id, "steps": 21}))
    record("commit", client.post(f"/api/session/{sid}/commit", json={"step_index": 10}))

    interp9 = record("interpolate9", client.post(
        f"/api/session/{sid}/interpolate", json={"to_id": 0, "steps": 9}))

    state = record("state", client.get(f"/api/session/{sid}"))
    record("sensitivity", client.post("/api/sensitivity", json={
        "mixture": state["state"]["mixture"], "output_index": 3, "seed": 1}))

    record("embedding_page0", client.get("/api/embedding?space=output&page=0&page_size=200"))
    record("embedding_page1", client.get("/api/embedding?space=output&page=1&page_size=200"))
    record("embedding_full", client.get("/api/embedding?space=output&page=0&page_size=10000"))
    record("similarity", client.get("/api/similarity?selected=0&page=0&page_size=10000"))

    points = {}
    snapped_ids = sorted({s["snapped_id"] for s in interp9["path"]})
    for rid in snapped_ids:
        resp = client.get(f"/api/point/{rid}")
        assert resp.status_code == 200
        points[str(rid)] = resp.json()
    (FIXTURES / "points.json").write_text(json.dumps(points) + "\n")
    print(f"recorded points.json ({len(points)} snapped records)")

    # sanity: canonical drag produced the documented mixture
    drag = json.loads((FIXTURES / "drag.json").read_text())
    mix = drag["mixture"]
    assert mix[0] == 0.5 and all(abs(v - 0.1) < 1e-12 for v in mix[1:]), mix
    print("canonical drag verified:", mix)
    return 0


if __name__ == "__main__":
    sys.exit(main())
