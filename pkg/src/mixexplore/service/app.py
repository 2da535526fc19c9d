"""FastAPI service wrapping the core package.

Every endpoint is a thin adapter: parse/validate the request, call the
corresponding core operation, serialize its result. Shared artifacts
(dataset, model, embedding, indexes) are immutable after startup; sessions
are serialized per session id and fail fast with 409 when contended.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from ..dataset import Dataset, InputMixture, validate_mixture
from ..embedding import EmbeddingMap, INPUT_SPACE, OUTPUT_SPACE
from ..errors import MixExploreError, NotFoundError, ValidationError
from ..neighbors import NeighborHit, build_input_index, build_output_index, similarity_scores
from ..pathfinder import InterpolationPath
from ..sensitivity import SmoothGradConfig, smoothgrad
from ..session import (
    DEFAULT_BETA, SessionResources, SessionState, SessionStore,
    adjust_input, adjust_output_target, commit_step, free_pick,
    interpolate_to, search_initial, select_record, suggest,
)
from ..surrogate import SurrogateEnsemble
from . import schemas as sc

DEFAULT_K = 10
DEFAULT_PAGE_SIZE = 10000

_STATUS_BY_CODE = {
    "validation": 400,
    "schema": 400,
    "parse": 400,
    "not_found": 404,
    "session_busy": 409,
    "internal": 500,
}


@dataclass
class AppContext:
    dataset: Dataset
    ensemble: SurrogateEnsemble
    embeddings: dict[str, EmbeddingMap]
    resources: SessionResources
    store: SessionStore
    fingerprints: sc.Fingerprints
    default_k: int = DEFAULT_K


def build_context(
    dataset: Dataset,
    ensemble: SurrogateEnsemble,
    embedding_output: EmbeddingMap,
    embedding_input: EmbeddingMap | None = None,
    beta: float = DEFAULT_BETA,
    default_k: int = DEFAULT_K,
    model_fingerprint: str | None = None,
    embedding_fingerprint: str | None = None,
    session_log_dir: str | Path | None = None,
) -> AppContext:
    """Assemble indexes, session resources, and fingerprints for the service."""
    snap_rows = np.array([dataset.row_of(i) for i in embedding_output.ids], dtype=np.int64)
    resources = SessionResources(
        dataset=dataset,
        input_index=build_input_index(dataset),
        output_index=build_output_index(dataset),
        snap_index=build_output_index(dataset, snap_rows),
        embedding=embedding_output,
        ensemble=ensemble,
        beta=beta,
    )
    embeddings = {OUTPUT_SPACE: embedding_output}
    if embedding_input is not None:
        embeddings[INPUT_SPACE] = embedding_input
    fingerprints = sc.Fingerprints(
        dataset=dataset.fingerprint(),
        model=model_fingerprint or ensemble.fingerprint(),
        embedding=embedding_fingerprint or "",
    )
    return AppContext(
        dataset=dataset,
        ensemble=ensemble,
        embeddings=embeddings,
        resources=resources,
        store=SessionStore(resources, log_dir=session_log_dir),
        fingerprints=fingerprints,
        default_k=default_k,
    )


def _floats(arr) -> list[float]:
    return [float(v) for v in arr]


def _state_body(state: SessionState) -> sc.SessionStateBody:
    return sc.SessionStateBody(
        session_id=state.session_id,
        mixture=state.current_mixture.as_list(),
        record_id=state.current_record,
        adjustments={int(k): float(v) for k, v in state.pending_adjustments.items()},
        revision=state.revision,
    )


def _hit_bodies(ctx: AppContext, hits: list[NeighborHit]) -> list[sc.HitBody]:
    out = []
    for hit in hits:
        row = ctx.dataset.row_of(hit.id)
        out.append(sc.HitBody(
            id=hit.id,
            distance=hit.distance,
            input=_floats(ctx.dataset.inputs[row]),
            output=_floats(ctx.dataset.outputs[row]),
        ))
    return out


def _path_bodies(path: InterpolationPath) -> list[sc.PathStepBody]:
    return [
        sc.PathStepBody(
            lam=step.lam,
            input=step.input.as_list(),
            predicted=_floats(step.predicted),
            snapped_id=step.snapped_id,
            snap_distance=step.snap_distance,
            embed_xy=_floats(step.embed_xy),
        )
        for step in path.steps
    ]


def _page_bounds(total: int, page: int, page_size: int) -> tuple[int, int]:
    start = page * page_size
    return min(start, total), min(start + page_size, total)


def create_app(ctx: AppContext, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="mixexplore", version="0.1.0")

    @app.exception_handler(MixExploreError)
    async def _domain_error(request: Request, exc: MixExploreError):
        body = sc.ErrorBody(code=exc.code, message=str(exc), field=getattr(exc, "field", None))
        return JSONResponse(status_code=_STATUS_BY_CODE.get(exc.code, 500), content=body.model_dump())

    @app.exception_handler(RequestValidationError)
    async def _request_error(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        loc = ".".join(str(p) for p in first.get("loc", ()) if p != "body")
        body = sc.ErrorBody(code="validation", message=first.get("msg", "invalid request"), field=loc or None)
        return JSONResponse(status_code=400, content=body.model_dump())

    def envelope(req: dict) -> dict:
        return {"request": req, "fingerprints": ctx.fingerprints}

    @app.get("/api/meta", response_model=sc.MetaResponse)
    def meta():
        stats = ctx.dataset.stats
        return sc.MetaResponse(
            **envelope({}),
            n_records=len(ctx.dataset),
            input_names=list(ctx.dataset.schema.input_names),
            output_names=list(ctx.dataset.schema.output_names),
            stats=sc.StatsBody(
                out_mean=_floats(stats.out_mean),
                out_std=_floats(stats.out_std),
                out_min=_floats(stats.out_min),
                out_max=_floats(stats.out_max),
                in_min=_floats(stats.in_min),
                in_max=_floats(stats.in_max),
                constant_outputs=[bool(v) for v in stats.constant_outputs],
            ),
        )

    @app.post("/api/session", response_model=sc.SessionCreatedResponse)
    def create_session_endpoint(body: sc.CreateSessionRequest):
        state = ctx.store.create(body.seed)
        return sc.SessionCreatedResponse(
            **envelope(body.model_dump()),
            session_id=state.session_id,
            mixture=state.current_mixture.as_list(),
            revision=state.revision,
        )

    @app.get("/api/session/{session_id}", response_model=sc.StateResponse)
    def session_state(session_id: str):
        state = ctx.store.get(session_id)
        return sc.StateResponse(**envelope({"session_id": session_id}), state=_state_body(state))

    @app.post("/api/session/{session_id}/input", response_model=sc.MixtureResponse)
    def adjust_input_endpoint(session_id: str, body: sc.AdjustInputRequest):
        with ctx.store.exclusive(session_id) as state:
            adjust_input(ctx.resources, state, body.dim, body.value)
            return sc.MixtureResponse(
                **envelope(body.model_dump()),
                mixture=state.current_mixture.as_list(),
                revision=state.revision,
            )

    @app.post("/api/session/{session_id}/search", response_model=sc.HitsResponse)
    def search_endpoint(session_id: str, body: sc.SearchRequest):
        with ctx.store.exclusive(session_id) as state:
            hits = search_initial(ctx.resources, state, body.k or ctx.default_k)
            return sc.HitsResponse(**envelope(body.model_dump()), hits=_hit_bodies(ctx, hits))

    @app.post("/api/session/{session_id}/select", response_model=sc.StateResponse)
    def select_endpoint(session_id: str, body: sc.SelectRequest):
        with ctx.store.exclusive(session_id) as state:
            select_record(ctx.resources, state, body.record_id)
            return sc.StateResponse(**envelope(body.model_dump()), state=_state_body(state))

    @app.post("/api/session/{session_id}/target", response_model=sc.StateResponse)
    def target_endpoint(session_id: str, body: sc.TargetRequest):
        with ctx.store.exclusive(session_id) as state:
            adjust_output_target(ctx.resources, state, body.output_index, body.value)
            return sc.StateResponse(**envelope(body.model_dump()), state=_state_body(state))

    @app.post("/api/session/{session_id}/suggest", response_model=sc.HitsResponse)
    def suggest_endpoint(session_id: str, body: sc.SuggestRequest):
        with ctx.store.exclusive(session_id) as state:
            hits = suggest(ctx.resources, state, body.k or ctx.default_k, body.beta)
            return sc.HitsResponse(**envelope(body.model_dump()), hits=_hit_bodies(ctx, hits))

    @app.post("/api/session/{session_id}/interpolate", response_model=sc.InterpolateResponse)
    def interpolate_endpoint(session_id: str, body: sc.InterpolateRequest):
        with ctx.store.exclusive(session_id) as state:
            path = interpolate_to(ctx.resources, state, body.to_id, body.steps or 21)
            return sc.InterpolateResponse(**envelope(body.model_dump()), path=_path_bodies(path))

    @app.post("/api/session/{session_id}/commit", response_model=sc.StateResponse)
    def commit_endpoint(session_id: str, body: sc.CommitRequest):
        with ctx.store.exclusive(session_id) as state:
            commit_step(ctx.resources, state, body.step_index)
            return sc.StateResponse(**envelope(body.model_dump()), state=_state_body(state))

    @app.post("/api/session/{session_id}/pick", response_model=sc.StateResponse)
    def pick_endpoint(session_id: str, body: sc.PickRequest):
        with ctx.store.exclusive(session_id) as state:
            free_pick(ctx.resources, state, body.record_id)
            return sc.StateResponse(**envelope(body.model_dump()), state=_state_body(state))

    @app.get("/api/embedding", response_model=sc.EmbeddingResponse)
    def embedding_endpoint(
        space: str = Query(default=OUTPUT_SPACE),
        page: int = Query(default=0, ge=0),
        page_size: int = Query(default=DEFAULT_PAGE_SIZE, ge=1),
    ):
        emap = ctx.embeddings.get(space)
        if emap is None:
            raise NotFoundError(f"no {space!r} embedding is loaded")
        total = len(emap)
        start, stop = _page_bounds(total, page, page_size)
        return sc.EmbeddingResponse(
            **envelope({"space": space, "page": page, "page_size": page_size}),
            space=space,
            ids=[int(i) for i in emap.ids[start:stop]],
            xy=[_floats(c) for c in emap.coords[start:stop]],
            page=page,
            page_size=page_size,
            total=total,
        )

    @app.get("/api/point/{record_id}", response_model=sc.PointResponse)
    def point_endpoint(record_id: int, selected: int | None = Query(default=None)):
        row = ctx.dataset.row_of(record_id)
        emap = ctx.embeddings[OUTPUT_SPACE]
        xy = _floats(emap.coordinates_of(record_id)) if emap.has_id(record_id) else None
        similarity = None
        if selected is not None:
            ids, scores = similarity_scores(ctx.dataset, selected)
            similarity = float(scores[ctx.dataset.row_of(record_id)])
        return sc.PointResponse(
            **envelope({"id": record_id, "selected": selected}),
            id=record_id,
            input=_floats(ctx.dataset.inputs[row]),
            output=_floats(ctx.dataset.outputs[row]),
            embed_xy=xy,
            similarity_to_selection=similarity,
        )

    @app.post("/api/sensitivity", response_model=sc.SensitivityResponse)
    def sensitivity_endpoint(body: sc.SensitivityRequest):
        mixture = validate_mixture(body.mixture)
        defaults = SmoothGradConfig()
        config = SmoothGradConfig(
            n_samples=body.n_samples or defaults.n_samples,
            sigma=body.sigma or defaults.sigma,
            fd_step=defaults.fd_step,
            seed=body.seed if body.seed is not None else defaults.seed,
        )
        vector = smoothgrad(ctx.ensemble, mixture, body.output_index, config)
        return sc.SensitivityResponse(
            **envelope(body.model_dump()),
            output_index=vector.output_index,
            values=_floats(vector.values),
            tangent=_floats(vector.tangent),
            clamp_count=vector.clamp_count,
        )

    @app.get("/api/similarity", response_model=sc.SimilarityResponse)
    def similarity_endpoint(
        selected: int = Query(...),
        page: int = Query(default=0, ge=0),
        page_size: int = Query(default=DEFAULT_PAGE_SIZE, ge=1),
    ):
        ids, scores = similarity_scores(ctx.dataset, selected)
        total = len(ids)
        start, stop = _page_bounds(total, page, page_size)
        return sc.SimilarityResponse(
            **envelope({"selected": selected, "page": page, "page_size": page_size}),
            ids=[int(i) for i in ids[start:stop]],
            scores=_floats(scores[start:stop]),
            page=page,
            page_size=page_size,
            total=total,
        )

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
