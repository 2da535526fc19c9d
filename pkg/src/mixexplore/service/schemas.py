"""Pydantic request/response models for the JSON API.

Every response embeds an echo of the parsed request and the server's
artifact fingerprints, so clients can verify what they talked to.
"""

from __future__ import annotations

from pydantic import BaseModel, Field


class Fingerprints(BaseModel):
    dataset: str
    model: str
    embedding: str


class Envelope(BaseModel):
    request: dict
    fingerprints: Fingerprints


class ErrorBody(BaseModel):
    code: str
    message: str
    field: str | None = None


# ---- requests ----

class CreateSessionRequest(BaseModel):
    seed: int | None = None


class AdjustInputRequest(BaseModel):
    dim: int = Field(ge=0, le=5)
    value: float = Field(ge=0.0, le=1.0)


class SearchRequest(BaseModel):
    k: int | None = Field(default=None, ge=1)


class SelectRequest(BaseModel):
    record_id: int = Field(ge=0)


class TargetRequest(BaseModel):
    output_index: int = Field(ge=0, le=63)
    value: float


class SuggestRequest(BaseModel):
    k: int | None = Field(default=None, ge=1)
    beta: float | None = Field(default=None, ge=0.0)


class InterpolateRequest(BaseModel):
    to_id: int = Field(ge=0)
    steps: int | None = Field(default=None, ge=2)


class CommitRequest(BaseModel):
    step_index: int = Field(ge=0)


class PickRequest(BaseModel):
    record_id: int = Field(ge=0)


class SensitivityRequest(BaseModel):
    mixture: list[float] = Field(min_length=6, max_length=6)
    output_index: int = Field(ge=0, le=63)
    n_samples: int | None = Field(default=None, ge=1)
    sigma: float | None = Field(default=None, gt=0.0)
    seed: int | None = None


# ---- response payloads ----

class SessionStateBody(BaseModel):
    session_id: str
    mixture: list[float]
    record_id: int | None
    adjustments: dict[int, float]
    revision: int


class SessionCreatedResponse(Envelope):
    session_id: str
    mixture: list[float]
    revision: int


class MixtureResponse(Envelope):
    mixture: list[float]
    revision: int


class StateResponse(Envelope):
    state: SessionStateBody


class HitBody(BaseModel):
    id: int
    distance: float
    input: list[float]
    output: list[float]


class HitsResponse(Envelope):
    hits: list[HitBody]


class PathStepBody(BaseModel):
    lam: float = Field(serialization_alias="lambda")
    input: list[float]
    predicted: list[float]
    snapped_id: int
    snap_distance: float
    embed_xy: list[float]


class InterpolateResponse(Envelope):
    path: list[PathStepBody]


class EmbeddingResponse(Envelope):
    space: str
    ids: list[int]
    xy: list[list[float]]
    page: int
    page_size: int
    total: int


class PointResponse(Envelope):
    id: int
    input: list[float]
    output: list[float]
    embed_xy: list[float] | None
    similarity_to_selection: float | None = None


class SensitivityResponse(Envelope):
    output_index: int
    values: list[float]
    tangent: list[float]
    clamp_count: int


class SimilarityResponse(Envelope):
    ids: list[int]
    scores: list[float]
    page: int
    page_size: int
    total: int


class StatsBody(BaseModel):
    out_mean: list[float]
    out_std: list[float]
    out_min: list[float]
    out_max: list[float]
    in_min: list[float]
    in_max: list[float]
    constant_outputs: list[bool]


class MetaResponse(Envelope):
    n_records: int
    input_names: list[str]
    output_names: list[str]
    stats: StatsBody
