"""The iterative exploration workflow: a replayable session state machine.

A session alternates between input-space search and output-space steering:
sample or adjust a mixture, search nearby real records, anchor on one, set
output targets, ask for re-weighted suggestions, interpolate toward a
candidate, and commit an intermediate step. Every mutation appends a history
entry carrying just the operation arguments, so replaying the history over a
fresh session reproduces the final state exactly.
"""

from __future__ import annotations

import hashlib
import json
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset, InputMixture, N_OUTPUTS, rescale_dimension, uniform_sample
from .embedding import EmbeddingMap
from .errors import NotFoundError, SessionBusyError, ValidationError
from .neighbors import InputIndex, NeighborHit, OutputIndex, WeightedMetric, query_input
from .pathfinder import DEFAULT_STEPS, InterpolationPath, trace_path
from .surrogate import SurrogateEnsemble

DEFAULT_BETA = 4.0


@dataclass(frozen=True)
class HistoryEntry:
    kind: str
    payload: dict
    timestamp: float

    def to_json(self) -> str:
        return json.dumps(
            {"kind": self.kind, "payload": self.payload, "timestamp": self.timestamp},
            sort_keys=True,
        )


@dataclass
class SessionState:
    session_id: str
    seed: int
    current_mixture: InputMixture
    current_record: int | None = None
    pending_adjustments: dict[int, float] = field(default_factory=dict)
    history: list[HistoryEntry] = field(default_factory=list)
    last_path: InterpolationPath | None = None

    @property
    def revision(self) -> int:
        return len(self.history)

    def state_hash(self) -> str:
        """Hash of the replay-relevant state (timestamps excluded)."""
        h = hashlib.sha256()
        h.update(self.current_mixture.ratios.tobytes())
        h.update(str(self.current_record).encode())
        h.update(json.dumps(sorted(self.pending_adjustments.items())).encode())
        h.update(str(self.revision).encode())
        return h.hexdigest()


@dataclass
class SessionResources:
    """Shared immutable context every session operates against."""

    dataset: Dataset
    input_index: InputIndex
    output_index: OutputIndex          # full dataset: suggestion queries
    snap_index: OutputIndex            # embedded subset: path snapping
    embedding: EmbeddingMap
    ensemble: SurrogateEnsemble
    beta: float = DEFAULT_BETA

    @property
    def stats(self):
        return self.dataset.stats


def _append(state: SessionState, kind: str, payload: dict) -> HistoryEntry:
    entry = HistoryEntry(kind=kind, payload=payload, timestamp=time.time())
    state.history.append(entry)
    return entry


def create_session(seed: int, session_id: str | None = None) -> SessionState:
    state = SessionState(
        session_id=session_id or uuid.uuid4().hex,
        seed=int(seed),
        current_mixture=uniform_sample(seed),
    )
    _append(state, "initial-search", {"seed": int(seed)})
    return state


def adjust_input(resources: SessionResources, state: SessionState, dim: int, value: float) -> SessionState:
    state.current_mixture = rescale_dimension(state.current_mixture, dim, value)
    state.current_record = None  # mixture no longer corresponds to a real record
    _append(state, "adjust-input", {"dim": int(dim), "value": float(value)})
    return state


def search_initial(resources: SessionResources, state: SessionState, k: int) -> list[NeighborHit]:
    hits = query_input(resources.input_index, state.current_mixture, k)
    _append(state, "search", {"k": int(k)})
    return hits


def select_record(resources: SessionResources, state: SessionState, record_id: int) -> SessionState:
    row = resources.dataset.row_of(record_id)  # raises NotFoundError for unknown ids
    state.current_record = int(resources.dataset.ids[row])
    state.current_mixture = InputMixture(resources.dataset.inputs[row])
    state.pending_adjustments = {}
    _append(state, "select-record", {"record_id": int(record_id)})
    return state


def free_pick(resources: SessionResources, state: SessionState, record_id: int) -> SessionState:
    """Anchor on a record chosen directly in the manifold view."""
    row = resources.dataset.row_of(record_id)
    state.current_record = int(resources.dataset.ids[row])
    state.current_mixture = InputMixture(resources.dataset.inputs[row])
    state.pending_adjustments = {}
    _append(state, "free-pick", {"record_id": int(record_id)})
    return state


def adjust_output_target(resources: SessionResources, state: SessionState,
                         output_index: int, target_value: float) -> SessionState:
    if state.current_record is None:
        raise ValidationError(
            "no record selected: run an initial search and select a record "
            "before adjusting output targets")
    if not 0 <= output_index < N_OUTPUTS:
        raise ValidationError(f"output index must be in 0..{N_OUTPUTS - 1}, got {output_index}")
    state.pending_adjustments[int(output_index)] = float(target_value)
    _append(state, "adjust-output", {"output_index": int(output_index), "value": float(target_value)})
    return state


def suggestion_target(resources: SessionResources, state: SessionState) -> np.ndarray:
    """Current record's outputs overwritten at the adjusted dimensions."""
    if state.current_record is None:
        raise ValidationError("no record selected: suggestions need an anchor record")
    row = resources.dataset.row_of(state.current_record)
    target = resources.dataset.outputs[row].copy()
    for j, v in state.pending_adjustments.items():
        target[j] = v
    return target


def suggest(resources: SessionResources, state: SessionState, k: int,
            beta: float | None = None) -> list[NeighborHit]:
    """Re-weighted kNN over outputs, emphasizing the adjusted dimensions."""
    beta = resources.beta if beta is None else float(beta)
    target = suggestion_target(resources, state)
    metric = WeightedMetric.boosted(resources.stats, state.pending_adjustments.keys(), beta)
    hits = resources.output_index.query(target, metric, k)
    _append(state, "suggest", {"k": int(k), "beta": beta})
    return hits


def interpolate_to(resources: SessionResources, state: SessionState, to_id: int,
                   n_steps: int = DEFAULT_STEPS) -> InterpolationPath:
    row = resources.dataset.row_of(to_id)
    x1 = InputMixture(resources.dataset.inputs[row])
    path = trace_path(
        resources.ensemble, resources.snap_index, resources.embedding,
        x0=state.current_mixture, x1=x1,
        n_steps=n_steps, from_id=state.current_record, to_id=int(to_id),
    )
    state.last_path = path
    _append(state, "interpolate", {"to_id": int(to_id), "n_steps": int(n_steps)})
    return path


def commit_step(resources: SessionResources, state: SessionState, step_index: int) -> SessionState:
    if state.last_path is None:
        raise ValidationError("no interpolation path to commit from")
    path = state.last_path
    if not 0 <= step_index < len(path.steps):
        raise ValidationError(f"step index {step_index} out of range 0..{len(path.steps) - 1}")
    step = path.steps[step_index]
    state.current_record = int(step.snapped_id)
    state.current_mixture = step.input
    state.pending_adjustments = {}
    _append(state, "commit-step", {"step_index": int(step_index)})
    return state


_REPLAYERS = {
    "adjust-input": lambda res, st, p: adjust_input(res, st, p["dim"], p["value"]),
    "search": lambda res, st, p: search_initial(res, st, p["k"]),
    "select-record": lambda res, st, p: select_record(res, st, p["record_id"]),
    "free-pick": lambda res, st, p: free_pick(res, st, p["record_id"]),
    "adjust-output": lambda res, st, p: adjust_output_target(res, st, p["output_index"], p["value"]),
    "suggest": lambda res, st, p: suggest(res, st, p["k"], p.get("beta")),
    "interpolate": lambda res, st, p: interpolate_to(res, st, p["to_id"], p["n_steps"]),
    "commit-step": lambda res, st, p: commit_step(res, st, p["step_index"]),
}


def replay(resources: SessionResources, entries: list[HistoryEntry],
           session_id: str = "replay") -> SessionState:
    """Fold recorded history over a fresh session; deterministic by construction."""
    if not entries or entries[0].kind != "initial-search":
        raise ValidationError("history must start with the initial-search entry")
    state = create_session(entries[0].payload["seed"], session_id=session_id)
    for entry in entries[1:]:
        handler = _REPLAYERS.get(entry.kind)
        if handler is None:
            raise ValidationError(f"unknown history entry kind {entry.kind!r}")
        handler(resources, state, entry.payload)
    return state


def write_log(state: SessionState, path: str | Path) -> None:
    """Line-delimited JSON history, replayable via `replay_log`."""
    with open(path, "w", encoding="utf-8") as fh:
        for entry in state.history:
            fh.write(entry.to_json() + "\n")


def read_log(path: str | Path) -> list[HistoryEntry]:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            entries.append(HistoryEntry(
                kind=raw["kind"], payload=raw["payload"], timestamp=raw.get("timestamp", 0.0)))
    return entries


def replay_log(resources: SessionResources, path: str | Path) -> SessionState:
    return replay(resources, read_log(path))


class SessionStore:
    """In-memory session registry with per-session mutual exclusion.

    Distinct sessions proceed fully in parallel; concurrent operations on one
    session fail fast with SessionBusyError rather than queueing. With a
    log_dir set, each session appends its history to `<session_id>.jsonl`
    for later replay.
    """

    def __init__(self, resources: SessionResources, log_dir: str | Path | None = None):
        self.resources = resources
        self.log_dir = Path(log_dir) if log_dir else None
        if self.log_dir:
            self.log_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict[str, SessionState] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._logged: dict[str, int] = {}
        self._registry_lock = threading.Lock()

    def create(self, seed: int | None = None) -> SessionState:
        if seed is None:
            seed = int(np.random.default_rng().integers(0, 2**31 - 1))
        state = create_session(seed)
        with self._registry_lock:
            self._sessions[state.session_id] = state
            self._locks[state.session_id] = threading.Lock()
            self._logged[state.session_id] = 0
        self.flush_log(state)
        return state

    def flush_log(self, state: SessionState) -> None:
        """Append any history entries not yet written to the session's log."""
        if self.log_dir is None:
            return
        done = self._logged.get(state.session_id, 0)
        if done >= len(state.history):
            return
        path = self.log_dir / f"{state.session_id}.jsonl"
        with open(path, "a", encoding="utf-8") as fh:
            for entry in state.history[done:]:
                fh.write(entry.to_json() + "\n")
        self._logged[state.session_id] = len(state.history)

    def get(self, session_id: str) -> SessionState:
        state = self._sessions.get(session_id)
        if state is None:
            raise NotFoundError(f"session {session_id} does not exist")
        return state

    def lock(self, session_id: str) -> threading.Lock:
        self.get(session_id)
        return self._locks[session_id]

    def exclusive(self, session_id: str):
        """Context manager: acquire the session's lock or raise SessionBusyError."""
        store = self

        class _Guard:
            def __enter__(self):
                self._lock = store.lock(session_id)
                if not self._lock.acquire(blocking=False):
                    raise SessionBusyError(f"session {session_id} has an operation in flight")
                return store.get(session_id)

            def __exit__(self, *exc):
                try:
                    store.flush_log(store.get(session_id))
                finally:
                    self._lock.release()
                return False

        return _Guard()
