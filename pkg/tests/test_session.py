import numpy as np
import pytest

from mixexplore.dataset import uniform_sample
from mixexplore.errors import NotFoundError, SessionBusyError, ValidationError
from mixexplore.neighbors import WeightedMetric
from mixexplore.session import (
    SessionStore, adjust_input, adjust_output_target, commit_step, create_session,
    free_pick, interpolate_to, read_log, replay, replay_log, search_initial,
    select_record, suggest, write_log,
)


def test_create_session_deterministic():
    a = create_session(123)
    b = create_session(123)
    assert np.array_equal(a.current_mixture.ratios, b.current_mixture.ratios)
    assert np.array_equal(a.current_mixture.ratios, uniform_sample(123).ratios)
    assert len(a.history) == 1
    assert abs(a.current_mixture.ratios.sum() - 1.0) <= 1e-9


def test_adjust_input_updates_and_clears_anchor(small_resources):
    state = create_session(5)
    select_record(small_resources, state, 10)
    assert state.current_record == 10
    adjust_input(small_resources, state, 0, 0.5)
    assert state.current_record is None
    assert state.current_mixture.ratios[0] == 0.5
    assert abs(state.current_mixture.ratios.sum() - 1.0) <= 1e-9


def test_adjust_chain_stays_on_simplex(small_resources):
    state = create_session(6)
    rng = np.random.default_rng(0)
    for _ in range(50):
        adjust_input(small_resources, state, int(rng.integers(6)), float(rng.random()))
        assert abs(state.current_mixture.ratios.sum() - 1.0) <= 1e-9


def test_search_initial_anchored_record_first(small_resources):
    state = create_session(7)
    select_record(small_resources, state, 42)
    hits = search_initial(small_resources, state, 5)
    assert hits[0].id == 42
    assert hits[0].distance == 0.0
    dists = [h.distance for h in hits]
    assert dists == sorted(dists)


def test_search_k_larger_than_dataset(small_resources):
    state = create_session(8)
    hits = search_initial(small_resources, state, len(small_resources.dataset) + 10)
    assert len(hits) == len(small_resources.dataset)


def test_select_unknown_id(small_resources):
    state = create_session(9)
    with pytest.raises(NotFoundError):
        select_record(small_resources, state, 10**9)


def test_select_idempotent(small_resources):
    state = create_session(10)
    select_record(small_resources, state, 3)
    first = state.current_mixture.ratios.copy()
    select_record(small_resources, state, 3)
    assert np.array_equal(state.current_mixture.ratios, first)
    assert state.current_record == 3


def test_target_requires_anchor(small_resources):
    state = create_session(11)
    with pytest.raises(ValidationError, match="select"):
        adjust_output_target(small_resources, state, 4, 1.0)


def test_target_overwrites(small_resources):
    state = create_session(12)
    select_record(small_resources, state, 1)
    adjust_output_target(small_resources, state, 4, 1.0)
    adjust_output_target(small_resources, state, 4, 2.0)
    assert state.pending_adjustments == {4: 2.0}


def test_suggest_without_adjustments_is_unit_metric_query(small_resources):
    state = create_session(13)
    select_record(small_resources, state, 25)
    hits = suggest(small_resources, state, 8)
    target = small_resources.dataset.outputs[small_resources.dataset.row_of(25)]
    expected = small_resources.output_index.query(
        target, WeightedMetric.unit(small_resources.stats), 8)
    assert [h.id for h in hits] == [h.id for h in expected]
    assert hits[0].id == 25 and hits[0].distance == 0.0


def test_suggest_boosts_adjusted_dims(small_resources):
    state = create_session(14)
    select_record(small_resources, state, 30)
    adjust_output_target(small_resources, state, 2, float(small_resources.dataset.outputs[40, 2]))
    hits = suggest(small_resources, state, 6, beta=4.0)
    target = small_resources.dataset.outputs[small_resources.dataset.row_of(30)].copy()
    target[2] = small_resources.dataset.outputs[40, 2]
    metric = WeightedMetric.boosted(small_resources.stats, [2], 4.0)
    expected = small_resources.output_index.query(target, metric, 6)
    assert [h.id for h in hits] == [h.id for h in expected]


def test_suggest_huge_beta_ranking_dominated_by_adjusted_dims(small_resources):
    ds = small_resources.dataset
    state = create_session(15)
    select_record(small_resources, state, 50)
    adjusted = [5, 9]
    for j in adjusted:
        adjust_output_target(small_resources, state, j, float(ds.outputs[77, j]))
    hits = suggest(small_resources, state, 10, beta=1e6)
    # oracle: with beta -> infinity the ordering must be non-decreasing in the
    # adjusted-dimension distance alone
    target = ds.outputs[ds.row_of(50)].copy()
    target[adjusted] = ds.outputs[77, adjusted]
    scales = small_resources.stats.out_scale
    def adjusted_distance(rid):
        row = ds.row_of(rid)
        return float(np.sqrt(sum(
            ((ds.outputs[row, j] - target[j]) / scales[j]) ** 2 for j in adjusted)))
    dists = [adjusted_distance(h.id) for h in hits]
    assert all(a <= b + 1e-9 for a, b in zip(dists, dists[1:]))


def test_suggest_requires_anchor(small_resources):
    state = create_session(16)
    with pytest.raises(ValidationError):
        suggest(small_resources, state, 5)


def test_interpolate_and_commit(small_resources):
    state = create_session(17)
    select_record(small_resources, state, 8)
    path = interpolate_to(small_resources, state, 90, n_steps=9)
    assert len(path) == 9
    assert path.from_id == 8 and path.to_id == 90
    mid = 4
    commit_step(small_resources, state, mid)
    assert state.current_record == path.steps[mid].snapped_id
    assert np.array_equal(state.current_mixture.ratios, path.steps[mid].input.ratios)
    assert state.pending_adjustments == {}


def test_commit_endpoints(small_resources):
    state = create_session(18)
    select_record(small_resources, state, 12)
    path = interpolate_to(small_resources, state, 64, n_steps=5)
    commit_step(small_resources, state, 4)  # lambda = 0: destination snap
    assert state.current_record == path.steps[4].snapped_id
    path2 = interpolate_to(small_resources, state, 12, n_steps=5)
    commit_step(small_resources, state, 0)  # lambda = 1: back to source snap
    assert state.current_record == path2.steps[0].snapped_id


def test_commit_out_of_range(small_resources):
    state = create_session(19)
    select_record(small_resources, state, 2)
    interpolate_to(small_resources, state, 3, n_steps=4)
    with pytest.raises(ValidationError):
        commit_step(small_resources, state, 4)


def test_commit_without_path(small_resources):
    state = create_session(20)
    with pytest.raises(ValidationError):
        commit_step(small_resources, state, 0)


def test_free_pick_is_select_with_own_kind(small_resources):
    state = create_session(21)
    free_pick(small_resources, state, 33)
    assert state.current_record == 33
    assert state.history[-1].kind == "free-pick"
    with pytest.raises(NotFoundError):
        free_pick(small_resources, state, 10**9)


# ---- replay ----

def _scripted_session(resources):
    state = create_session(99)
    adjust_input(resources, state, 1, 0.3)
    search_initial(resources, state, 5)
    hits = search_initial(resources, state, 1)
    select_record(resources, state, hits[0].id)
    adjust_output_target(resources, state, 6, 2.5)
    suggest(resources, state, 5)
    interpolate_to(resources, state, 111, n_steps=7)
    commit_step(resources, state, 3)
    return state


def test_replay_reproduces_state(small_resources):
    state = _scripted_session(small_resources)
    replayed = replay(small_resources, state.history)
    assert replayed.state_hash() == state.state_hash()
    assert np.array_equal(replayed.current_mixture.ratios, state.current_mixture.ratios)
    assert replayed.current_record == state.current_record
    assert replayed.pending_adjustments == state.pending_adjustments


def test_replay_log_roundtrip(tmp_path, small_resources):
    state = _scripted_session(small_resources)
    log = tmp_path / "session.jsonl"
    write_log(state, log)
    entries = read_log(log)
    assert [e.kind for e in entries] == [e.kind for e in state.history]
    replayed = replay_log(small_resources, log)
    assert replayed.state_hash() == state.state_hash()


def test_replay_requires_initial_entry(small_resources):
    state = _scripted_session(small_resources)
    with pytest.raises(ValidationError):
        replay(small_resources, state.history[1:])


def test_adjust_then_replay_matches(small_resources):
    state = create_session(55)
    adjust_input(small_resources, state, 0, 0.7)
    adjust_input(small_resources, state, 3, 0.1)
    replayed = replay(small_resources, state.history)
    assert np.array_equal(replayed.current_mixture.ratios, state.current_mixture.ratios)


# ---- store ----

def test_store_create_get_and_busy(small_resources):
    store = SessionStore(small_resources)
    state = store.create(seed=1)
    assert store.get(state.session_id) is state
    with pytest.raises(NotFoundError):
        store.get("nope")
    with store.exclusive(state.session_id):
        with pytest.raises(SessionBusyError):
            with store.exclusive(state.session_id):
                pass


def test_store_appends_replayable_log(small_resources, tmp_path):
    store = SessionStore(small_resources, log_dir=tmp_path / "logs")
    state = store.create(seed=77)
    with store.exclusive(state.session_id) as live:
        select_record(small_resources, live, 10)
    with store.exclusive(state.session_id) as live:
        adjust_input(small_resources, live, 1, 0.25)
    log = tmp_path / "logs" / f"{state.session_id}.jsonl"
    assert log.exists()
    replayed = replay_log(small_resources, log)
    assert replayed.state_hash() == state.state_hash()
