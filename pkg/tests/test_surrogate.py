import numpy as np
import pytest

from mixexplore import oracle, surrogate
from mixexplore.dataset import ColumnSchema, Dataset, compute_stats, validate_mixture
from mixexplore.errors import ValidationError
from mixexplore.surrogate import (
    BoostedModel, KnnRegressor, SurrogateEnsemble, TrainConfig,
    evaluate, holdout_view, train,
)

# mse can plateau at float precision; allow rounding-level slack only
MONOTONE_SLACK = 1e-12


def linear_spec():
    """All-linear oracle: dim j responds to coefficients drawn per dim."""
    rng = np.random.default_rng(10)
    surfaces = tuple(
        oracle.OutputSurface(kind=oracle.LINEAR, linear=rng.uniform(-3, 3, 6),
                             intercept=float(rng.uniform(-1, 1)))
        for _ in range(64)
    )
    return oracle.OracleSpec(surfaces=surfaces)


def test_constant_target_predicts_exactly():
    spec_surfaces = [oracle.OutputSurface(kind=oracle.CONSTANT, intercept=0.37)] * 64
    spec = oracle.OracleSpec(surfaces=tuple(spec_surfaces))
    ds = oracle.generate(spec, 200, seed=1)
    ens = train(ds, TrainConfig(n_trees=10, blend_gamma=1.0, seed=0))
    probe = oracle.sample_simplex(20, np.random.default_rng(2))
    preds = ens.predict_batch(probe)
    assert np.all(preds == 0.37)
    assert all(len(m.trees) == 0 for m in ens.boosted)


def test_linear_oracle_high_r2():
    ds = oracle.generate(linear_spec(), 5000, seed=4)
    ens = train(ds, TrainConfig(n_trees=80, seed=2))
    metrics = evaluate(ens, holdout_view(ds, ens))
    assert np.all(metrics["r2"] >= 0.99)


def test_training_mse_non_increasing(small_ensemble):
    mse = small_ensemble.training_mse_matrix()
    assert np.all(np.diff(mse, axis=1) <= MONOTONE_SLACK * np.maximum(mse[:, :1], 1e-30))


def test_gamma_one_is_boosted_only(small_dataset, fast_config):
    ens = train(small_dataset, TrainConfig(n_trees=10, max_depth=4, blend_gamma=1.0, seed=3))
    x = small_dataset.inputs[5:8]
    gbt = np.column_stack([m.predict_batch(x) for m in ens.boosted])
    assert np.array_equal(ens.predict_batch(x), gbt)


def test_gamma_zero_exact_match_returns_record(small_dataset):
    ens = train(small_dataset, TrainConfig(n_trees=5, max_depth=3, blend_gamma=0.0,
                                           knn_k=1, seed=3))
    # pick a row that is part of the training split
    rid = int(ens.train_row_ids[17])
    row = small_dataset.row_of(rid)
    pred = ens.predict(validate_mixture(small_dataset.inputs[row]))
    assert np.array_equal(pred, small_dataset.outputs[row])


def test_blend_is_elementwise_mean(small_dataset):
    ens = train(small_dataset, TrainConfig(n_trees=8, max_depth=3, blend_gamma=0.5, seed=3))
    x = oracle.sample_simplex(5, np.random.default_rng(0))
    gbt = np.column_stack([m.predict_batch(x) for m in ens.boosted])
    knn = ens.knn.predict_batch(x)
    assert np.allclose(ens.predict_batch(x), 0.5 * gbt + 0.5 * knn, rtol=0, atol=0)


def test_blend_bounds(small_ensemble):
    x = oracle.sample_simplex(50, np.random.default_rng(8))
    gbt = np.column_stack([m.predict_batch(x) for m in small_ensemble.boosted])
    knn = small_ensemble.knn.predict_batch(x)
    blend = small_ensemble.predict_batch(x)
    lo = np.minimum(gbt, knn) - 1e-12
    hi = np.maximum(gbt, knn) + 1e-12
    assert np.all(blend >= lo) and np.all(blend <= hi)


def test_predict_single_consistent(small_ensemble):
    x = validate_mixture(oracle.sample_simplex(1, np.random.default_rng(1))[0])
    full = small_ensemble.predict(x)
    for j in range(0, 64, 7):
        assert small_ensemble.predict_single(x, j) == full[j]


def test_removing_last_tree_decomposes(small_dataset):
    ens = train(small_dataset, TrainConfig(n_trees=12, max_depth=4, blend_gamma=1.0, seed=5))
    model = ens.boosted[3]
    x = oracle.sample_simplex(40, np.random.default_rng(4))
    full = model.predict_batch(x)
    truncated = BoostedModel(base_score=model.base_score, trees=model.trees[:-1],
                             learning_rate=model.learning_rate)
    partial = truncated.predict_batch(x)
    last = model.learning_rate * model.trees[-1].predict_batch(x)
    # prediction accumulates tree by tree, so re-adding the last term is bitwise
    assert np.array_equal(partial + last, full)
    assert np.allclose(full - partial, last, rtol=1e-9, atol=1e-12)


def test_tree_depth_capped(small_ensemble, fast_config):
    for model in small_ensemble.boosted:
        for tree in model.trees[:3]:
            assert tree.depth() <= fast_config.max_depth


def test_train_determinism(small_dataset, fast_config):
    a = train(small_dataset, fast_config)
    b = train(small_dataset, fast_config)
    assert a.serialize() == b.serialize()
    assert a.fingerprint() == b.fingerprint()


def test_serialization_roundtrip_bitwise(tmp_path, small_dataset, small_ensemble):
    path = tmp_path / "model.mixgb"
    saved_fp = small_ensemble.save(path)
    loaded = surrogate.load(path, small_dataset)
    assert loaded.fingerprint() == small_ensemble.fingerprint() == saved_fp
    probe = oracle.sample_simplex(100, np.random.default_rng(12))
    assert np.array_equal(loaded.predict_batch(probe), small_ensemble.predict_batch(probe))


def test_load_rejects_wrong_dataset(tmp_path, small_dataset, clean_dataset, small_ensemble):
    path = tmp_path / "model.mixgb"
    small_ensemble.save(path)
    with pytest.raises(ValidationError, match="fingerprint"):
        surrogate.load(path, clean_dataset)


def test_evaluate_memorizing_ensemble_r2_one(small_dataset):
    ens = train(small_dataset, TrainConfig(n_trees=3, max_depth=3, blend_gamma=0.0,
                                           knn_k=1, seed=7))
    # deliberately evaluate on training rows: exact-match kNN memorizes them
    rows = np.array([small_dataset.row_of(i) for i in ens.train_row_ids[:200]])
    subset = Dataset(schema=small_dataset.schema, ids=small_dataset.ids[rows].copy(),
                     inputs=small_dataset.inputs[rows].copy(),
                     outputs=small_dataset.outputs[rows].copy())
    metrics = evaluate(ens, subset)
    assert np.all(metrics["r2"] == 1.0)
    assert np.all(metrics["rmse"] == 0.0)


def test_evaluate_mean_predictor_r2_zero(small_dataset, small_ensemble):
    holdout = holdout_view(small_dataset, small_ensemble)
    base = [BoostedModel(base_score=float(holdout.outputs[:, j].mean()), trees=[],
                         learning_rate=0.1) for j in range(64)]
    mean_model = SurrogateEnsemble(
        boosted=base, knn=small_ensemble.knn, blend_gamma=1.0,
        train_config=small_ensemble.train_config,
        input_min=small_ensemble.input_min, input_max=small_ensemble.input_max,
        dataset_fingerprint="", train_row_ids=small_ensemble.train_row_ids,
        holdout_row_ids=small_ensemble.holdout_row_ids)
    metrics = evaluate(mean_model, holdout)
    nonconstant = ~(holdout.outputs.min(axis=0) == holdout.outputs.max(axis=0))
    assert np.allclose(metrics["r2"][nonconstant], 0.0, atol=1e-12)


def test_evaluate_empty_holdout_errors(small_ensemble, small_dataset):
    empty = Dataset(schema=small_dataset.schema, ids=np.arange(0),
                    inputs=np.zeros((0, 6)), outputs=np.zeros((0, 64)))
    with pytest.raises(ValidationError):
        evaluate(small_ensemble, empty)


def test_train_rejects_tiny_dataset(clean_dataset):
    tiny = Dataset(schema=clean_dataset.schema, ids=clean_dataset.ids[:4].copy(),
                   inputs=clean_dataset.inputs[:4].copy(),
                   outputs=clean_dataset.outputs[:4].copy())
    compute_stats(tiny)
    with pytest.raises(ValidationError):
        train(tiny, TrainConfig(knn_k=5))


def test_train_config_validation():
    with pytest.raises(ValidationError):
        TrainConfig(holdout_fraction=0.9)
    with pytest.raises(ValidationError):
        TrainConfig(learning_rate=0.0)
    with pytest.raises(ValidationError):
        TrainConfig(row_subsample=0.0)
    with pytest.raises(ValidationError):
        TrainConfig(blend_gamma=1.5)


def test_knn_exact_match_short_circuits_to_lowest_row():
    inputs = np.full((6, 6), 1 / 6.0)
    inputs[3] = [0.5, 0.5, 0, 0, 0, 0]
    outputs = np.arange(6, dtype=float)[:, None] * np.ones((6, 64))
    knn = KnnRegressor(inputs, outputs, k=3)
    pred = knn.predict_batch(np.array([[1 / 6.0] * 6]))
    # rows 0,1,2,4,5 are exact matches; the lowest row wins
    assert np.array_equal(pred[0], outputs[0])


def test_knn_is_inverse_distance_weighted():
    inputs = np.array([
        [1.0, 0, 0, 0, 0, 0],
        [0.0, 1, 0, 0, 0, 0],
        [0.0, 0, 1, 0, 0, 0],
    ])
    outputs = np.tile(np.array([[1.0], [2.0], [4.0]]), (1, 64))
    knn = KnnRegressor(inputs, outputs, k=2)
    q = np.array([[0.8, 0.2, 0, 0, 0, 0]])
    d0 = np.sqrt(0.2**2 * 2)
    d1 = np.sqrt(0.8**2 * 2)
    w0, w1 = 1 / (d0 + 1e-12), 1 / (d1 + 1e-12)
    expected = (w0 * 1.0 + w1 * 2.0) / (w0 + w1)
    assert np.allclose(knn.predict_batch(q)[0], expected, rtol=1e-12)


def test_holdout_rows_disjoint_from_training(small_ensemble):
    overlap = set(map(int, small_ensemble.train_row_ids)) & set(map(int, small_ensemble.holdout_row_ids))
    assert not overlap
    assert len(small_ensemble.holdout_row_ids) > 0
