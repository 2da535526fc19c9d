"""Per-output surrogate ensemble: histogram gradient-boosted trees blended with kNN.

One boosted model is fit per output dimension with squared-error loss and
histogram-based greedy splits; a single shared kNN regressor anchors
predictions to real training rows. The blend is convex:

    predict(x)[j] = gamma * boosted_j(x) + (1 - gamma) * knn(x)[j]

Training is deterministic for a fixed seed: each dimension draws from its own
RNG stream derived from (seed, dimension), so a parallel fit would produce the
same ensemble as the sequential one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import Dataset, InputMixture, N_INPUTS, N_OUTPUTS, compute_stats
from .errors import ParseError, ValidationError
from .storage import pack_container, read_container, write_container

MODEL_MAGIC = b"MIXSGB01"
_KNN_EPS = 1e-12
_KNN_CHUNK = 256


@dataclass
class TrainConfig:
    n_trees: int = 200
    max_depth: int = 6
    learning_rate: float = 0.1
    histogram_bins: int = 64
    min_samples_leaf: int = 20
    row_subsample: float = 0.8
    holdout_fraction: float = 0.1
    knn_k: int = 5
    blend_gamma: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1 or self.histogram_bins < 2:
            raise ValidationError("n_trees, max_depth must be >= 1 and histogram_bins >= 2")
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValidationError("learning_rate must be in (0, 1]")
        if self.min_samples_leaf < 1 or self.knn_k < 1:
            raise ValidationError("min_samples_leaf and knn_k must be >= 1")
        if not 0.0 < self.row_subsample <= 1.0:
            raise ValidationError("row_subsample must be in (0, 1]")
        if not 0.0 < self.holdout_fraction <= 0.5:
            raise ValidationError("holdout_fraction must be in (0, 0.5]")
        if not 0.0 <= self.blend_gamma <= 1.0:
            raise ValidationError("blend_gamma must be in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees, "max_depth": self.max_depth,
            "learning_rate": self.learning_rate, "histogram_bins": self.histogram_bins,
            "min_samples_leaf": self.min_samples_leaf, "row_subsample": self.row_subsample,
            "holdout_fraction": self.holdout_fraction, "knn_k": self.knn_k,
            "blend_gamma": self.blend_gamma, "seed": self.seed,
        }


@dataclass
class RegressionTree:
    """Flat binary tree: feature < 0 marks a leaf; route left iff x[f] <= threshold."""

    feature: np.ndarray    # (n_nodes,) int32
    threshold: np.ndarray  # (n_nodes,) float64
    left: np.ndarray       # (n_nodes,) int32
    right: np.ndarray      # (n_nodes,) int32
    value: np.ndarray      # (n_nodes,) float64

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int32)
        while True:
            feat = self.feature[node]
            live = feat >= 0
            if not live.any():
                break
            f = np.where(live, feat, 0)
            go_left = X[np.arange(X.shape[0]), f] <= self.threshold[node]
            nxt = np.where(go_left, self.left[node], self.right[node])
            node = np.where(live, nxt, node)
        return self.value[node]

    def depth(self) -> int:
        def walk(i: int) -> int:
            if self.feature[i] < 0:
                return 0
            return 1 + max(walk(int(self.left[i])), walk(int(self.right[i])))
        return walk(0)


@dataclass
class BoostedModel:
    """Additive tree ensemble: predict(x) = base_score + learning_rate * sum(tree(x))."""

    base_score: float
    trees: list[RegressionTree]
    learning_rate: float
    train_mse: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        out = np.full(X.shape[0], self.base_score, dtype=np.float64)
        for tree in self.trees:
            out += self.learning_rate * tree.predict_batch(X)
        return out


class _Binner:
    """Quantile bin edges per feature; shared by all 64 per-dimension fits."""

    def __init__(self, X: np.ndarray, n_bins: int):
        self.edges: list[np.ndarray] = []
        qs = np.linspace(0.0, 1.0, n_bins + 1)[1:-1]
        for d in range(X.shape[1]):
            self.edges.append(np.unique(np.quantile(X[:, d], qs)))
        self.n_bins = max(max((len(e) + 1 for e in self.edges), default=1), 2)

    def bin(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(X.shape, dtype=np.int64)
        for d, edges in enumerate(self.edges):
            out[:, d] = np.searchsorted(edges, X[:, d], side="left")
        return out


def _grow_tree(
    binned: np.ndarray,       # (m, 6) int64 over all training rows
    residual: np.ndarray,     # (m,)
    sub_rows: np.ndarray,     # subsample row positions used for structure search
    binner: _Binner,
    max_depth: int,
    min_leaf: int,
) -> tuple[RegressionTree, np.ndarray]:
    """Grow one tree: structure on the subsample, leaf values refit on all rows.

    Refitting leaf values as full-set residual means makes every boosting round
    a non-increasing step on the full training MSE regardless of subsampling.
    Returns the tree and the leaf-node assignment of every training row.
    """
    n_feat = binned.shape[1]
    n_bins = binner.n_bins
    feature = [-1]
    threshold = [0.0]
    split_bin = [-1]
    left = [-1]
    right = [-1]

    assign = np.zeros(len(sub_rows), dtype=np.int64)   # node id per subsample row
    sub_binned = binned[sub_rows]
    sub_resid = residual[sub_rows]
    n_sub = len(sub_rows)
    feat_offsets = np.arange(n_feat, dtype=np.int64)[None, :] * n_bins
    active = np.array([0], dtype=np.int64)             # nodes considered at this level
    level_min_id = 0                                   # node ids only ever grow

    for _ in range(max_depth):
        if active.size == 0:
            break
        rows = np.where(assign >= level_min_id)[0]     # rows inside this level's nodes
        if rows.size == 0:
            break
        level_pos = np.searchsorted(active, assign[rows])
        n_act = active.size

        flat = (level_pos[:, None] * (n_feat * n_bins) + feat_offsets) + sub_binned[rows]
        w = np.repeat(sub_resid[rows], n_feat)
        size = n_act * n_feat * n_bins
        hist_sum = np.bincount(flat.ravel(), weights=w, minlength=size).reshape(n_act, n_feat, n_bins)
        hist_cnt = np.bincount(flat.ravel(), minlength=size).reshape(n_act, n_feat, n_bins)
        node_total_cnt = hist_cnt[:, 0, :].sum(axis=1)
        node_total_sum = hist_sum[:, 0, :].sum(axis=1)

        left_cnt = np.cumsum(hist_cnt, axis=2)[:, :, :-1]
        left_sum = np.cumsum(hist_sum, axis=2)[:, :, :-1]
        right_cnt = node_total_cnt[:, None, None] - left_cnt
        right_sum = node_total_sum[:, None, None] - left_sum

        ok = (left_cnt >= min_leaf) & (right_cnt >= min_leaf)
        with np.errstate(divide="ignore", invalid="ignore"):
            gain = (
                left_sum * left_sum / np.maximum(left_cnt, 1)
                + right_sum * right_sum / np.maximum(right_cnt, 1)
                - (node_total_sum * node_total_sum / np.maximum(node_total_cnt, 1))[:, None, None]
            )
        gain = np.where(ok, gain, -np.inf)
        flat_gain = gain.reshape(n_act, -1)
        best = np.argmax(flat_gain, axis=1)              # first max: deterministic
        best_gain = flat_gain[np.arange(n_act), best]

        next_active = []
        any_split = False
        for p in range(n_act):
            nid = int(active[p])
            if not np.isfinite(best_gain[p]) or best_gain[p] <= 0.0:
                continue  # node stays a leaf
            # best indexes a (n_feat, n_bins-1) block
            f, b = divmod(int(best[p]), n_bins - 1)
            lid = len(feature)
            for lst, v in ((feature, -1), (threshold, 0.0), (split_bin, -1), (left, -1), (right, -1)):
                lst.append(v)
            rid = len(feature)
            for lst, v in ((feature, -1), (threshold, 0.0), (split_bin, -1), (left, -1), (right, -1)):
                lst.append(v)
            feature[nid] = f
            threshold[nid] = float(binner.edges[f][b])
            split_bin[nid] = b
            left[nid] = lid
            right[nid] = rid
            next_active += [lid, rid]
            any_split = True
        if not any_split:
            break
        # reroute all rows whose node just split (older nodes are final leaves)
        feat_np = np.asarray(feature, dtype=np.int64)
        bin_np = np.asarray(split_bin, dtype=np.int64)
        left_np = np.asarray(left, dtype=np.int64)
        right_np = np.asarray(right, dtype=np.int64)
        f_of = feat_np[assign]
        moved = (f_of >= 0) & (assign >= level_min_id)
        safe_f = np.where(moved, f_of, 0)
        go_left = sub_binned[np.arange(n_sub), safe_f] <= bin_np[assign]
        assign = np.where(moved, np.where(go_left, left_np[assign], right_np[assign]), assign)
        level_min_id = next_active[0]
        active = np.asarray(next_active, dtype=np.int64)  # appended in ascending order

    feature_arr = np.asarray(feature, dtype=np.int32)
    threshold_arr = np.asarray(threshold, dtype=np.float64)
    left_arr = np.asarray(left, dtype=np.int32)
    right_arr = np.asarray(right, dtype=np.int32)
    split_bin_arr = np.asarray(split_bin, dtype=np.int64)

    # route ALL training rows through the finished structure (binned comparison)
    full_assign = _route_binned(binned, feature_arr, split_bin_arr, left_arr, right_arr, max_depth)

    n_nodes = len(feature)
    counts = np.bincount(full_assign, minlength=n_nodes)
    sums = np.bincount(full_assign, weights=residual, minlength=n_nodes)
    value_arr = np.where(counts > 0, sums / np.maximum(counts, 1), 0.0)
    value_arr[feature_arr >= 0] = 0.0

    tree = RegressionTree(feature_arr, threshold_arr, left_arr, right_arr, value_arr)
    return tree, full_assign


def _route_binned(
    binned: np.ndarray,
    feature: np.ndarray,
    split_bin: np.ndarray,
    left: np.ndarray,
    right: np.ndarray,
    max_depth: int,
) -> np.ndarray:
    """Leaf assignment for pre-binned rows, using bin-index comparisons."""
    node = np.zeros(binned.shape[0], dtype=np.int64)
    rows = np.arange(binned.shape[0])
    for _ in range(max_depth + 1):
        feat = feature[node]
        live = feat >= 0
        if not live.any():
            break
        f = np.where(live, feat, 0)
        go_left = binned[rows, f] <= split_bin[node]
        nxt = np.where(go_left, left[node], right[node])
        node = np.where(live, nxt, node)
    return node


def _fit_boosted(
    binned: np.ndarray,
    y: np.ndarray,
    binner: _Binner,
    config: TrainConfig,
    rng: np.random.Generator,
) -> BoostedModel:
    m = len(y)
    if y.min() == y.max():
        # constant target: the base score is exact, boosting would add nothing
        return BoostedModel(base_score=float(y[0]), trees=[], learning_rate=config.learning_rate,
                            train_mse=np.zeros(config.n_trees))
    base = float(np.mean(y))
    residual = y - base
    trees: list[RegressionTree] = []
    mse = np.empty(config.n_trees)
    for t in range(config.n_trees):
        if config.row_subsample < 1.0:
            sub_rows = np.where(rng.random(m) < config.row_subsample)[0]
            if sub_rows.size < 2 * config.min_samples_leaf:
                sub_rows = np.arange(m)
        else:
            sub_rows = np.arange(m)
        tree, assign = _grow_tree(binned, residual, sub_rows, binner,
                                  config.max_depth, config.min_samples_leaf)
        residual = residual - config.learning_rate * tree.value[assign]
        trees.append(tree)
        mse[t] = float(np.mean(residual * residual))
    return BoostedModel(base_score=base, trees=trees, learning_rate=config.learning_rate, train_mse=mse)


class KnnRegressor:
    """Inverse-distance-weighted k-nearest regression over the training rows.

    An exact input match short-circuits to that row's outputs directly.
    """

    def __init__(self, inputs: np.ndarray, outputs: np.ndarray, k: int):
        if k < 1:
            raise ValidationError("knn k must be >= 1")
        if len(inputs) < k:
            raise ValidationError(f"need at least k={k} training rows")
        self.inputs = np.ascontiguousarray(inputs, dtype=np.float64)
        self.outputs = np.ascontiguousarray(outputs, dtype=np.float64)
        self.k = k
        self._sq_norms = np.einsum("ij,ij->i", self.inputs, self.inputs)

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        out = np.empty((X.shape[0], self.outputs.shape[1]))
        for start in range(0, X.shape[0], _KNN_CHUNK):
            stop = min(start + _KNN_CHUNK, X.shape[0])
            out[start:stop] = self._predict_chunk(X[start:stop])
        return out

    def _predict_chunk(self, Q: np.ndarray) -> np.ndarray:
        # candidate selection via the matmul expansion, exact distances recomputed
        d2 = self._sq_norms[None, :] - 2.0 * (Q @ self.inputs.T)
        d2 += np.einsum("ij,ij->i", Q, Q)[:, None]
        k = min(self.k, len(self.inputs))
        nbr = np.argpartition(d2, k - 1, axis=1)[:, :k]
        diff = self.inputs[nbr] - Q[:, None, :]
        dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
        pred = np.empty((Q.shape[0], self.outputs.shape[1]))
        exact_rows = dist.min(axis=1) == 0.0
        w = 1.0 / (dist + _KNN_EPS)
        pred[:] = np.einsum("ij,ijk->ik", w, self.outputs[nbr]) / w.sum(axis=1)[:, None]
        if exact_rows.any():
            for i in np.where(exact_rows)[0]:
                cols = nbr[i][dist[i] == 0.0]
                pred[i] = self.outputs[cols.min()]
        return pred


@dataclass
class SurrogateEnsemble:
    boosted: list[BoostedModel]
    knn: KnnRegressor
    blend_gamma: float
    train_config: TrainConfig
    input_min: np.ndarray
    input_max: np.ndarray
    dataset_fingerprint: str
    train_row_ids: np.ndarray
    holdout_row_ids: np.ndarray

    @property
    def input_ranges(self) -> np.ndarray:
        rng = self.input_max - self.input_min
        return np.where(rng > 0.0, rng, 1.0)

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        gbt = np.column_stack([m.predict_batch(X) for m in self.boosted])
        if self.blend_gamma == 1.0:
            return gbt
        knn = self.knn.predict_batch(X)
        if self.blend_gamma == 0.0:
            return knn
        return self.blend_gamma * gbt + (1.0 - self.blend_gamma) * knn

    def predict(self, x: InputMixture | np.ndarray) -> np.ndarray:
        arr = x.ratios if isinstance(x, InputMixture) else np.asarray(x, dtype=np.float64)
        return self.predict_batch(arr[None, :])[0]

    def predict_single_batch(self, X: np.ndarray, j: int) -> np.ndarray:
        if not 0 <= j < N_OUTPUTS:
            raise ValidationError(f"output index must be in 0..{N_OUTPUTS - 1}, got {j}")
        X = np.asarray(X, dtype=np.float64)
        gbt = self.boosted[j].predict_batch(X)
        if self.blend_gamma == 1.0:
            return gbt
        knn = self.knn.predict_batch(X)[:, j]
        if self.blend_gamma == 0.0:
            return knn
        return self.blend_gamma * gbt + (1.0 - self.blend_gamma) * knn

    def predict_single(self, x: InputMixture | np.ndarray, j: int) -> float:
        arr = x.ratios if isinstance(x, InputMixture) else np.asarray(x, dtype=np.float64)
        return float(self.predict_single_batch(arr[None, :], j)[0])

    def training_mse_matrix(self) -> np.ndarray:
        """(64, n_trees) full-training-set MSE after each boosting round."""
        return np.vstack([m.train_mse for m in self.boosted])

    def serialize(self) -> bytes:
        header = {
            "format": "mixexplore-surrogate",
            "version": 1,
            "config": self.train_config.to_dict(),
            "blend_gamma": self.blend_gamma,
            "dataset_fingerprint": self.dataset_fingerprint,
            "base_scores": [m.base_score for m in self.boosted],
            "n_trees_per_dim": [len(m.trees) for m in self.boosted],
        }
        arrays: dict[str, np.ndarray] = {
            "input_min": self.input_min,
            "input_max": self.input_max,
            "train_row_ids": self.train_row_ids,
            "holdout_row_ids": self.holdout_row_ids,
            "train_mse": self.training_mse_matrix(),
        }
        for j, model in enumerate(self.boosted):
            offsets = np.zeros(len(model.trees) + 1, dtype=np.int64)
            for t, tree in enumerate(model.trees):
                offsets[t + 1] = offsets[t] + len(tree.feature)
            arrays[f"d{j}_offsets"] = offsets
            if model.trees:
                arrays[f"d{j}_feature"] = np.concatenate([t.feature for t in model.trees])
                arrays[f"d{j}_threshold"] = np.concatenate([t.threshold for t in model.trees])
                arrays[f"d{j}_left"] = np.concatenate([t.left for t in model.trees])
                arrays[f"d{j}_right"] = np.concatenate([t.right for t in model.trees])
                arrays[f"d{j}_value"] = np.concatenate([t.value for t in model.trees])
        return pack_container(MODEL_MAGIC, header, arrays)

    def fingerprint(self) -> str:
        import hashlib
        return hashlib.sha256(self.serialize()).hexdigest()

    def save(self, path: str | Path) -> str:
        data = self.serialize()
        Path(path).write_bytes(data)
        import hashlib
        return hashlib.sha256(data).hexdigest()


def train(dataset: Dataset, config: TrainConfig | None = None) -> SurrogateEnsemble:
    """Fit the 64 boosted models plus the shared kNN regressor."""
    config = config or TrainConfig()
    n = len(dataset)
    if n < 2 * config.knn_k:
        raise ValidationError(f"need at least {2 * config.knn_k} records, got {n}")
    if dataset.stats is None:
        compute_stats(dataset)

    rng_split = np.random.default_rng([config.seed, 0])
    perm = rng_split.permutation(n)
    n_holdout = max(1, int(np.floor(config.holdout_fraction * n))) if n > 1 else 0
    train_rows = np.sort(perm[: n - n_holdout])
    holdout_rows = np.sort(perm[n - n_holdout:])

    X = dataset.inputs[train_rows]
    Y = dataset.outputs[train_rows]
    binner = _Binner(X, config.histogram_bins)
    binned = binner.bin(X)

    boosted: list[BoostedModel] = []
    for j in range(N_OUTPUTS):
        rng_j = np.random.default_rng([config.seed, 1, j])
        boosted.append(_fit_boosted(binned, Y[:, j], binner, config, rng_j))

    knn = KnnRegressor(X, Y, config.knn_k)
    return SurrogateEnsemble(
        boosted=boosted,
        knn=knn,
        blend_gamma=config.blend_gamma,
        train_config=config,
        input_min=dataset.inputs.min(axis=0),
        input_max=dataset.inputs.max(axis=0),
        dataset_fingerprint=dataset.fingerprint(),
        train_row_ids=dataset.ids[train_rows].copy(),
        holdout_row_ids=dataset.ids[holdout_rows].copy(),
    )


def load(path: str | Path, dataset: Dataset, strict: bool = True) -> SurrogateEnsemble:
    """Load a saved ensemble, rebuilding the kNN member from the dataset rows."""
    header, arrays, _ = read_container(path, MODEL_MAGIC)
    if header.get("format") != "mixexplore-surrogate":
        raise ParseError("not a surrogate model file")
    if strict and header["dataset_fingerprint"] != dataset.fingerprint():
        raise ValidationError("model was trained on a different dataset (fingerprint mismatch)")
    config = TrainConfig(**header["config"])
    mse = arrays["train_mse"]
    boosted = []
    for j in range(N_OUTPUTS):
        offsets = arrays[f"d{j}_offsets"]
        trees = []
        for t in range(len(offsets) - 1):
            lo, hi = int(offsets[t]), int(offsets[t + 1])
            trees.append(RegressionTree(
                feature=arrays[f"d{j}_feature"][lo:hi],
                threshold=arrays[f"d{j}_threshold"][lo:hi],
                left=arrays[f"d{j}_left"][lo:hi],
                right=arrays[f"d{j}_right"][lo:hi],
                value=arrays[f"d{j}_value"][lo:hi],
            ))
        boosted.append(BoostedModel(
            base_score=float(header["base_scores"][j]),
            trees=trees,
            learning_rate=config.learning_rate,
            train_mse=mse[j],
        ))
    train_row_ids = arrays["train_row_ids"]
    train_rows = np.array([dataset.row_of(i) for i in train_row_ids], dtype=np.int64)
    knn = KnnRegressor(dataset.inputs[train_rows], dataset.outputs[train_rows], config.knn_k)
    return SurrogateEnsemble(
        boosted=boosted,
        knn=knn,
        blend_gamma=float(header["blend_gamma"]),
        train_config=config,
        input_min=arrays["input_min"],
        input_max=arrays["input_max"],
        dataset_fingerprint=header["dataset_fingerprint"],
        train_row_ids=train_row_ids,
        holdout_row_ids=arrays["holdout_row_ids"],
    )


def holdout_view(dataset: Dataset, ensemble: SurrogateEnsemble) -> Dataset:
    """Dataset restricted to the ensemble's holdout rows (original ids kept)."""
    rows = np.array([dataset.row_of(i) for i in ensemble.holdout_row_ids], dtype=np.int64)
    return Dataset(
        schema=dataset.schema,
        ids=dataset.ids[rows].copy(),
        inputs=dataset.inputs[rows].copy(),
        outputs=dataset.outputs[rows].copy(),
    )


def evaluate(ensemble: SurrogateEnsemble, holdout: Dataset) -> dict[str, np.ndarray]:
    """Per-dimension R-squared and RMSE on a holdout set."""
    if len(holdout) == 0:
        raise ValidationError("holdout set is empty")
    pred = ensemble.predict_batch(holdout.inputs)
    truth = holdout.outputs
    err = pred - truth
    rmse = np.sqrt(np.mean(err * err, axis=0))
    ss_res = np.sum(err * err, axis=0)
    centered = truth - truth.mean(axis=0)
    ss_tot = np.sum(centered * centered, axis=0)
    constant = truth.min(axis=0) == truth.max(axis=0)  # ss_tot carries mean-rounding noise
    r2 = np.empty(N_OUTPUTS)
    for j in range(N_OUTPUTS):
        if constant[j]:
            scale = max(1.0, abs(float(truth[0, j])))
            r2[j] = 1.0 if rmse[j] <= 1e-9 * scale else 0.0
        else:
            r2[j] = 1.0 - ss_res[j] / ss_tot[j]
    return {"r2": r2, "rmse": rmse}


def predict(ensemble: SurrogateEnsemble, x: InputMixture) -> np.ndarray:
    return ensemble.predict(x)


def predict_single(ensemble: SurrogateEnsemble, x: InputMixture, j: int) -> float:
    return ensemble.predict_single(x, j)
