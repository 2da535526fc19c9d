"""t-SNE embedding of the output space (and optionally the input space) into 2-D.

Affinities use the standard perplexity-calibrated Gaussian construction over
the 3*perplexity nearest neighbors of each point; the 2-D layout minimizes
KL(P||Q) with a Student-t kernel via momentum gradient descent. Repulsive
forces are computed exactly (O(N^2), vectorized) when theta == 0 and with a
Barnes-Hut quadtree (numba-compiled) otherwise.

Embeddings are persisted as a small text format: one JSON header line then
id,x,y rows at full float precision, so identical runs write identical bytes.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .dataset import Dataset
from .errors import NotFoundError, ParseError, ValidationError
from . import _bh

_LN2 = float(np.log(2.0))
_KNN_CHUNK = 512

OUTPUT_SPACE = "output"
INPUT_SPACE = "input"


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    n_iter: int = 1000
    early_exaggeration: float = 12.0
    exaggeration_iters: int = 250
    learning_rate: float = 200.0
    momentum_early: float = 0.5
    momentum_late: float = 0.8
    momentum_switch_iter: int = 250
    theta: float = 0.5     # Barnes-Hut accuracy; 0 = exact
    seed: int = 0
    subsample_cap: int = 50000

    def __post_init__(self):
        if self.perplexity < 2:
            raise ValidationError("perplexity must be >= 2")
        if not 0.0 <= self.theta <= 1.0:
            raise ValidationError("theta must be in [0, 1]")
        if self.n_iter < 1 or self.subsample_cap < 1:
            raise ValidationError("n_iter and subsample_cap must be >= 1")

    def check_points(self, n_points: int) -> None:
        if 3.0 * self.perplexity >= n_points - 1:
            raise ValidationError(
                f"perplexity {self.perplexity} too large for {n_points} points "
                f"(need 3*perplexity < n_points - 1)")

    def to_dict(self) -> dict:
        return {
            "perplexity": self.perplexity, "n_iter": self.n_iter,
            "early_exaggeration": self.early_exaggeration,
            "exaggeration_iters": self.exaggeration_iters,
            "learning_rate": self.learning_rate,
            "momentum_early": self.momentum_early, "momentum_late": self.momentum_late,
            "momentum_switch_iter": self.momentum_switch_iter,
            "theta": self.theta, "seed": self.seed, "subsample_cap": self.subsample_cap,
        }


@dataclass
class AffinitySet:
    neighbors: np.ndarray      # (N, k) neighbor row positions
    conditional: np.ndarray    # (N, k) per-row conditional probabilities (each row sums to 1)
    matrix: sp.csr_matrix      # symmetrized joint probabilities, sums to 1


@dataclass
class EmbeddingMap:
    space: str
    ids: np.ndarray            # dataset record ids, unique
    coords: np.ndarray         # (N, 2)
    kl_trace: list[tuple[int, float]]
    config: TsneConfig
    dataset_fingerprint: str = ""
    _id_to_row: dict[int, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if not self._id_to_row:
            self._id_to_row = {int(i): r for r, i in enumerate(self.ids)}

    def __len__(self) -> int:
        return len(self.ids)

    def has_id(self, record_id: int) -> bool:
        return int(record_id) in self._id_to_row

    def coordinates_of(self, record_id: int) -> np.ndarray:
        row = self._id_to_row.get(int(record_id))
        if row is None:
            raise NotFoundError(
                f"record {record_id} is not part of this embedding; "
                "re-snap within the embedded subset")
        return self.coords[row]


def subsample(dataset: Dataset, cap: int, seed: int) -> np.ndarray:
    """Record ids of a uniform sample without replacement; identity when n <= cap."""
    if cap < 1:
        raise ValidationError("subsample cap must be >= 1")
    n = len(dataset)
    if n <= cap:
        return dataset.ids.copy()
    rng = np.random.default_rng(seed)
    rows = np.sort(rng.choice(n, size=cap, replace=False))
    return dataset.ids[rows]


def _knn_sq_dists(points: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Brute-force k nearest (excluding self): (indices (N,k), squared distances (N,k))."""
    n = points.shape[0]
    sq = np.einsum("ij,ij->i", points, points)
    nbr = np.empty((n, k), dtype=np.int64)
    d2 = np.empty((n, k))
    for start in range(0, n, _KNN_CHUNK):
        stop = min(start + _KNN_CHUNK, n)
        block = sq[start:stop, None] + sq[None, :] - 2.0 * (points[start:stop] @ points.T)
        block[np.arange(start, stop) - start, np.arange(start, stop)] = np.inf
        np.clip(block, 0.0, None, out=block)
        idx = np.argpartition(block, k - 1, axis=1)[:, :k]
        nbr[start:stop] = idx
        d2[start:stop] = np.take_along_axis(block, idx, axis=1)
    return nbr, d2


def compute_affinities(points: np.ndarray, perplexity: float) -> AffinitySet:
    """Perplexity-calibrated Gaussian affinities over 3*perplexity neighbors.

    Per-point bandwidths are bisected until the conditional distribution's
    entropy is within 1e-5 bits of log2(perplexity) (at most 50 steps), then
    the conditionals are symmetrized and normalized to total mass 1.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if perplexity < 2 or 3.0 * perplexity >= n - 1:
        raise ValidationError(f"perplexity {perplexity} invalid for {n} points")
    k = int(3 * perplexity)
    nbr, d2 = _knn_sq_dists(points, k)

    target = float(np.log(perplexity))  # nats; tolerance below converts from bits
    tol = 1e-5 * _LN2
    shift = d2.min(axis=1, keepdims=True)
    ds = d2 - shift
    beta = np.ones(n)
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    P = np.exp(-ds)
    for _ in range(50):
        P = np.exp(-beta[:, None] * ds)
        S = P.sum(axis=1)
        H = np.log(S) + beta * (P * ds).sum(axis=1) / S
        diff = H - target
        if np.all(np.abs(diff) <= tol):
            break
        too_flat = diff > 0  # entropy too high -> sharpen (raise beta)
        lo = np.where(too_flat, beta, lo)
        hi = np.where(too_flat, hi, beta)
        beta = np.where(
            too_flat,
            np.where(np.isinf(hi), beta * 2.0, 0.5 * (beta + hi)),
            0.5 * (lo + beta),
        )
    P = np.exp(-beta[:, None] * ds)
    P /= P.sum(axis=1, keepdims=True)

    rows = np.repeat(np.arange(n), k)
    cond = sp.csr_matrix((P.ravel(), (rows, nbr.ravel())), shape=(n, n))
    sym = (cond + cond.T) / (2.0 * n)
    return AffinitySet(neighbors=nbr, conditional=P, matrix=sym.tocsr())


def _exact_forces(Y: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Repulsive numerator sum_j w^2 (y_i - y_j) and normalizer Z, exactly."""
    sq = np.einsum("ij,ij->i", Y, Y)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (Y @ Y.T)
    np.clip(d2, 0.0, None, out=d2)
    W = 1.0 / (1.0 + d2)
    np.fill_diagonal(W, 0.0)
    z = float(W.sum())
    W2 = W * W
    rep = W2.sum(axis=1)[:, None] * Y - W2 @ Y
    return rep, W, z


def _attractive(Y: np.ndarray, p_data: np.ndarray, rows: np.ndarray, cols: np.ndarray,
                indices: np.ndarray, indptr: np.ndarray, n: int) -> np.ndarray:
    diff = Y[rows] - Y[cols]
    w = 1.0 / (1.0 + np.einsum("ij,ij->i", diff, diff))
    pw = p_data * w
    PW = sp.csr_matrix((pw, indices, indptr), shape=(n, n))
    row_sums = np.asarray(PW.sum(axis=1)).ravel()
    return row_sums[:, None] * Y - PW @ Y


def _sparse_kl(Y: np.ndarray, p_data: np.ndarray, rows: np.ndarray, cols: np.ndarray, z: float) -> float:
    diff = Y[rows] - Y[cols]
    w = 1.0 / (1.0 + np.einsum("ij,ij->i", diff, diff))
    q = np.maximum(w / z, 1e-12)
    p = p_data
    mask = p > 0
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def tsne(points: np.ndarray, config: TsneConfig | None = None,
         ids: np.ndarray | None = None, space: str = OUTPUT_SPACE,
         dataset_fingerprint: str = "") -> EmbeddingMap:
    """Embed high-dimensional points into 2-D by gradient descent on KL(P||Q)."""
    config = config or TsneConfig()
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    config.check_points(n)
    affinities = compute_affinities(points, config.perplexity)
    P = affinities.matrix
    p_data = P.data.copy()
    coo = P.tocoo()
    rows, cols = coo.row.astype(np.int64), coo.col.astype(np.int64)
    indices, indptr = P.indices.copy(), P.indptr.copy()

    rng = np.random.default_rng(config.seed)
    Y = rng.standard_normal((n, 2)) * 1e-4
    vel = np.zeros_like(Y)
    kl_trace: list[tuple[int, float]] = []

    def record(it: int) -> None:
        if config.theta == 0.0:
            _, _, z = _exact_forces(Y)
        else:
            _, z = _bh.repulsion(Y, config.theta)
        kl_trace.append((it, _sparse_kl(Y, p_data, rows, cols, z)))

    record(0)
    for it in range(config.n_iter):
        exaggeration = config.early_exaggeration if it < config.exaggeration_iters else 1.0
        attr = _attractive(Y, p_data * exaggeration, rows, cols, indices, indptr, n)
        if config.theta == 0.0:
            rep, _, z = _exact_forces(Y)
        else:
            rep, z = _bh.repulsion(Y, config.theta)
        grad = 4.0 * (attr - rep / z)
        momentum = config.momentum_early if it < config.momentum_switch_iter else config.momentum_late
        vel = momentum * vel - config.learning_rate * grad
        Y = Y + vel
        Y = Y - Y.mean(axis=0)
        if (it + 1) % 50 == 0 or it == config.n_iter - 1:
            record(it + 1)

    return EmbeddingMap(
        space=space,
        ids=np.arange(n, dtype=np.int64) if ids is None else np.asarray(ids, dtype=np.int64),
        coords=Y,
        kl_trace=kl_trace,
        config=config,
        dataset_fingerprint=dataset_fingerprint,
    )


def standardized_outputs(dataset: Dataset, rows: np.ndarray | None = None) -> np.ndarray:
    """Outputs scaled to zero mean / unit spread; the space all output distances live in."""
    if dataset.stats is None:
        raise ValidationError("dataset stats must be computed first")
    out = dataset.outputs if rows is None else dataset.outputs[rows]
    return (out - dataset.stats.out_mean) / dataset.stats.out_scale


def embed_dataset(dataset: Dataset, space: str = OUTPUT_SPACE,
                  config: TsneConfig | None = None) -> EmbeddingMap:
    """Subsample (per config cap), standardize, and embed one space of the dataset."""
    config = config or TsneConfig()
    if space not in (OUTPUT_SPACE, INPUT_SPACE):
        raise ValidationError(f"space must be {OUTPUT_SPACE!r} or {INPUT_SPACE!r}")
    ids = subsample(dataset, config.subsample_cap, config.seed)
    rows = np.array([dataset.row_of(i) for i in ids], dtype=np.int64)
    if space == OUTPUT_SPACE:
        points = standardized_outputs(dataset, rows)
    else:
        points = dataset.inputs[rows]
    return tsne(points, config, ids=ids, space=space,
                dataset_fingerprint=dataset.fingerprint())


def save_embedding(emap: EmbeddingMap, path: str | Path) -> str:
    """Write header + id,x,y rows; returns the file's sha256 fingerprint."""
    header = {
        "format": "mixexplore-embedding",
        "version": 1,
        "space": emap.space,
        "dataset_fingerprint": emap.dataset_fingerprint,
        "config": emap.config.to_dict(),
        "kl_trace": [[int(i), float(v)] for i, v in emap.kl_trace],
    }
    lines = ["#" + json.dumps(header, sort_keys=True, separators=(",", ":")), "id,x,y"]
    for i in range(len(emap.ids)):
        lines.append(f"{int(emap.ids[i])},{float(emap.coords[i, 0])!r},{float(emap.coords[i, 1])!r}")
    data = ("\n".join(lines) + "\n").encode()
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def load_embedding(path: str | Path) -> EmbeddingMap:
    """Read back a saved embedding (also the import path for external embeddings)."""
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text or not text[0].startswith("#"):
        raise ParseError("embedding file must start with a JSON header line")
    header = json.loads(text[0][1:])
    if header.get("format") != "mixexplore-embedding":
        raise ParseError("not an embedding file")
    if len(text) < 2 or text[1] != "id,x,y":
        raise ParseError("embedding file missing id,x,y column header")
    ids, xs, ys = [], [], []
    for line in text[2:]:
        if not line:
            continue
        i, x, y = line.split(",")
        ids.append(int(i)); xs.append(float(x)); ys.append(float(y))
    return EmbeddingMap(
        space=header.get("space", OUTPUT_SPACE),
        ids=np.asarray(ids, dtype=np.int64),
        coords=np.column_stack([np.asarray(xs), np.asarray(ys)]),
        kl_trace=[(int(i), float(v)) for i, v in header.get("kl_trace", [])],
        config=TsneConfig(**header["config"]),
        dataset_fingerprint=header.get("dataset_fingerprint", ""),
    )


def embed_coordinates(emap: EmbeddingMap, record_id: int) -> np.ndarray:
    return emap.coordinates_of(record_id)
