"""Exact nearest-neighbor queries over input and output space.

Inputs (6-dim ratios) are indexed with a kd-tree; outputs (64-dim, mixed
units) are scanned brute-force with per-dimension standardization and
optional per-dimension emphasis weights. Both paths return results
identical to a naive scan: distances sorted ascending, ties broken by
ascending record id.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, InputMixture, NormalizationStats, N_OUTPUTS
from .errors import ValidationError

_LEAF_SIZE = 16
_SCAN_CHUNK = 65536


@dataclass(frozen=True)
class NeighborHit:
    id: int
    distance: float


@dataclass(frozen=True)
class WeightedMetric:
    """Standardized Euclidean metric with non-negative per-dimension weights.

    Constant output dimensions (zero spread) always get weight 0 and scale 1:
    they carry no information and their std cannot be divided by.
    """

    weights: np.ndarray  # (64,)
    scales: np.ndarray   # (64,)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        s = np.asarray(self.scales, dtype=np.float64)
        if w.shape != (N_OUTPUTS,) or s.shape != (N_OUTPUTS,):
            raise ValidationError("metric weights and scales must have 64 entries")
        if np.any(w < 0):
            raise ValidationError("metric weights must be non-negative")
        if not np.any(w > 0):
            raise ValidationError("metric needs at least one strictly positive weight")
        if np.any(s <= 0):
            raise ValidationError("metric scales must be strictly positive")
        w = w.copy(); w.setflags(write=False)
        s = s.copy(); s.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "scales", s)

    @staticmethod
    def unit(stats: NormalizationStats) -> "WeightedMetric":
        weights = np.where(stats.constant_outputs, 0.0, 1.0)
        return WeightedMetric(weights=weights, scales=stats.out_scale)

    @staticmethod
    def boosted(stats: NormalizationStats, adjusted_dims, beta: float) -> "WeightedMetric":
        """Unit metric with weight 1 + beta on the adjusted output dimensions."""
        if beta < 0:
            raise ValidationError(f"beta must be non-negative, got {beta}")
        weights = np.ones(N_OUTPUTS)
        for j in adjusted_dims:
            if not 0 <= int(j) < N_OUTPUTS:
                raise ValidationError(f"output index {j} out of range")
            weights[int(j)] = 1.0 + beta
        weights[stats.constant_outputs] = 0.0
        return WeightedMetric(weights=weights, scales=stats.out_scale)


def _top_k(dist_sq: np.ndarray, ids: np.ndarray, k: int) -> list[NeighborHit]:
    order = np.lexsort((ids, dist_sq))[: min(k, len(ids))]
    return [NeighborHit(id=int(ids[i]), distance=float(np.sqrt(dist_sq[i]))) for i in order]


class InputIndex:
    """kd-tree over the 6-dim input points; exact k-nearest-neighbor queries."""

    def __init__(self, points: np.ndarray, ids: np.ndarray, leaf_size: int = _LEAF_SIZE):
        if len(points) == 0:
            raise ValidationError("cannot index an empty dataset")
        self.points = np.ascontiguousarray(points, dtype=np.float64)
        self.ids = np.ascontiguousarray(ids, dtype=np.int64)
        self.leaf_size = leaf_size
        self._split_dim: list[int] = []
        self._split_val: list[float] = []
        self._left: list[int] = []
        self._right: list[int] = []
        self._leaf_slice: list[tuple[int, int] | None] = []
        self._perm = np.arange(len(points))
        self._root = self._build(0, len(points))

    def _new_node(self) -> int:
        self._split_dim.append(-1)
        self._split_val.append(0.0)
        self._left.append(-1)
        self._right.append(-1)
        self._leaf_slice.append(None)
        return len(self._split_dim) - 1

    def _build(self, lo: int, hi: int) -> int:
        node = self._new_node()
        n = hi - lo
        if n <= self.leaf_size:
            self._leaf_slice[node] = (lo, hi)
            return node
        seg = self._perm[lo:hi]
        coords = self.points[seg]
        dim = int(np.argmax(coords.max(axis=0) - coords.min(axis=0)))
        mid = n // 2
        order = np.argpartition(coords[:, dim], mid)
        self._perm[lo:hi] = seg[order]
        split_val = float(self.points[self._perm[lo + mid], dim])
        self._split_dim[node] = dim
        self._split_val[node] = split_val
        self._left[node] = self._build(lo, lo + mid)
        self._right[node] = self._build(lo + mid, hi)
        return node

    def query(self, query_point: np.ndarray, k: int) -> list[NeighborHit]:
        """k nearest by Euclidean distance, ties broken by ascending id."""
        if k < 1:
            raise ValidationError(f"k must be >= 1, got {k}")
        q = np.asarray(query_point, dtype=np.float64)
        # heap holds (-dist_sq, -id): the root is the current worst candidate
        heap: list[tuple[float, int]] = []

        def worst() -> tuple[float, int]:
            d, i = heap[0]
            return -d, -i

        def offer(dist_sq: np.ndarray, seg_ids: np.ndarray) -> None:
            for d, i in zip(dist_sq, seg_ids):
                d = float(d); i = int(i)
                if len(heap) < k:
                    heapq.heappush(heap, (-d, -i))
                else:
                    wd, wi = worst()
                    if d < wd or (d == wd and i < wi):
                        heapq.heapreplace(heap, (-d, -i))

        def visit(node: int) -> None:
            leaf = self._leaf_slice[node]
            if leaf is not None:
                seg = self._perm[leaf[0]:leaf[1]]
                diff = self.points[seg] - q
                offer(np.einsum("ij,ij->i", diff, diff), self.ids[seg])
                return
            dim = self._split_dim[node]
            plane = q[dim] - self._split_val[node]
            near, far = (self._left[node], self._right[node]) if plane < 0 else (self._right[node], self._left[node])
            visit(near)
            # equal bound must still be visited: a far-side tie can win on id
            if len(heap) < k or plane * plane <= worst()[0]:
                visit(far)

        visit(self._root)
        hits = sorted(((-d, -i) for d, i in heap))
        return [NeighborHit(id=i, distance=float(np.sqrt(d))) for d, i in hits]


class OutputIndex:
    """Brute-force weighted scan over the 64-dim outputs (exact by construction)."""

    def __init__(self, dataset: Dataset, stats: NormalizationStats, row_subset: np.ndarray | None = None):
        if len(dataset) == 0:
            raise ValidationError("cannot index an empty dataset")
        self.stats = stats
        if row_subset is None:
            self.outputs = dataset.outputs
            self.ids = dataset.ids
        else:
            rows = np.asarray(row_subset, dtype=np.int64)
            self.outputs = dataset.outputs[rows]
            self.ids = dataset.ids[rows]

    def query(self, target: np.ndarray, metric: WeightedMetric, k: int) -> list[NeighborHit]:
        if k < 1:
            raise ValidationError(f"k must be >= 1, got {k}")
        t = np.asarray(target, dtype=np.float64)
        if t.shape != (N_OUTPUTS,):
            raise ValidationError(f"target must have {N_OUTPUTS} values")
        coeff = metric.weights / (metric.scales * metric.scales)
        n = len(self.ids)
        dist_sq = np.empty(n)
        for start in range(0, n, _SCAN_CHUNK):
            stop = min(start + _SCAN_CHUNK, n)
            diff = self.outputs[start:stop] - t
            dist_sq[start:stop] = np.square(diff) @ coeff
        return _top_k(dist_sq, self.ids, k)

    def nearest(self, predicted: np.ndarray) -> NeighborHit:
        """Closest real record under the unit standardized metric."""
        return self.query(predicted, WeightedMetric.unit(self.stats), 1)[0]


def build_input_index(dataset: Dataset) -> InputIndex:
    return InputIndex(dataset.inputs, dataset.ids)


def build_output_index(dataset: Dataset, row_subset: np.ndarray | None = None) -> OutputIndex:
    if dataset.stats is None:
        raise ValidationError("dataset stats must be computed before building an output index")
    return OutputIndex(dataset, dataset.stats, row_subset)


def query_input(index: InputIndex, query: InputMixture, k: int) -> list[NeighborHit]:
    return index.query(query.ratios, k)


def query_output(index: OutputIndex, target: np.ndarray, metric: WeightedMetric, k: int) -> list[NeighborHit]:
    return index.query(target, metric, k)


def nearest_output(index: OutputIndex, predicted: np.ndarray) -> NeighborHit:
    return index.nearest(predicted)


def similarity_scores(dataset: Dataset, selected: int) -> tuple[np.ndarray, np.ndarray]:
    """Similarity of every record to `selected`: 1 - d/d_max in standardized output space.

    Returns (ids, scores) in dataset order; the selected record scores exactly 1.
    """
    if dataset.stats is None:
        raise ValidationError("dataset stats must be computed first")
    row = dataset.row_of(selected)
    metric = WeightedMetric.unit(dataset.stats)
    coeff = metric.weights / (metric.scales * metric.scales)
    target = dataset.outputs[row]
    n = len(dataset)
    dist = np.empty(n)
    for start in range(0, n, _SCAN_CHUNK):
        stop = min(start + _SCAN_CHUNK, n)
        diff = dataset.outputs[start:stop] - target
        dist[start:stop] = np.sqrt(np.square(diff) @ coeff)
    d_max = dist.max()
    if d_max == 0.0:
        scores = np.ones(n)
    else:
        scores = 1.0 - dist / d_max
    scores[row] = 1.0
    return dataset.ids.copy(), scores
