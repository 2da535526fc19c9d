"""Dataset loading, validation, normalization stats, and simplex arithmetic.

A dataset pairs 6 input mixture ratios (points on the standard 5-simplex,
i.e. non-negative and summing to 1) with 64 output properties per row.
Storage is columnar (numpy arrays); `SampleRecord` objects are cheap views
materialized on demand.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pandas as pd

from .errors import NotFoundError, ParseError, SchemaError, ValidationError

N_INPUTS = 6
N_OUTPUTS = 64

# Mixtures must sum to 1 within this after any operation.
SIMPLEX_ATOL = 1e-9
# validate_mixture accepts raw ratios within this of the simplex.
MIXTURE_TOL = 1e-6
# CSV rows are renormalized if their input sum is within this of 1, else rejected.
ROW_SUM_TOL = 1e-3

ROW_ORDER = "row-order"
EXPLICIT_ID = "explicit-id-column"


@dataclass(frozen=True)
class ColumnSchema:
    """Names of the 6 input and 64 output columns plus the record-id policy."""

    input_names: tuple[str, ...]
    output_names: tuple[str, ...]
    id_policy: str = ROW_ORDER
    id_column: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "input_names", tuple(self.input_names))
        object.__setattr__(self, "output_names", tuple(self.output_names))
        if len(self.input_names) != N_INPUTS:
            raise SchemaError(f"expected {N_INPUTS} input names, got {len(self.input_names)}")
        if len(self.output_names) != N_OUTPUTS:
            raise SchemaError(f"expected {N_OUTPUTS} output names, got {len(self.output_names)}")
        all_names = self.input_names + self.output_names
        if len(set(all_names)) != len(all_names):
            raise SchemaError("input/output column names must be distinct")
        if self.id_policy not in (ROW_ORDER, EXPLICIT_ID):
            raise SchemaError(f"unknown id policy {self.id_policy!r}")
        if self.id_policy == EXPLICIT_ID and not self.id_column:
            raise SchemaError("explicit-id-column policy requires id_column")

    @staticmethod
    def default() -> "ColumnSchema":
        return ColumnSchema(
            input_names=tuple(f"in_{i}" for i in range(N_INPUTS)),
            output_names=tuple(f"out_{j:02d}" for j in range(N_OUTPUTS)),
        )

    @staticmethod
    def from_json(path: str | Path) -> "ColumnSchema":
        """Read the sidecar schema config (JSON key-value file)."""
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        try:
            return ColumnSchema(
                input_names=tuple(raw["input_names"]),
                output_names=tuple(raw["output_names"]),
                id_policy=raw.get("id_policy", ROW_ORDER),
                id_column=raw.get("id_column"),
            )
        except KeyError as exc:
            raise SchemaError(f"schema config missing key {exc}") from exc

    def to_json(self, path: str | Path) -> None:
        payload = {
            "input_names": list(self.input_names),
            "output_names": list(self.output_names),
            "id_policy": self.id_policy,
            "id_column": self.id_column,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")


@dataclass(frozen=True)
class InputMixture:
    """Point on the 6-dimensional mixture simplex (ratios sum to 1)."""

    ratios: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.ratios, dtype=np.float64)
        if arr.shape != (N_INPUTS,):
            raise ValidationError(f"mixture must have {N_INPUTS} ratios, got shape {arr.shape}")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "ratios", arr)
        s = float(arr.sum())
        if not np.isfinite(s) or abs(s - 1.0) > SIMPLEX_ATOL:
            raise ValidationError(f"mixture ratios sum to {s!r}, expected 1 within {SIMPLEX_ATOL}")
        if np.any(arr < 0.0) or np.any(arr > 1.0):
            raise ValidationError("mixture ratios must lie in [0, 1]")

    def as_list(self) -> list[float]:
        return [float(v) for v in self.ratios]


@dataclass(frozen=True)
class SampleRecord:
    """One dataset row: an input mixture and its 64 simulated outputs."""

    id: int
    input: InputMixture
    output: np.ndarray


@dataclass
class NormalizationStats:
    """Per-dimension moments used as fixed normalizers (population std)."""

    out_mean: np.ndarray
    out_std: np.ndarray
    out_min: np.ndarray
    out_max: np.ndarray
    in_min: np.ndarray
    in_max: np.ndarray
    constant_outputs: np.ndarray  # bool mask, std == 0

    @property
    def out_scale(self) -> np.ndarray:
        """Std with constant dimensions mapped to 1 so division is safe."""
        return np.where(self.constant_outputs, 1.0, self.out_std)

    @property
    def in_range(self) -> np.ndarray:
        rng = self.in_max - self.in_min
        return np.where(rng > 0.0, rng, 1.0)


@dataclass
class Dataset:
    """Immutable-after-load columnar dataset of mixture/output rows."""

    schema: ColumnSchema
    ids: np.ndarray       # (n,) int64
    inputs: np.ndarray    # (n, 6) float64
    outputs: np.ndarray   # (n, 64) float64
    stats: NormalizationStats | None = None
    _id_to_row: dict[int, int] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        n = len(self.ids)
        if self.inputs.shape != (n, N_INPUTS) or self.outputs.shape != (n, N_OUTPUTS):
            raise ValidationError("dataset arrays have inconsistent shapes")
        if not self._id_to_row:
            self._id_to_row = {int(i): r for r, i in enumerate(self.ids)}
        if len(self._id_to_row) != n:
            raise ValidationError("record ids must be unique")
        for arr in (self.ids, self.inputs, self.outputs):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.ids)

    def row_of(self, record_id: int) -> int:
        try:
            return self._id_to_row[int(record_id)]
        except KeyError:
            raise NotFoundError(f"record id {record_id} does not exist") from None

    def has_id(self, record_id: int) -> bool:
        return int(record_id) in self._id_to_row

    def record(self, record_id: int) -> SampleRecord:
        row = self.row_of(record_id)
        return SampleRecord(
            id=int(self.ids[row]),
            input=InputMixture(self.inputs[row]),
            output=self.outputs[row],
        )

    def fingerprint(self) -> str:
        """Content hash over schema and row data (order-sensitive)."""
        h = hashlib.sha256()
        h.update(json.dumps({
            "input_names": list(self.schema.input_names),
            "output_names": list(self.schema.output_names),
        }, sort_keys=True).encode())
        h.update(np.ascontiguousarray(self.ids).tobytes())
        h.update(np.ascontiguousarray(self.inputs).tobytes())
        h.update(np.ascontiguousarray(self.outputs).tobytes())
        return h.hexdigest()


def _mixture_unchecked(arr: np.ndarray) -> InputMixture:
    """Construct without re-copying semantics changes; still runs invariant checks."""
    return InputMixture(arr)


def validate_mixture(ratios) -> InputMixture:
    """Accept 6 raw ratios if they sit on the simplex within 1e-6; renormalize to exact sum 1."""
    arr = np.asarray(ratios, dtype=np.float64)
    if arr.shape != (N_INPUTS,):
        raise ValidationError(f"expected {N_INPUTS} ratios, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        bad = [i for i in range(N_INPUTS) if not np.isfinite(arr[i])]
        raise ValidationError(f"non-finite ratios at dimensions {bad}", field=str(bad[0]))
    neg = np.where(arr < -MIXTURE_TOL)[0]
    over = np.where(arr > 1.0 + MIXTURE_TOL)[0]
    if neg.size or over.size:
        bad = sorted(set(neg.tolist()) | set(over.tolist()))
        raise ValidationError(f"ratios out of [0, 1] at dimensions {bad}", field=str(bad[0]))
    s = float(arr.sum())
    if abs(s - 1.0) > MIXTURE_TOL:
        raise ValidationError(f"ratios sum to {s:.9g}, expected 1 within {MIXTURE_TOL}")
    if abs(s - 1.0) > 1e-12:  # renormalize real drift; never perturb already-clean input
        arr = np.clip(arr, 0.0, None)
        arr = arr / arr.sum()
    return _mixture_unchecked(arr)


def uniform_sample(seed: int) -> InputMixture:
    """Uniform draw from the simplex: normalized exponential draws (flat Dirichlet)."""
    rng = np.random.default_rng(seed)
    e = rng.exponential(1.0, N_INPUTS)
    return _mixture_unchecked(e / e.sum())


def rescale_dimension(mixture: InputMixture, dim: int, new_value: float) -> InputMixture:
    """Set one ratio and rescale the remaining five to keep the sum at 1.

    The untouched dimensions keep their relative proportions. When the old
    value of `dim` is 1 (others all zero) the remainder is split equally.
    Setting a dimension to its current value returns the mixture unchanged.
    """
    if not 0 <= dim < N_INPUTS:
        raise ValidationError(f"dimension must be in 0..{N_INPUTS - 1}, got {dim}")
    new_value = float(new_value)
    if not 0.0 <= new_value <= 1.0:
        raise ValidationError(f"new value must be in [0, 1], got {new_value}")
    old = float(mixture.ratios[dim])
    if new_value == old:
        return mixture
    out = np.array(mixture.ratios, dtype=np.float64)
    others = np.arange(N_INPUTS) != dim
    others_sum = float(out[others].sum())
    if others_sum <= 0.0:
        out[others] = (1.0 - new_value) / (N_INPUTS - 1)
    else:
        out[others] *= (1.0 - new_value) / others_sum
    out[dim] = new_value
    return _mixture_unchecked(out)


def compute_stats(dataset: Dataset) -> NormalizationStats:
    """Population mean/std and min/max per output dim, min/max per input dim."""
    if len(dataset) == 0:
        raise ValidationError("cannot compute stats of an empty dataset")
    out = dataset.outputs
    std = out.std(axis=0)  # population (ddof=0): stats are fixed normalizers
    stats = NormalizationStats(
        out_mean=out.mean(axis=0),
        out_std=std,
        out_min=out.min(axis=0),
        out_max=out.max(axis=0),
        in_min=dataset.inputs.min(axis=0),
        in_max=dataset.inputs.max(axis=0),
        constant_outputs=std == 0.0,
    )
    dataset.stats = stats
    return stats


def _cache_path(csv_path: Path) -> Path:
    return csv_path.with_suffix(csv_path.suffix + ".cache.npz")


def _file_sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def load_csv(path: str | Path, schema: ColumnSchema, use_cache: bool = True) -> Dataset:
    """Load a CSV of mixture rows, validating inputs against the simplex.

    Input rows whose ratio sum is within 1e-3 of 1 are silently renormalized
    (simulation round-off); anything further off is rejected with its data-row
    index (0-based, header excluded). A content-addressed binary cache is
    written beside the file for fast reload.
    """
    path = Path(path)
    if not path.exists():
        raise ParseError(f"no such file: {path}")
    file_hash = _file_sha256(path)
    cache = _cache_path(path)
    if use_cache and cache.exists():
        ds = _load_cache(cache, schema, file_hash)
        if ds is not None:
            return ds

    # round_trip: parse floats correctly rounded so write_csv output reloads bitwise
    frame = pd.read_csv(path, float_precision="round_trip")
    missing = [c for c in schema.input_names + schema.output_names if c not in frame.columns]
    if schema.id_policy == EXPLICIT_ID and schema.id_column not in frame.columns:
        missing.append(schema.id_column)
    if missing:
        raise SchemaError(f"missing columns: {', '.join(missing)}")

    def numeric(col: str) -> np.ndarray:
        series = frame[col]
        values = pd.to_numeric(series, errors="coerce")
        bad = np.where(values.isna().to_numpy() & ~series.isna().to_numpy())[0]
        if bad.size:
            row = int(bad[0])
            raise ParseError(
                f"non-numeric value {series.iloc[row]!r} in column {col!r} at data row {row}",
                row=row, column=col,
            )
        if values.isna().any():
            row = int(np.where(values.isna().to_numpy())[0][0])
            raise ParseError(f"missing value in column {col!r} at data row {row}", row=row, column=col)
        return values.to_numpy(dtype=np.float64)

    inputs = np.column_stack([numeric(c) for c in schema.input_names])
    outputs = np.column_stack([numeric(c) for c in schema.output_names])
    n = len(frame)

    sums = inputs.sum(axis=1)
    bad_sum = np.where(np.abs(sums - 1.0) > ROW_SUM_TOL)[0]
    if bad_sum.size:
        row = int(bad_sum[0])
        raise ValidationError(
            f"input ratios at data row {row} sum to {sums[row]:.6g}, outside 1±{ROW_SUM_TOL}",
            row=row,
        )
    bad_range = np.where((inputs < -ROW_SUM_TOL) | (inputs > 1.0 + ROW_SUM_TOL))[0]
    if bad_range.size:
        row = int(bad_range[0])
        raise ValidationError(f"input ratio out of [0, 1] at data row {row}", row=row)
    # Renormalize only rows that actually drifted; keeps reload of our own
    # output bitwise-identical (round-trip property).
    off = np.abs(sums - 1.0) > 1e-12
    if off.any():
        inputs = np.clip(inputs, 0.0, None)
        inputs[off] = inputs[off] / inputs[off].sum(axis=1, keepdims=True)

    if schema.id_policy == EXPLICIT_ID:
        ids = numeric(schema.id_column).astype(np.int64)
        if np.any(ids < 0):
            raise ValidationError("record ids must be non-negative")
    else:
        ids = np.arange(n, dtype=np.int64)

    ds = Dataset(schema=schema, ids=ids, inputs=inputs, outputs=outputs)
    if n:
        compute_stats(ds)
    if use_cache:
        _write_cache(cache, ds, file_hash)
    return ds


def _write_cache(cache: Path, ds: Dataset, file_hash: str) -> None:
    try:
        np.savez(
            cache,
            file_hash=np.frombuffer(file_hash.encode(), dtype=np.uint8),
            ids=ds.ids, inputs=ds.inputs, outputs=ds.outputs,
        )
    except OSError:
        pass  # cache is best-effort


def _load_cache(cache: Path, schema: ColumnSchema, file_hash: str) -> Dataset | None:
    try:
        with np.load(cache) as payload:
            cached_hash = payload["file_hash"].tobytes().decode()
            if cached_hash != file_hash:
                return None
            ds = Dataset(
                schema=schema,
                ids=payload["ids"].copy(),
                inputs=payload["inputs"].copy(),
                outputs=payload["outputs"].copy(),
            )
    except (OSError, KeyError, ValueError):
        return None
    if len(ds):
        compute_stats(ds)
    return ds


def write_csv(dataset: Dataset, path: str | Path) -> None:
    """Serialize in the same CSV layout `load_csv` ingests (round-trip safe)."""
    path = Path(path)
    schema = dataset.schema
    columns: list[str] = []
    if schema.id_policy == EXPLICIT_ID:
        columns.append(schema.id_column)
    columns += list(schema.input_names) + list(schema.output_names)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in range(len(dataset)):
            cells: list[str] = []
            if schema.id_policy == EXPLICIT_ID:
                cells.append(str(int(dataset.ids[row])))
            cells += [repr(float(v)) for v in dataset.inputs[row]]
            cells += [repr(float(v)) for v in dataset.outputs[row]]
            fh.write(",".join(cells) + "\n")
