"""Interpolation paths between two mixtures.

A path discretizes lambda from 1 down to 0 (lambda = 1 is the source x0,
matching the convex-combination orientation used throughout the API), runs
the surrogate at every step, snaps each prediction to the nearest real
record within the embedded subset, and carries the 2-D trajectory for the
manifold view.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, InputMixture, N_OUTPUTS, SampleRecord
from .embedding import EmbeddingMap
from .errors import ValidationError
from .neighbors import OutputIndex
from .surrogate import SurrogateEnsemble

DEFAULT_STEPS = 21


@dataclass(frozen=True)
class PathStep:
    lam: float
    input: InputMixture
    predicted: np.ndarray     # (64,) surrogate outputs
    snapped_id: int           # nearest real record (within the embedded subset)
    snap_distance: float
    embed_xy: np.ndarray      # (2,)


@dataclass(frozen=True)
class InterpolationPath:
    x0: InputMixture
    x1: InputMixture
    from_id: int | None
    to_id: int | None
    steps: tuple[PathStep, ...]

    def __len__(self) -> int:
        return len(self.steps)


@dataclass(frozen=True)
class OutputSeries:
    output_index: int
    values: np.ndarray          # predicted y*[j] per step
    snapped_values: np.ndarray  # dataset outputs of the snapped records per step


def interpolate_inputs(x0: InputMixture, x1: InputMixture, n_steps: int) -> list[InputMixture]:
    """Convex combinations lambda*x0 + (1-lambda)*x1 on a descending lambda grid.

    Endpoints are exact copies of x0 and x1, not recomputed through the
    formula, so they reproduce the anchors bitwise.
    """
    if n_steps < 2:
        raise ValidationError(f"n_steps must be >= 2, got {n_steps}")
    lams = np.linspace(1.0, 0.0, n_steps)
    out = [x0]
    for lam in lams[1:-1]:
        out.append(InputMixture(lam * x0.ratios + (1.0 - lam) * x1.ratios))
    out.append(x1)
    return out


def trace_path(
    ensemble: SurrogateEnsemble,
    snap_index: OutputIndex,
    embedding: EmbeddingMap,
    x0: InputMixture,
    x1: InputMixture,
    n_steps: int = DEFAULT_STEPS,
    from_id: int | None = None,
    to_id: int | None = None,
) -> InterpolationPath:
    """Predict, snap, and locate every interpolation step.

    `snap_index` must cover exactly the records present in `embedding`, so
    every snapped id has coordinates.
    """
    mixtures = interpolate_inputs(x0, x1, n_steps)
    lams = np.linspace(1.0, 0.0, n_steps)
    X = np.vstack([m.ratios for m in mixtures])
    predictions = ensemble.predict_batch(X)
    steps = []
    for i, mixture in enumerate(mixtures):
        hit = snap_index.nearest(predictions[i])
        xy = embedding.coordinates_of(hit.id)
        steps.append(PathStep(
            lam=float(lams[i]),
            input=mixture,
            predicted=predictions[i],
            snapped_id=hit.id,
            snap_distance=hit.distance,
            embed_xy=xy,
        ))
    return InterpolationPath(x0=x0, x1=x1, from_id=from_id, to_id=to_id, steps=tuple(steps))


def output_series(path: InterpolationPath, dataset: Dataset, j: int) -> OutputSeries:
    """Predicted and snapped-real series of one output dimension along the path."""
    if not path.steps:
        raise ValidationError("path has no steps")
    if not 0 <= j < N_OUTPUTS:
        raise ValidationError(f"output index must be in 0..{N_OUTPUTS - 1}, got {j}")
    values = np.array([s.predicted[j] for s in path.steps])
    snapped = np.array([dataset.outputs[dataset.row_of(s.snapped_id), j] for s in path.steps])
    return OutputSeries(output_index=j, values=values, snapped_values=snapped)


def step_preview(path: InterpolationPath, step_index: int, dataset: Dataset) -> dict:
    """Full bundle for one step: the payload a commit would anchor on."""
    if not 0 <= step_index < len(path.steps):
        raise ValidationError(f"step index {step_index} out of range 0..{len(path.steps) - 1}")
    step = path.steps[step_index]
    record: SampleRecord = dataset.record(step.snapped_id)
    return {
        "lambda": step.lam,
        "input": step.input,
        "predicted": step.predicted,
        "snapped_record": record,
        "snap_distance": step.snap_distance,
        "embed_xy": step.embed_xy,
    }
