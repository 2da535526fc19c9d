"""Noise-averaged finite-difference sensitivity of one surrogate output.

Tree ensembles are piecewise constant, so the gradient is estimated with
central differences; averaging over Gaussian-perturbed copies of the input
smooths the estimate. The model only needs `predict_single_batch(X, j)` and
an `input_ranges` attribute, so analytic stubs can stand in for a trained
ensemble in tests.

Perturbed base points are clamped to [0, 1] to stay on the training support
(clamps are counted); the +/- difference offsets are applied unclamped so an
affine model always yields its exact coefficients.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import InputMixture, N_INPUTS
from .errors import ValidationError


@dataclass(frozen=True)
class SmoothGradConfig:
    n_samples: int = 50
    sigma: float = 0.1     # noise std as a fraction of each dimension's input range
    fd_step: float = 0.01  # central-difference step as a fraction of range
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValidationError("n_samples must be >= 1")
        if self.sigma <= 0 or self.fd_step <= 0:
            raise ValidationError("sigma and fd_step must be > 0")


@dataclass(frozen=True)
class SensitivityVector:
    values: np.ndarray    # (6,) raw partial-derivative estimates
    tangent: np.ndarray   # (6,) sum-zero projection onto the simplex tangent space
    output_index: int
    clamp_count: int = 0


def _central_differences(model, points: np.ndarray, j: int, steps: np.ndarray) -> np.ndarray:
    """Per-coordinate central differences at each base point; (n, 6)."""
    n = points.shape[0]
    offsets = np.zeros((2 * N_INPUTS, N_INPUTS))
    for i in range(N_INPUTS):
        offsets[2 * i, i] = steps[i]
        offsets[2 * i + 1, i] = -steps[i]
    batch = (points[:, None, :] + offsets[None, :, :]).reshape(n * 2 * N_INPUTS, N_INPUTS)
    preds = np.asarray(model.predict_single_batch(batch, j), dtype=np.float64)
    preds = preds.reshape(n, 2 * N_INPUTS)
    return (preds[:, 0::2] - preds[:, 1::2]) / (2.0 * steps)


def finite_diff_gradient(model, x: InputMixture | np.ndarray, j: int, step) -> np.ndarray:
    """Central-difference gradient of output j at x; step may be scalar or per-dimension."""
    steps = np.broadcast_to(np.asarray(step, dtype=np.float64), (N_INPUTS,)).copy()
    if np.any(steps <= 0):
        raise ValidationError("finite-difference step must be > 0")
    arr = x.ratios if isinstance(x, InputMixture) else np.asarray(x, dtype=np.float64)
    return _central_differences(model, arr[None, :], j, steps)[0]


def smoothgrad(model, x: InputMixture | np.ndarray, j: int,
               config: SmoothGradConfig | None = None) -> SensitivityVector:
    """Mean central-difference gradient over Gaussian-perturbed copies of x."""
    config = config or SmoothGradConfig()
    arr = x.ratios if isinstance(x, InputMixture) else np.asarray(x, dtype=np.float64)
    ranges = np.asarray(model.input_ranges, dtype=np.float64)
    rng = np.random.default_rng(config.seed)
    # fixed pre-generated noise table: results do not depend on evaluation order
    noise = rng.standard_normal((config.n_samples, N_INPUTS)) * (config.sigma * ranges)
    points = arr[None, :] + noise
    clamped = np.clip(points, 0.0, 1.0)
    clamp_count = int(np.sum(clamped != points))
    grads = _central_differences(model, clamped, j, config.fd_step * ranges)
    values = grads.mean(axis=0)
    tangent = values - values.mean()
    return SensitivityVector(values=values, tangent=tangent, output_index=j, clamp_count=clamp_count)
