"""Synthetic datasets from known analytic response surfaces.

Every learned component in the package can be checked against a generated
dataset whose outputs (and their exact gradients) are known in closed form.
The default surface mix covers linear, quadratic, smooth nonlinear, and
degenerate constant output dimensions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import ColumnSchema, Dataset, InputMixture, N_INPUTS, N_OUTPUTS, compute_stats
from .errors import ValidationError

LINEAR = "linear"
QUADRATIC = "quadratic"
SMOOTH_MIX = "smooth-mix"
CONSTANT = "constant"


@dataclass(frozen=True)
class OutputSurface:
    """One output dimension's analytic definition."""

    kind: str
    intercept: float = 0.0
    linear: np.ndarray | None = None      # (6,)
    quad: np.ndarray | None = None        # (6, 6) symmetric
    pair: np.ndarray | None = None        # (6, 6) strictly upper triangular
    amplitude: float = 0.0
    frequency: np.ndarray | None = None   # (6,)
    phase: float = 0.0


@dataclass(frozen=True)
class OracleSpec:
    surfaces: tuple[OutputSurface, ...]
    noise_std: np.ndarray = field(default_factory=lambda: np.zeros(N_OUTPUTS))
    seed: int = 0

    def __post_init__(self):
        if len(self.surfaces) != N_OUTPUTS:
            raise ValidationError(f"expected {N_OUTPUTS} output surfaces, got {len(self.surfaces)}")
        std = np.asarray(self.noise_std, dtype=np.float64)
        if std.shape == ():
            std = np.full(N_OUTPUTS, float(std))
        if std.shape != (N_OUTPUTS,) or np.any(std < 0):
            raise ValidationError("noise_std must be 64 non-negative values")
        object.__setattr__(self, "noise_std", std)

    def kinds(self) -> list[str]:
        return [s.kind for s in self.surfaces]


def default_spec(seed: int = 0, noise_std: float | np.ndarray = 0.0) -> OracleSpec:
    """Standard verification surface: 16 linear, 16 quadratic, 16 smooth-mix, 16 constant dims."""
    rng = np.random.default_rng(seed)
    surfaces: list[OutputSurface] = []
    for j in range(N_OUTPUTS):
        if j < 16:
            surfaces.append(OutputSurface(
                kind=LINEAR,
                linear=rng.uniform(-3.0, 3.0, N_INPUTS),
                intercept=float(rng.uniform(-1.0, 1.0)),
            ))
        elif j < 32:
            q = rng.uniform(-4.0, 4.0, (N_INPUTS, N_INPUTS))
            surfaces.append(OutputSurface(
                kind=QUADRATIC,
                quad=(q + q.T) / 2.0,
                linear=rng.uniform(-2.0, 2.0, N_INPUTS),
                intercept=float(rng.uniform(-1.0, 1.0)),
            ))
        elif j < 48:
            pair = np.triu(rng.uniform(-6.0, 6.0, (N_INPUTS, N_INPUTS)), k=1)
            surfaces.append(OutputSurface(
                kind=SMOOTH_MIX,
                pair=pair,
                amplitude=float(rng.uniform(0.5, 1.5)),
                frequency=rng.uniform(-2.0 * np.pi, 2.0 * np.pi, N_INPUTS),
                phase=float(rng.uniform(0.0, 2.0 * np.pi)),
                intercept=float(rng.uniform(-1.0, 1.0)),
            ))
        else:
            surfaces.append(OutputSurface(kind=CONSTANT, intercept=float(rng.uniform(-5.0, 5.0))))
    return OracleSpec(surfaces=tuple(surfaces), noise_std=np.asarray(noise_std, dtype=np.float64), seed=seed)


def _eval_surface(surface: OutputSurface, X: np.ndarray) -> np.ndarray:
    y = np.full(X.shape[0], surface.intercept, dtype=np.float64)
    if surface.linear is not None:
        y += X @ surface.linear
    if surface.kind == QUADRATIC:
        y += np.einsum("ni,ij,nj->n", X, surface.quad, X)
    elif surface.kind == SMOOTH_MIX:
        y += np.einsum("ni,ij,nj->n", X, surface.pair, X)
        y += surface.amplitude * np.sin(X @ surface.frequency + surface.phase)
    return y


def _grad_surface(surface: OutputSurface, x: np.ndarray) -> np.ndarray:
    g = np.zeros(N_INPUTS, dtype=np.float64)
    if surface.linear is not None:
        g += surface.linear
    if surface.kind == QUADRATIC:
        g += 2.0 * (surface.quad @ x)
    elif surface.kind == SMOOTH_MIX:
        g += surface.pair @ x + surface.pair.T @ x
        g += surface.amplitude * np.cos(float(x @ surface.frequency) + surface.phase) * surface.frequency
    return g


def analytic_batch(spec: OracleSpec, X: np.ndarray) -> np.ndarray:
    """Noiseless outputs for a (n, 6) batch of mixtures."""
    X = np.asarray(X, dtype=np.float64)
    return np.column_stack([_eval_surface(s, X) for s in spec.surfaces])


def analytic_output(spec: OracleSpec, x: InputMixture | np.ndarray) -> np.ndarray:
    """Noiseless ground-truth outputs at one mixture."""
    arr = x.ratios if isinstance(x, InputMixture) else np.asarray(x, dtype=np.float64)
    return analytic_batch(spec, arr[None, :])[0]


def analytic_gradient(spec: OracleSpec, x: InputMixture | np.ndarray, j: int) -> np.ndarray:
    """Exact partial derivatives of output j with respect to the 6 ratios."""
    if not 0 <= j < N_OUTPUTS:
        raise ValidationError(f"output index must be in 0..{N_OUTPUTS - 1}, got {j}")
    arr = x.ratios if isinstance(x, InputMixture) else np.asarray(x, dtype=np.float64)
    return _grad_surface(spec.surfaces[j], arr)


def sample_simplex(n: int, rng: np.random.Generator) -> np.ndarray:
    """n uniform points on the 6-dim mixture simplex (normalized exponentials)."""
    e = rng.exponential(1.0, (n, N_INPUTS))
    return e / e.sum(axis=1, keepdims=True)


def generate(spec: OracleSpec, n_samples: int, seed: int) -> Dataset:
    """Simulate a dataset: uniform simplex inputs, analytic outputs plus Gaussian noise."""
    if n_samples < 1:
        raise ValidationError(f"n_samples must be >= 1, got {n_samples}")
    rng = np.random.default_rng(seed)
    X = sample_simplex(n_samples, rng)
    Y = analytic_batch(spec, X)
    noisy = spec.noise_std > 0
    if noisy.any():
        Y[:, noisy] += rng.standard_normal((n_samples, int(noisy.sum()))) * spec.noise_std[noisy]
    ds = Dataset(
        schema=ColumnSchema.default(),
        ids=np.arange(n_samples, dtype=np.int64),
        inputs=X,
        outputs=Y,
    )
    compute_stats(ds)
    return ds


def output_ranges(spec: OracleSpec, n_probe: int = 4096, seed: int = 12345) -> np.ndarray:
    """Per-dimension (max - min) of the noiseless surface over a probe sample."""
    rng = np.random.default_rng(seed)
    Y = analytic_batch(spec, sample_simplex(n_probe, rng))
    return Y.max(axis=0) - Y.min(axis=0)


def with_noise_fraction(spec: OracleSpec, fraction: float) -> OracleSpec:
    """Copy of `spec` with noise_std set to `fraction` of each dim's probed range."""
    return OracleSpec(
        surfaces=spec.surfaces,
        noise_std=fraction * output_ranges(spec),
        seed=spec.seed,
    )
