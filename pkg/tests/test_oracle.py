import numpy as np
import pytest

from mixexplore import oracle
from mixexplore.dataset import validate_mixture
from mixexplore.errors import ValidationError


def test_generate_deterministic(oracle_spec):
    a = oracle.generate(oracle_spec, 200, seed=9)
    b = oracle.generate(oracle_spec, 200, seed=9)
    assert np.array_equal(a.inputs, b.inputs)
    assert np.array_equal(a.outputs, b.outputs)


def test_generate_constant_dims_constant(oracle_spec):
    ds = oracle.generate(oracle_spec, 300, seed=2)
    for j, kind in enumerate(oracle_spec.kinds()):
        if kind == oracle.CONSTANT:
            col = ds.outputs[:, j]
            assert col.min() == col.max()


def test_generate_noiseless_matches_analytic(oracle_spec):
    ds = oracle.generate(oracle_spec, 100, seed=3)
    expected = oracle.analytic_batch(oracle_spec, ds.inputs)
    assert np.array_equal(ds.outputs, expected)


def test_generate_rejects_zero_rows(oracle_spec):
    with pytest.raises(ValidationError):
        oracle.generate(oracle_spec, 0, seed=1)


def test_analytic_linear_example():
    surface = oracle.OutputSurface(kind=oracle.LINEAR, linear=np.array([2.0, 0, 0, 0, 0, 0]))
    x = validate_mixture([1, 0, 0, 0, 0, 0])
    assert oracle._eval_surface(surface, x.ratios[None, :])[0] == pytest.approx(2.0, abs=1e-15)


def test_analytic_quadratic_example():
    quad = np.zeros((6, 6))
    quad[0, 0] = 1.0
    surface = oracle.OutputSurface(kind=oracle.QUADRATIC, quad=quad, linear=np.zeros(6))
    x = validate_mixture([0.5, 0.5, 0, 0, 0, 0])
    assert oracle._eval_surface(surface, x.ratios[None, :])[0] == pytest.approx(0.25, abs=1e-15)


def test_analytic_constant_dim(oracle_spec):
    x = validate_mixture([1 / 6.0] * 6)
    out = oracle.analytic_output(oracle_spec, x)
    for j, kind in enumerate(oracle_spec.kinds()):
        if kind == oracle.CONSTANT:
            assert out[j] == oracle_spec.surfaces[j].intercept


def test_gradient_linear(oracle_spec):
    surface = oracle.OutputSurface(kind=oracle.LINEAR, linear=np.array([2.0, 0, 0, 0, 0, 0]))
    g = oracle._grad_surface(surface, np.array([0.3, 0.1, 0.1, 0.1, 0.2, 0.2]))
    assert np.array_equal(g, [2, 0, 0, 0, 0, 0])


def test_gradient_quadratic_example():
    quad = np.zeros((6, 6))
    quad[0, 0] = 1.0
    surface = oracle.OutputSurface(kind=oracle.QUADRATIC, quad=quad, linear=np.zeros(6))
    g = oracle._grad_surface(surface, np.array([0.5, 0.5, 0, 0, 0, 0]))
    assert np.allclose(g, [1, 0, 0, 0, 0, 0], atol=1e-15)


def test_gradient_matches_finite_differences(oracle_spec):
    # self-consistency: central differences of analytic_output at step 1e-5
    rng = np.random.default_rng(17)
    eps = 1e-5
    eye = np.eye(6)
    for _ in range(5):
        x = oracle.sample_simplex(1, rng)[0]
        for j in (0, 20, 40, 45):  # linear, quadratic, two smooth-mix dims
            fd = np.array([
                (oracle.analytic_output(oracle_spec, x + eps * eye[i])[j]
                 - oracle.analytic_output(oracle_spec, x - eps * eye[i])[j]) / (2 * eps)
                for i in range(6)
            ])
            exact = oracle.analytic_gradient(oracle_spec, x, j)
            assert np.allclose(fd, exact, atol=1e-6)


def test_gradient_constant_is_zero(oracle_spec):
    x = validate_mixture([1 / 6.0] * 6)
    for j, kind in enumerate(oracle_spec.kinds()):
        if kind == oracle.CONSTANT:
            assert np.array_equal(oracle.analytic_gradient(oracle_spec, x, j), np.zeros(6))


def test_noise_fraction_scales_with_range(oracle_spec):
    spec = oracle.with_noise_fraction(oracle_spec, 0.01)
    ranges = oracle.output_ranges(oracle_spec)
    assert np.allclose(spec.noise_std, 0.01 * ranges)
    constant = [j for j, k in enumerate(oracle_spec.kinds()) if k == oracle.CONSTANT]
    assert np.all(spec.noise_std[constant] == 0.0)


def test_csv_roundtrip_compatible(tmp_path, oracle_spec):
    from mixexplore.dataset import load_csv, write_csv
    ds = oracle.generate(oracle_spec, 50, seed=8)
    path = tmp_path / "oracle.csv"
    write_csv(ds, path)
    loaded = load_csv(path, ds.schema, use_cache=False)
    assert np.array_equal(loaded.inputs, ds.inputs)
    assert np.array_equal(loaded.outputs, ds.outputs)
