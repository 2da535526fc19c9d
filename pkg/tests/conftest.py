"""Shared fixtures: small oracle-backed datasets and a fast trained stack."""

from __future__ import annotations

import numpy as np
import pytest

from mixexplore import oracle
from mixexplore.embedding import TsneConfig, embed_dataset
from mixexplore.neighbors import build_input_index, build_output_index
from mixexplore.session import SessionResources
from mixexplore.surrogate import TrainConfig, train


@pytest.fixture(scope="session")
def oracle_spec():
    return oracle.default_spec(seed=3)


@pytest.fixture(scope="session")
def noisy_spec(oracle_spec):
    return oracle.with_noise_fraction(oracle_spec, 0.01)


@pytest.fixture(scope="session")
def small_dataset(noisy_spec):
    """2,000 oracle rows with 1% noise; the workhorse fixture."""
    return oracle.generate(noisy_spec, 2000, seed=11)


@pytest.fixture(scope="session")
def clean_dataset(oracle_spec):
    """600 noiseless oracle rows for exactness-sensitive tests."""
    return oracle.generate(oracle_spec, 600, seed=5)


@pytest.fixture(scope="session")
def fast_config():
    return TrainConfig(n_trees=40, max_depth=5, seed=1)


@pytest.fixture(scope="session")
def small_ensemble(small_dataset, fast_config):
    return train(small_dataset, fast_config)


@pytest.fixture(scope="session")
def small_embedding(small_dataset):
    """Exact-mode embedding of every record (no subsampling) at reduced iterations."""
    config = TsneConfig(perplexity=20.0, n_iter=250, theta=0.0, seed=4, subsample_cap=5000)
    return embed_dataset(small_dataset, "output", config)


@pytest.fixture(scope="session")
def small_resources(small_dataset, small_ensemble, small_embedding):
    snap_rows = np.array([small_dataset.row_of(i) for i in small_embedding.ids], dtype=np.int64)
    return SessionResources(
        dataset=small_dataset,
        input_index=build_input_index(small_dataset),
        output_index=build_output_index(small_dataset),
        snap_index=build_output_index(small_dataset, snap_rows),
        embedding=small_embedding,
        ensemble=small_ensemble,
    )
