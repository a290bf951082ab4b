"""Pytest configuration and shared fixtures."""

import sys
import os

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'app'))

from dataset.synthetic import power_law_variances, spectrum_corpus, split_queries
from index.ivf import IndexConfig, build_index


@pytest.fixture(autouse=True)
def log_dir(tmp_path, monkeypatch):
    """Redirect LOG_DIR so tests never write into the working tree."""
    path = tmp_path / 'logs'
    monkeypatch.setenv('LOG_DIR', str(path))
    return path


@pytest.fixture(scope='session')
def corpus_and_queries():
    """2,000 base vectors and 100 held-out queries, D=32, power-law spectrum."""
    data = spectrum_corpus(2100, power_law_variances(32) * 32, seed=7)
    return split_queries(data, 100, seed=7)


@pytest.fixture(scope='session')
def corpus(corpus_and_queries):
    """Base vectors of the shared workload."""
    return corpus_and_queries[0]


@pytest.fixture(scope='session')
def queries(corpus_and_queries):
    """Held-out queries of the shared workload."""
    return corpus_and_queries[1]


@pytest.fixture(scope='session')
def small_index(corpus):
    """Index over the shared corpus: d=16, k=16."""
    return build_index(corpus, IndexConfig(d=16, k=16, seed=3))


@pytest.fixture(scope='session')
def full_dim_index(corpus):
    """Index with d = D, so distances carry no residual term."""
    return build_index(corpus, IndexConfig(d=32, k=16, seed=3))


@pytest.fixture
def rng():
    """Seeded generator for per-test random data."""
    return np.random.default_rng(12345)


@pytest.fixture
def unit_vectors(rng):
    """Factory for uniform random unit vectors on the sphere."""
    def make(n, dim):
        v = rng.standard_normal((n, dim))
        return v / np.linalg.norm(v, axis=1, keepdims=True)
    return make
