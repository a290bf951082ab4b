"""Seeded synthetic corpora with controlled variance spectra."""

import logging

import numpy as np

from config import SEED
from core.errors import InvalidConfigError
from core.linalg import random_orthogonal

logger = logging.getLogger(__name__)


def spectrum_corpus(n: int, variances, seed: int = SEED, rotate: bool = True,
                    offset_scale: float = 1.0) -> np.ndarray:
    """
    Gaussian corpus whose PCA spectrum is the given variances.

    Axis-aligned samples are randomly rotated and shifted so that the PCA
    stage has real work to do.

    Args:
        n: Number of vectors
        variances: Per-dimension variances (length D)
        seed: Random seed
        rotate: Apply a random orthogonal rotation
        offset_scale: Standard deviation of the random mean offset

    Returns:
        (n, D) float32 matrix
    """
    variances = np.asarray(variances, dtype=np.float64)
    if n < 1:
        raise InvalidConfigError(f'n must be >= 1, got {n}')
    if variances.ndim != 1 or np.any(variances < 0):
        raise InvalidConfigError('variances must be a non-negative vector')

    dim = variances.shape[0]
    rng = np.random.default_rng(seed)
    data = rng.standard_normal((n, dim)) * np.sqrt(variances)
    if rotate:
        data = data @ random_orthogonal(dim, seed + 1).matrix.astype(np.float64).T
    data += rng.standard_normal(dim) * offset_scale
    return data.astype(np.float32)


def power_law_variances(dim: int, exponent: float = 1.5) -> np.ndarray:
    """λᵢ ∝ i^(−exponent), normalized to unit total."""
    ranks = np.arange(1, dim + 1, dtype=np.float64)
    spectrum = ranks ** -exponent
    return spectrum / spectrum.sum()


def head_heavy_variances(dim: int, head_energy: float = 0.95) -> np.ndarray:
    """First third carries head_energy of the total (decaying as 1/i); the rest is flat."""
    if not 0.0 < head_energy < 1.0:
        raise InvalidConfigError(f'head_energy must be in (0, 1), got {head_energy}')
    head = max(1, dim // 3)
    spectrum = np.empty(dim, dtype=np.float64)
    profile = 1.0 / np.arange(1, head + 1, dtype=np.float64)
    spectrum[:head] = head_energy * profile / profile.sum()
    if dim > head:
        spectrum[head:] = (1.0 - head_energy) / (dim - head)
    return spectrum / spectrum.sum()


def gist_like(n: int, dim: int = 960, exponent: float = 1.5, seed: int = SEED) -> np.ndarray:
    """Power-law spectrum corpus shaped like GIST descriptors."""
    logger.info(f'gist-likeコーパスを生成中: {n}件 x {dim}次元')
    return spectrum_corpus(n, power_law_variances(dim, exponent) * dim, seed)


def embed_like(n: int, dim: int = 1536, head_energy: float = 0.95, seed: int = SEED) -> np.ndarray:
    """Text-embedding-like corpus with most energy in the first third of the spectrum."""
    logger.info(f'embed-likeコーパスを生成中: {n}件 x {dim}次元')
    return spectrum_corpus(n, head_heavy_variances(dim, head_energy), seed, offset_scale=0.05)


def blobs(n: int, centers, dim: int | None = None, spread: float = 0.1,
          seed: int = SEED) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Isotropic Gaussian blobs.

    Args:
        n: Number of vectors
        centers: Number of blobs, or a (c, D) array of blob means
        dim: Dimension when centers is a count
        spread: Per-coordinate standard deviation
        seed: Random seed

    Returns:
        (data (n, D) float32, labels (n,), means (c, D))
    """
    rng = np.random.default_rng(seed)
    if np.isscalar(centers):
        if dim is None:
            raise InvalidConfigError('dim is required when centers is a count')
        means = rng.uniform(-10.0, 10.0, size=(int(centers), dim))
    else:
        means = np.asarray(centers, dtype=np.float64)
    labels = np.arange(n) % means.shape[0]
    data = means[labels] + rng.standard_normal((n, means.shape[1])) * spread
    return data.astype(np.float32), labels, means


def split_queries(data, n_queries: int, seed: int = SEED) -> tuple[np.ndarray, np.ndarray]:
    """
    Hold out uniformly sampled rows as queries.

    Returns:
        (base without the held-out rows, queries), both in original row order
    """
    data = np.asarray(data)
    n = data.shape[0]
    if not 0 <= n_queries < n:
        raise InvalidConfigError(f'n_queries must be in 0..{n - 1}, got {n_queries}')
    rng = np.random.default_rng(seed)
    held_out = np.zeros(n, dtype=bool)
    held_out[rng.choice(n, size=n_queries, replace=False)] = True
    return data[~held_out], data[held_out]
