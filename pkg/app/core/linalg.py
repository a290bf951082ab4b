"""Dense vector primitives and random orthogonal rotations."""

import logging
from dataclasses import dataclass

import numpy as np

from core.errors import DimensionMismatchError, InvalidConfigError, DegenerateDataError

logger = logging.getLogger(__name__)

# Tolerance for orthogonality checks (per entry of M·Mᵀ − I)
ORTHOGONALITY_TOL = 1e-4


def as_vector(v, dim: int | None = None) -> np.ndarray:
    """
    Validate a vector and return it as a 1-D float64 array.

    Args:
        v: Sequence of numbers
        dim: Expected length (optional)

    Returns:
        1-D float64 array

    Raises:
        DimensionMismatchError: If the length differs from dim
        DegenerateDataError: If any entry is NaN or Inf
    """
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if dim is not None and arr.shape[0] != dim:
        raise DimensionMismatchError(f'expected length {dim}, got {arr.shape[0]}')
    if not np.all(np.isfinite(arr)):
        raise DegenerateDataError('vector contains NaN or Inf')
    return arr


def as_matrix(data, dim: int | None = None) -> np.ndarray:
    """
    Validate a data matrix (rows are vectors) and return it as a 2-D array.

    The dtype is kept when already floating point so large float32 corpora
    are not copied.

    Raises:
        DimensionMismatchError: If data is not 2-D or the column count differs from dim
        DegenerateDataError: If any entry is NaN or Inf
    """
    arr = np.asarray(data)
    if arr.dtype.kind != 'f':
        arr = arr.astype(np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DimensionMismatchError(f'expected a 2-D matrix, got {arr.ndim} dimensions')
    if dim is not None and arr.shape[1] != dim:
        raise DimensionMismatchError(f'expected {dim} columns, got {arr.shape[1]}')
    if not np.all(np.isfinite(arr)):
        raise DegenerateDataError('data contains NaN or Inf')
    return arr


def squared_euclidean(a, b) -> float:
    """Squared Euclidean distance Σ(aᵢ−bᵢ)², accumulated in float64."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise DimensionMismatchError(f'length mismatch: {a.shape[0]} vs {b.shape[0]}')
    diff = a - b
    return float(np.dot(diff, diff))


def inner_product(a, b) -> float:
    """Inner product Σaᵢbᵢ, accumulated in float64."""
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise DimensionMismatchError(f'length mismatch: {a.shape[0]} vs {b.shape[0]}')
    return float(np.dot(a, b))


def squared_norms(rows: np.ndarray) -> np.ndarray:
    """Row-wise squared norms in float64."""
    rows = np.asarray(rows, dtype=np.float64)
    return np.einsum('ij,ij->i', rows, rows)


@dataclass(frozen=True)
class RandomRotation:
    """Seeded random orthogonal d×d matrix (stored as float32)."""

    matrix: np.ndarray
    seed: int

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def apply_transpose(self, v) -> np.ndarray:
        """Return rotᵀ·v for a vector, or the row-wise equivalent for a matrix."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape[-1] != self.dim:
            raise DimensionMismatchError(f'expected length {self.dim}, got {v.shape[-1]}')
        return v @ self.matrix.astype(np.float64)


def random_orthogonal(dim: int, seed: int) -> RandomRotation:
    """
    Generate a Haar-distributed random orthogonal matrix.

    QR decomposition of a seeded standard-Gaussian matrix, with the columns of Q
    sign-corrected so that R has a positive diagonal.

    Args:
        dim: Matrix dimension (>= 1)
        seed: Random seed; identical seeds give bit-identical matrices

    Returns:
        RandomRotation

    Raises:
        InvalidConfigError: If dim < 1
    """
    if dim < 1:
        raise InvalidConfigError(f'rotation dimension must be >= 1, got {dim}')

    rng = np.random.default_rng(seed)
    gaussian = rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(gaussian)
    signs = np.sign(np.diag(r))
    signs[signs == 0] = 1.0
    q = q * signs[np.newaxis, :]

    matrix = q.astype(np.float32)
    logger.debug(f'ランダム直交行列を生成しました: dim={dim}, seed={seed}')
    return RandomRotation(matrix=matrix, seed=int(seed))


def orthogonality_error(matrix: np.ndarray) -> float:
    """Largest absolute entry of M·Mᵀ − I."""
    m = np.asarray(matrix, dtype=np.float64)
    return float(np.max(np.abs(m @ m.T - np.eye(m.shape[0]))))
