"""PCA training and projection."""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from config import PCA_SAMPLE_LIMIT, PCA_SAMPLE_SEED
from core.binio import BinaryReader, BinaryWriter
from core.errors import DegenerateDataError, InvalidConfigError, VersionMismatchError
from core.linalg import as_matrix, as_vector

logger = logging.getLogger(__name__)

PCA_MAGIC = b'MRQPCA01'

# Rows per covariance accumulation block (fixed so sums are reproducible)
COVARIANCE_BLOCK_ROWS = 4096


@dataclass(frozen=True)
class PcaModel:
    """
    PCA projection stage.

    mean: (D,) float32 data mean
    rotation: (D, D) float32, rows are eigenvectors ordered by descending eigenvalue
    variances: (D,) float32 eigenvalues (per-dimension variance after rotation), non-increasing
    """

    mean: np.ndarray
    rotation: np.ndarray
    variances: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    def total_variance(self) -> float:
        return float(np.sum(self.variances, dtype=np.float64))


def _subsample(data: np.ndarray, sample_limit: int) -> np.ndarray:
    """Uniformly subsample rows beyond sample_limit with a fixed seed."""
    n = data.shape[0]
    if n <= sample_limit:
        return data
    rng = np.random.default_rng(PCA_SAMPLE_SEED)
    rows = np.sort(rng.choice(n, size=sample_limit, replace=False))
    logger.info(f'PCA学習用に{n}件から{sample_limit}件をサンプリングしました')
    return data[rows]


def _covariance(sample: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Two-pass blocked mean and covariance (divisor N−1) in float64."""
    n, dim = sample.shape

    total = np.zeros(dim, dtype=np.float64)
    for start in range(0, n, COVARIANCE_BLOCK_ROWS):
        total += sample[start:start + COVARIANCE_BLOCK_ROWS].sum(axis=0, dtype=np.float64)
    mean = total / n

    scatter = np.zeros((dim, dim), dtype=np.float64)
    for start in range(0, n, COVARIANCE_BLOCK_ROWS):
        block = sample[start:start + COVARIANCE_BLOCK_ROWS].astype(np.float64) - mean
        scatter += block.T @ block

    return mean, scatter / (n - 1)


def train_pca(data, sample_limit: int = PCA_SAMPLE_LIMIT) -> PcaModel:
    """
    Train the PCA rotation from data.

    Covariance is accumulated in fixed-size row blocks and decomposed with a
    symmetric eigensolver. Variances use the unbiased N−1 divisor.

    Args:
        data: (N, D) matrix
        sample_limit: Maximum number of rows used for training (>= 2)

    Returns:
        PcaModel

    Raises:
        DegenerateDataError: If N < 2 or every row is identical
        InvalidConfigError: If sample_limit < 2
    """
    if sample_limit < 2:
        raise InvalidConfigError(f'sample_limit must be >= 2, got {sample_limit}')

    data = as_matrix(data)
    n, dim = data.shape
    if n < 2:
        raise DegenerateDataError(f'PCA requires at least 2 rows, got {n}')

    sample = _subsample(data, sample_limit)
    logger.info(f'PCAを学習中: {sample.shape[0]}件 x {dim}次元')

    mean, cov = _covariance(sample)
    trace = float(np.trace(cov))
    if trace <= 0.0:
        raise DegenerateDataError('data has zero total variance (all rows identical)')

    eigenvalues, eigenvectors = np.linalg.eigh(cov)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = np.clip(eigenvalues[order], 0.0, None)
    rotation = eigenvectors[:, order].T

    # Deterministic sign: largest-magnitude entry of each row is positive
    pivots = np.argmax(np.abs(rotation), axis=1)
    signs = np.sign(rotation[np.arange(dim), pivots])
    signs[signs == 0] = 1.0
    rotation = rotation * signs[:, np.newaxis]

    model = PcaModel(
        mean=mean.astype(np.float32),
        rotation=rotation.astype(np.float32),
        variances=eigenvalues.astype(np.float32),
    )
    logger.info(
        f'PCA学習完了: 総分散={trace:.6g}, '
        f'先頭次元の分散={float(eigenvalues[0]):.6g}, 末尾次元の分散={float(eigenvalues[-1]):.6g}'
    )
    return model


def rotate(model: PcaModel, v) -> np.ndarray:
    """
    Project a single vector: rotation·(v − mean).

    Raises:
        DimensionMismatchError: If len(v) != D
    """
    v = as_vector(v, model.dim)
    centered = v - model.mean.astype(np.float64)
    return model.rotation.astype(np.float64) @ centered


def rotate_batch(model: PcaModel, data, block_rows: int = COVARIANCE_BLOCK_ROWS) -> np.ndarray:
    """
    Project every row of data; returns a float32 (N, D) matrix.

    Computation runs in float64 per block, storage is float32.
    """
    data = as_matrix(data, model.dim)
    mean = model.mean.astype(np.float64)
    rotation_t = model.rotation.astype(np.float64).T
    out = np.empty(data.shape, dtype=np.float32)
    for start in range(0, data.shape[0], block_rows):
        block = data[start:start + block_rows].astype(np.float64) - mean
        out[start:start + block_rows] = block @ rotation_t
    return out


def write_pca(model: PcaModel, writer: BinaryWriter) -> None:
    """Append the PCA blob: magic, u32 D, mean, rotation (row-major), variances."""
    writer.raw(PCA_MAGIC)
    writer.u32(model.dim)
    writer.array(model.mean, '<f4')
    writer.array(model.rotation, '<f4')
    writer.array(model.variances, '<f4')


def read_pca(reader: BinaryReader) -> PcaModel:
    """Read a PCA blob written by write_pca."""
    start = reader.offset
    magic = reader.raw(len(PCA_MAGIC), 'PCA magic')
    if magic != PCA_MAGIC:
        raise VersionMismatchError(f'unknown PCA header {magic!r}', start)
    dim = reader.u32(what='PCA dimension')
    mean = reader.array('<f4', dim, 'PCA mean')
    rotation = reader.array('<f4', dim * dim, 'PCA rotation').reshape(dim, dim)
    variances = reader.array('<f4', dim, 'PCA variances')
    return PcaModel(mean=mean, rotation=rotation, variances=variances)


def save_pca(model: PcaModel, path: str | Path) -> None:
    """Write a PcaModel to a file."""
    writer = BinaryWriter()
    write_pca(model, writer)
    Path(path).write_bytes(writer.getvalue())
    logger.info(f'PCAモデルを保存しました: {path}')


def load_pca(path: str | Path) -> PcaModel:
    """Read a PcaModel from a file."""
    reader = BinaryReader(Path(path).read_bytes())
    model = read_pca(reader)
    logger.info(f'PCAモデルを読み込みました: {path} (D={model.dim})')
    return model
