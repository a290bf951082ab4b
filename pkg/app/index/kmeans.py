"""k-means clustering: k-means++ seeding followed by Lloyd iterations."""

import logging
from dataclasses import dataclass, field

import numpy as np
from sklearn.cluster import kmeans_plusplus

from config import KMEANS_MAX_ITERS, SEED
from core.errors import InvalidConfigError
from core.linalg import as_matrix, squared_norms

logger = logging.getLogger(__name__)

# Stop when WCSS improves by less than this fraction
RELATIVE_TOL = 1e-4

# Rows per assignment block
ASSIGN_BLOCK_ROWS = 8192


@dataclass(frozen=True)
class Centroids:
    """
    Trained cluster centers.

    k: number of clusters
    vectors: (k, dim) float32 centers
    wcss_history: within-cluster sum of squares after each accepted assignment
    """

    k: int
    vectors: np.ndarray
    wcss_history: list[float] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def assign(data, centers) -> tuple[np.ndarray, np.ndarray]:
    """
    Nearest-center assignment by squared Euclidean distance (ties go to the lower index).

    Args:
        data: (N, dim) matrix
        centers: (k, dim) matrix

    Returns:
        (labels (N,) int64, squared distances (N,) float64)
    """
    data = np.asarray(data)
    centers = np.asarray(centers, dtype=np.float64)
    center_norms = squared_norms(centers)
    n = data.shape[0]
    labels = np.empty(n, dtype=np.int64)
    dists = np.empty(n, dtype=np.float64)

    for start in range(0, n, ASSIGN_BLOCK_ROWS):
        block = data[start:start + ASSIGN_BLOCK_ROWS].astype(np.float64)
        d2 = squared_norms(block)[:, np.newaxis] - 2.0 * (block @ centers.T) + center_norms[np.newaxis, :]
        best = np.argmin(d2, axis=1)
        labels[start:start + block.shape[0]] = best
        diff = block - centers[best]
        dists[start:start + block.shape[0]] = np.einsum('ij,ij->i', diff, diff)

    return labels, dists


def _update_centers(data: np.ndarray, labels: np.ndarray, dists: np.ndarray, k: int) -> np.ndarray:
    """Recompute means; an empty cluster takes the farthest member of the largest cluster."""
    labels = labels.copy()
    dists = dists.copy()
    counts = np.bincount(labels, minlength=k)

    for empty in np.flatnonzero(counts == 0):
        largest = int(np.argmax(counts))
        members = np.flatnonzero(labels == largest)
        farthest = members[int(np.argmax(dists[members]))]
        labels[farthest] = empty
        dists[farthest] = 0.0
        counts[largest] -= 1
        counts[empty] = 1
        logger.debug(f'空クラスタ{empty}をクラスタ{largest}の最遠点で補充しました')

    sums = np.zeros((k, data.shape[1]), dtype=np.float64)
    np.add.at(sums, labels, data)
    return sums / counts[:, np.newaxis]


def kmeans(data, k: int, max_iters: int = KMEANS_MAX_ITERS, seed: int = SEED) -> Centroids:
    """
    Cluster rows of data into k groups.

    The within-cluster sum of squares never increases across iterations; the
    loop ends after max_iters or when the relative improvement drops below 1e-4.

    Args:
        data: (N, dim) matrix
        k: Number of clusters (1 <= k <= N)
        max_iters: Maximum Lloyd iterations
        seed: Seed for k-means++ initialization

    Returns:
        Centroids

    Raises:
        InvalidConfigError: If k < 1, k > N or max_iters < 1
    """
    data = as_matrix(data).astype(np.float64)
    n = data.shape[0]
    if k < 1 or k > n:
        raise InvalidConfigError(f'k must be in 1..{n}, got {k}')
    if max_iters < 1:
        raise InvalidConfigError(f'max_iters must be >= 1, got {max_iters}')

    if k == n:
        logger.info(f'k=N ({n}) のため各点をそのままセントロイドにします')
        return Centroids(k=k, vectors=data.astype(np.float32), wcss_history=[0.0])

    centers, _ = kmeans_plusplus(data, n_clusters=k, random_state=seed)
    labels, dists = assign(data, centers)
    wcss = float(dists.sum())
    history = [wcss]
    logger.info(f'k-meansを開始: N={n}, k={k}, 次元={data.shape[1]}, 初期WCSS={wcss:.6g}')

    for iteration in range(max_iters):
        new_centers = _update_centers(data, labels, dists, k)
        new_labels, new_dists = assign(data, new_centers)
        new_wcss = float(new_dists.sum())
        if new_wcss > wcss:
            break

        centers, labels, dists = new_centers, new_labels, new_dists
        history.append(new_wcss)
        improvement = wcss - new_wcss
        wcss = new_wcss
        if wcss == 0.0 or improvement < RELATIVE_TOL * (wcss + improvement):
            logger.debug(f'k-meansが{iteration + 1}回目で収束しました')
            break

    logger.info(f'k-means完了: 反復{len(history) - 1}回, WCSS={wcss:.6g}')
    return Centroids(k=k, vectors=centers.astype(np.float32), wcss_history=history)
