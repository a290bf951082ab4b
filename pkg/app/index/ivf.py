"""
Inverted-file index over PCA-projected vectors.

Construction order: PCA training, projection of every vector, tail norms,
head split, k-means on the heads, then per cluster centering by the assigned
centroid, normalization, sign quantization and factor computation.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from config import (
    C0, EPSILON0, KMEANS_MAX_ITERS, M, PCA_SAMPLE_LIMIT, QUERY_BITS, SEED, THREADS,
)
from core.errors import InvalidConfigError
from core.linalg import RandomRotation, as_matrix, random_orthogonal, squared_norms
from core.pca import PcaModel, rotate_batch, train_pca
from distance.mrq import MrqRecordMeta
from index.kmeans import Centroids, assign, kmeans
from quantize.rabitq import (
    ZERO_NORM_TOL, CodeFactors, QuantizerConfig, pack_bits, popcount, quantize_vectors, words_per_code,
)

logger = logging.getLogger(__name__)

CENTROID_MODES = ('projected', 'full')


def default_cluster_count(n: int) -> int:
    """4096 clusters for million-scale corpora, otherwise about 250 vectors per cluster (min 16)."""
    if n >= 1_000_000:
        k = 4096
    else:
        k = max(16, n // 250)
    return max(1, min(k, n))


@dataclass(frozen=True)
class IndexConfig:
    """Build parameters of an IvfIndex."""

    d: int
    k: int
    query_bits: int = QUERY_BITS
    epsilon0: float = EPSILON0
    m: float = M
    c0: float = C0
    seed: int = SEED
    sample_limit: int = PCA_SAMPLE_LIMIT
    max_iters: int = KMEANS_MAX_ITERS
    centroid_mode: str = 'projected'

    def __post_init__(self):
        if self.k < 1:
            raise InvalidConfigError(f'k must be >= 1, got {self.k}')
        if self.m <= 0:
            raise InvalidConfigError(f'm must be > 0, got {self.m}')
        if self.centroid_mode not in CENTROID_MODES:
            raise InvalidConfigError(
                f'centroid_mode must be one of {CENTROID_MODES}, got {self.centroid_mode!r}'
            )
        # Validates d, epsilon0 and query_bits
        self.quantizer()

    def quantizer(self) -> QuantizerConfig:
        return QuantizerConfig(d=self.d, epsilon0=self.epsilon0, c0=self.c0, query_bits=self.query_bits)


@dataclass
class ClusterBlock:
    """
    Records of one cluster in structure-of-arrays layout.

    ids: (n,) int64 external ids (row numbers of the corpus)
    codes: (n, W) uint64 packed sign codes
    denom, err_coeff: (n,) float32 code factors
    dists: (n,) float32 ‖x_d − c‖
    tail_norms: (n,) float32 ‖x_r‖
    heads: (n, d) float32 centered heads x_d − c
    """

    ids: np.ndarray
    codes: np.ndarray
    denom: np.ndarray
    err_coeff: np.ndarray
    dists: np.ndarray
    tail_norms: np.ndarray
    heads: np.ndarray
    popcounts: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        self.popcounts = popcount(self.codes) if len(self.ids) else np.zeros(0, dtype=np.int64)

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def meta(self) -> MrqRecordMeta:
        """Block-wide metadata as float64 arrays."""
        return MrqRecordMeta(
            dist_to_centroid=self.dists.astype(np.float64),
            tail_norm=self.tail_norms.astype(np.float64),
            factors=CodeFactors(
                denom=self.denom.astype(np.float64),
                err_coeff=self.err_coeff.astype(np.float64),
            ),
        )

    def record_meta(self, row: int) -> MrqRecordMeta:
        """Scalar metadata of one record."""
        return MrqRecordMeta(
            dist_to_centroid=float(self.dists[row]),
            tail_norm=float(self.tail_norms[row]),
            factors=CodeFactors(denom=float(self.denom[row]), err_coeff=float(self.err_coeff[row])),
        )

    def nbytes(self) -> dict:
        return {
            'codes': int(self.codes.nbytes),
            'factors': int(self.denom.nbytes + self.err_coeff.nbytes),
            'norms': int(self.dists.nbytes + self.tail_norms.nbytes),
            'heads': int(self.heads.nbytes),
            'ids': int(len(self.ids) * 4),
        }


@dataclass
class IvfIndex:
    """
    Built index. Immutable after construction and safe to share across searches.

    tail_store holds every rotated vector (N, D) float32, row i = id i, for exact refinement.
    build_seconds is the wall-clock build time, None when unknown.
    """

    config: IndexConfig
    pca: PcaModel
    rot: RandomRotation
    centroids: Centroids
    blocks: list[ClusterBlock]
    tail_store: np.ndarray
    build_seconds: float | None = None
    rotated_centroid_heads: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        # c_d·R, so per-cluster query rotation is one subtraction
        self.rotated_centroid_heads = self.centroid_heads.astype(np.float64) @ self.rot.matrix.astype(np.float64)

    @property
    def dim(self) -> int:
        return self.pca.dim

    @property
    def d(self) -> int:
        return self.config.d

    @property
    def k(self) -> int:
        return self.centroids.k

    @property
    def size(self) -> int:
        return self.tail_store.shape[0]

    @property
    def centroid_heads(self) -> np.ndarray:
        """First d coordinates of every centroid, used as quantization centers."""
        return self.centroids.vectors[:, :self.config.d]

    @property
    def head_variances(self) -> np.ndarray:
        return self.pca.variances[:self.config.d]

    @property
    def tail_variances(self) -> np.ndarray:
        return self.pca.variances[self.config.d:]

    def cluster_sizes(self) -> np.ndarray:
        return np.array([len(block) for block in self.blocks], dtype=np.int64)


def _empty_block(d: int) -> ClusterBlock:
    words = words_per_code(d)
    return ClusterBlock(
        ids=np.zeros(0, dtype=np.int64),
        codes=np.zeros((0, words), dtype=np.uint64),
        denom=np.zeros(0, dtype=np.float32),
        err_coeff=np.zeros(0, dtype=np.float32),
        dists=np.zeros(0, dtype=np.float32),
        tail_norms=np.zeros(0, dtype=np.float32),
        heads=np.zeros((0, d), dtype=np.float32),
    )


def encode_cluster(ids: np.ndarray, heads: np.ndarray, tail_norms: np.ndarray,
                   center: np.ndarray, rot: RandomRotation) -> ClusterBlock:
    """
    Quantize the members of one cluster.

    A member that coincides with its centroid gets the all-ones code,
    denom = 1, err_coeff = 0 and distance 0.
    """
    d = rot.dim
    if len(ids) == 0:
        return _empty_block(d)

    residual = heads.astype(np.float64) - center.astype(np.float64)
    dists = np.sqrt(squared_norms(residual))
    nonzero = dists >= ZERO_NORM_TOL

    n = len(ids)
    codes = pack_bits(np.ones((n, d), dtype=bool))
    denom = np.ones(n, dtype=np.float64)
    err_coeff = np.zeros(n, dtype=np.float64)
    dists = np.where(nonzero, dists, 0.0)
    if np.any(nonzero):
        unit = residual[nonzero] / dists[nonzero, np.newaxis]
        codes[nonzero], denom[nonzero], err_coeff[nonzero] = quantize_vectors(unit, rot)

    return ClusterBlock(
        ids=np.asarray(ids, dtype=np.int64),
        codes=np.ascontiguousarray(codes, dtype=np.uint64),
        denom=denom.astype(np.float32),
        err_coeff=err_coeff.astype(np.float32),
        dists=dists.astype(np.float32),
        tail_norms=np.asarray(tail_norms, dtype=np.float32),
        heads=residual.astype(np.float32),
    )


def build_index(corpus, config: IndexConfig, pca: PcaModel | None = None,
                threads: int = THREADS) -> IvfIndex:
    """
    Build an IvfIndex from a corpus.

    Args:
        corpus: (N, D) matrix; row i gets id i
        config: IndexConfig
        pca: Pre-trained PcaModel (trained on the corpus when omitted)
        threads: Worker threads for per-cluster encoding

    Returns:
        IvfIndex

    Raises:
        InvalidConfigError: If k > N, d > D or the PCA dimension differs from D
        DegenerateDataError: If the corpus cannot train a PCA
    """
    started = time.perf_counter()
    corpus = as_matrix(corpus)
    n, dim = corpus.shape
    if config.k > n:
        raise InvalidConfigError(f'k={config.k} exceeds corpus size {n}')
    if config.d > dim:
        raise InvalidConfigError(f'd={config.d} exceeds dimension {dim}')
    if n >= 2 ** 32:
        raise InvalidConfigError(f'corpus too large for 32-bit ids: {n}')

    logger.info(f'インデックスを構築中: N={n}, D={dim}, d={config.d}, k={config.k}, モード={config.centroid_mode}')

    if pca is None:
        pca = train_pca(corpus, config.sample_limit)
    elif pca.dim != dim:
        raise InvalidConfigError(f'PCA dimension {pca.dim} != corpus dimension {dim}')

    rotated = rotate_batch(pca, corpus)
    heads = rotated[:, :config.d]
    tail_norms = np.sqrt(squared_norms(rotated[:, config.d:]))

    train_data = heads if config.centroid_mode == 'projected' else rotated
    centroids = kmeans(train_data, config.k, config.max_iters, config.seed)
    labels, _ = assign(train_data, centroids.vectors)

    rot = random_orthogonal(config.d, config.seed)
    centers = centroids.vectors[:, :config.d]
    members = [np.flatnonzero(labels == c) for c in range(config.k)]

    def encode(cluster: int) -> ClusterBlock:
        ids = members[cluster]
        return encode_cluster(ids, heads[ids], tail_norms[ids], centers[cluster], rot)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        blocks = list(executor.map(encode, range(config.k)))

    index = IvfIndex(
        config=config, pca=pca, rot=rot, centroids=centroids, blocks=blocks, tail_store=rotated,
        build_seconds=time.perf_counter() - started,
    )
    sizes = index.cluster_sizes()
    logger.info(
        f'インデックス構築完了: {index.build_seconds:.2f}秒, クラスタサイズ 最小={int(sizes.min())}, '
        f'平均={float(sizes.mean()):.1f}, 最大={int(sizes.max())}'
    )
    return index


def index_summary(index: IvfIndex) -> dict:
    """Shape, defaults, cluster-size statistics and memory footprint of an index."""
    sizes = index.cluster_sizes()
    totals: dict[str, int] = {'codes': 0, 'factors': 0, 'norms': 0, 'heads': 0, 'ids': 0}
    for block in index.blocks:
        for key, value in block.nbytes().items():
            totals[key] += value
    totals['tail_store'] = int(index.tail_store.nbytes)
    totals['centroids'] = int(index.centroids.vectors.nbytes)

    return {
        'D': index.dim,
        'd': index.d,
        'k': index.k,
        'N': index.size,
        'query_bits': index.config.query_bits,
        'epsilon0': index.config.epsilon0,
        'm': index.config.m,
        'c0': index.config.c0,
        'centroid_mode': index.config.centroid_mode,
        'cluster_min': int(sizes.min()),
        'cluster_mean': round(float(sizes.mean()), 2),
        'cluster_max': int(sizes.max()),
        'empty_clusters': int((sizes == 0).sum()),
        'head_variance_ratio': round(
            float(index.head_variances.sum(dtype=np.float64)) / max(index.pca.total_variance(), 1e-30), 4
        ),
        'build_seconds': round(index.build_seconds, 3) if index.build_seconds is not None else 'unknown',
        'bytes': totals,
    }
