"""
Query execution over an IvfIndex.

Per probed cluster every candidate first gets the estimated distance dis′ and
its error bounds. Candidates whose lower bound already reaches the current
K-th distance are dropped; the rest are checked again with the exact head
inner product, and only the survivors of both checks get an exact distance.

Probing continues past nprobe clusters while fewer than min(K, N) candidates
have been scanned, so a search always returns min(K, N) results.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from tqdm import tqdm

from config import EPSILON0, M, THREADS
from core.errors import InvalidConfigError, MrqError, QueryError
from core.linalg import as_matrix, as_vector
from core.pca import rotate_batch
from distance.mrq import (
    Decision, QueryConstants, approximate_distance, combined_error, head_exact_distance,
    residual_variance, should_refine,
)
from index.ivf import IvfIndex
from quantize.rabitq import QuantizedQuery, estimate_inner_product, quantize_rotated_query
from search.heap import ResultHeap

logger = logging.getLogger(__name__)

# Rows per block when scanning a corpus exhaustively
BRUTE_FORCE_BLOCK_ROWS = 4096


class SearchMode(str, Enum):
    FULL = 'full'
    NO_CORRECTION = 'no-correction'
    EXACT_ONLY = 'exact-only'


@dataclass(frozen=True)
class SearchParams:
    """Per-search parameters."""

    top_k: int = 20
    nprobe: int = 1
    epsilon0: float = EPSILON0
    m: float = M
    mode: SearchMode = SearchMode.FULL
    # Head-exact recheck of stage-1 survivors; off refines every survivor directly
    stage2: bool = True

    def __post_init__(self):
        if self.top_k < 1:
            raise InvalidConfigError(f'top_k must be >= 1, got {self.top_k}')
        if self.nprobe < 1:
            raise InvalidConfigError(f'nprobe must be >= 1, got {self.nprobe}')
        if self.epsilon0 <= 0:
            raise InvalidConfigError(f'epsilon0 must be > 0, got {self.epsilon0}')
        if self.m <= 0:
            raise InvalidConfigError(f'm must be > 0, got {self.m}')
        try:
            object.__setattr__(self, 'mode', SearchMode(self.mode))
        except ValueError as e:
            raise InvalidConfigError(f'unknown search mode {self.mode!r}') from e

    def check(self, index: IvfIndex) -> None:
        if self.nprobe > index.k:
            raise InvalidConfigError(f'nprobe={self.nprobe} exceeds cluster count {index.k}')


@dataclass
class SearchStats:
    """Per-query counters; every scanned candidate lands in exactly one of the other three."""

    candidates_scanned: int = 0
    stage1_pruned: int = 0
    stage2_pruned: int = 0
    exact_computed: int = 0
    elapsed: float = 0.0

    def merge(self, other: 'SearchStats') -> None:
        self.candidates_scanned += other.candidates_scanned
        self.stage1_pruned += other.stage1_pruned
        self.stage2_pruned += other.stage2_pruned
        self.exact_computed += other.exact_computed
        self.elapsed += other.elapsed

    @property
    def exact_ratio(self) -> float:
        if self.candidates_scanned == 0:
            return 0.0
        return self.exact_computed / self.candidates_scanned


@dataclass
class ClusterQuery:
    """Query state relative to one probed cluster."""

    constants: QueryConstants
    quantized: QuantizedQuery
    centered_head: np.ndarray


@dataclass
class QueryContext:
    """
    Prepared query. Owned by a single search; per-cluster state is built on first probe.

    rotated: (D,) PCA-rotated query
    head, tail: split at d
    sigma: residual standard deviation of ⟨x_r, q_r⟩
    probe_order: clusters sorted by centroid distance (ties by cluster number)
    """

    rotated: np.ndarray
    head: np.ndarray
    tail: np.ndarray
    head_rotated: np.ndarray
    sigma: float
    q_tail_norm_sq: float
    probe_order: np.ndarray
    epsilon0: float
    m: float
    query_bits: int
    _clusters: dict = field(default_factory=dict, repr=False)

    def cluster(self, index: IvfIndex, cluster: int) -> ClusterQuery:
        cached = self._clusters.get(cluster)
        if cached is not None:
            return cached

        centered = self.head - index.centroid_heads[cluster].astype(np.float64)
        q_head_dist = float(np.sqrt(np.dot(centered, centered)))
        rotated = self.head_rotated - index.rotated_centroid_heads[cluster]
        if q_head_dist > 0.0:
            rotated = rotated / q_head_dist
        else:
            rotated = np.zeros_like(rotated)

        cached = ClusterQuery(
            constants=QueryConstants(
                q_head_dist=q_head_dist,
                q_tail_norm_sq=self.q_tail_norm_sq,
                sigma=self.sigma,
                m=self.m,
                epsilon0=self.epsilon0,
            ),
            quantized=quantize_rotated_query(rotated, self.query_bits),
            centered_head=centered,
        )
        self._clusters[cluster] = cached
        return cached


def prepare_query(q, index: IvfIndex, params: SearchParams) -> QueryContext:
    """
    Rotate and split a query and rank the clusters to probe.

    Raises:
        DimensionMismatchError: If len(q) != D
    """
    q = as_vector(q, index.dim)
    # Same projection path and storage precision as the tail store
    rotated = rotate_batch(index.pca, q[np.newaxis, :])[0].astype(np.float64)
    d = index.d
    head = rotated[:d]
    tail = rotated[d:]

    if index.config.centroid_mode == 'full':
        probe_space = rotated
    else:
        probe_space = head
    diff = index.centroids.vectors.astype(np.float64) - probe_space
    centroid_dists = np.einsum('ij,ij->i', diff, diff)
    probe_order = np.argsort(centroid_dists, kind='stable')

    return QueryContext(
        rotated=rotated,
        head=head,
        tail=tail,
        head_rotated=head @ index.rot.matrix.astype(np.float64),
        sigma=residual_variance(tail, index.tail_variances),
        q_tail_norm_sq=float(np.dot(tail, tail)),
        probe_order=probe_order,
        epsilon0=params.epsilon0,
        m=params.m,
        query_bits=index.config.query_bits,
    )


def _exact(index: IvfIndex, ctx: QueryContext, item_id: int) -> float:
    diff = index.tail_store[item_id].astype(np.float64) - ctx.rotated
    return float(np.dot(diff, diff))


def _exact_block(index: IvfIndex, ctx: QueryContext, ids: np.ndarray) -> np.ndarray:
    diff = index.tail_store[ids].astype(np.float64) - ctx.rotated
    return np.einsum('ij,ij->i', diff, diff)


def search(ctx: QueryContext, index: IvfIndex, params: SearchParams,
           trace: list | None = None) -> tuple[list[tuple[int, float]], SearchStats]:
    """
    Run one query.

    Args:
        ctx: QueryContext from prepare_query
        index: IvfIndex
        params: SearchParams
        trace: Optional list receiving (id, stage, lower_bound, tau) for every pruned candidate

    Returns:
        ((id, squared distance) list in ascending order, SearchStats)
    """
    params.check(index)
    started = time.perf_counter()
    heap = ResultHeap(params.top_k)
    stats = SearchStats()

    wanted = min(params.top_k, index.size)
    for probed, cluster in enumerate(ctx.probe_order):
        if probed >= params.nprobe and stats.candidates_scanned >= wanted:
            break
        block = index.blocks[int(cluster)]
        n = len(block)
        if n == 0:
            continue
        stats.candidates_scanned += n

        if params.mode == SearchMode.EXACT_ONLY:
            dists = _exact_block(index, ctx, block.ids)
            for item_id, dist in zip(block.ids, dists):
                heap.push(int(item_id), float(dist))
            stats.exact_computed += n
            continue

        cq = ctx.cluster(index, int(cluster))
        meta = block.meta
        est = estimate_inner_product(block.codes, meta.factors, cq.quantized, block.popcounts)
        dis_prime = approximate_distance(meta, cq.constants, est)

        if params.mode == SearchMode.NO_CORRECTION:
            for item_id, dist in zip(block.ids, dis_prime):
                heap.push(int(item_id), float(dist))
            continue

        eps_b, eps_r = combined_error(meta, cq.constants)
        lower = dis_prime - eps_b - eps_r

        # tau only shrinks within a cluster, so this batch is pruned for good
        tau = heap.tau()
        survivors = np.flatnonzero(lower < tau)
        stats.stage1_pruned += n - len(survivors)
        if trace is not None and len(survivors) < n:
            for row in np.flatnonzero(lower >= tau):
                trace.append((int(block.ids[row]), 1, float(lower[row]), tau))

        for row in survivors:
            tau = heap.tau()
            item_id = int(block.ids[row])
            decision = should_refine(dis_prime[row], eps_b[row], eps_r, tau)
            if decision == Decision.PRUNE:
                stats.stage1_pruned += 1
                if trace is not None:
                    trace.append((item_id, 1, float(lower[row]), tau))
                continue
            if decision == Decision.CHECK_STAGE2 and params.stage2:
                head_ip = float(np.dot(block.heads[row].astype(np.float64), cq.centered_head))
                dis_o = head_exact_distance(block.record_meta(row), cq.constants, head_ip)
                decision = should_refine(dis_prime[row], eps_b[row], eps_r, tau, dis_o)
                if decision == Decision.PRUNE:
                    stats.stage2_pruned += 1
                    if trace is not None:
                        trace.append((item_id, 2, dis_o - eps_r, tau))
                    continue
            heap.push(item_id, _exact(index, ctx, item_id))
            stats.exact_computed += 1

    if params.mode == SearchMode.NO_CORRECTION:
        # Ranked by dis′; only the winners get exact distances
        kept = heap.ids()
        stats.exact_computed = len(kept)
        stats.stage1_pruned = stats.candidates_scanned - len(kept)
        results = sorted(((item_id, _exact(index, ctx, item_id)) for item_id in kept), key=lambda e: (e[1], e[0]))
    else:
        results = heap.results()

    stats.elapsed = time.perf_counter() - started
    logger.debug(
        f'検索完了: 走査={stats.candidates_scanned}, 段階1枝刈り={stats.stage1_pruned}, '
        f'段階2枝刈り={stats.stage2_pruned}, 厳密計算={stats.exact_computed}'
    )
    return results, stats


def brute_force(q, corpus, top_k: int) -> list[tuple[int, float]]:
    """
    Exact top-K by squared Euclidean distance in the original space (ties by smaller id).

    Raises:
        DimensionMismatchError: If len(q) differs from the corpus dimension
        InvalidConfigError: If the corpus is empty or top_k < 1
    """
    corpus = as_matrix(corpus)
    n = corpus.shape[0]
    if n == 0:
        raise InvalidConfigError('corpus is empty')
    if top_k < 1:
        raise InvalidConfigError(f'top_k must be >= 1, got {top_k}')
    q = as_vector(q, corpus.shape[1])

    dists = np.empty(n, dtype=np.float64)
    for start in range(0, n, BRUTE_FORCE_BLOCK_ROWS):
        diff = corpus[start:start + BRUTE_FORCE_BLOCK_ROWS].astype(np.float64) - q
        dists[start:start + diff.shape[0]] = np.einsum('ij,ij->i', diff, diff)

    if top_k < n:
        kth = np.partition(dists, top_k - 1)[top_k - 1]
        pool = np.flatnonzero(dists <= kth)
    else:
        pool = np.arange(n)
    order = pool[np.lexsort((pool, dists[pool]))][:top_k]
    return [(int(i), float(dists[i])) for i in order]


@dataclass
class BatchResult:
    """Output of batch_search, in query order."""

    results: list[list[tuple[int, float]]]
    stats: SearchStats
    per_query: list[SearchStats]


def batch_search(queries, index: IvfIndex, params: SearchParams, threads: int = THREADS,
                 progress: bool = False) -> BatchResult:
    """
    Search many queries, sharing the index read-only across worker threads.

    Results keep the input order; the aggregate stats are sums over all queries.

    Raises:
        QueryError: Wrapping the first failing query's error with its index
    """
    params.check(index)
    queries = np.asarray(queries)
    if queries.size == 0:
        return BatchResult(results=[], stats=SearchStats(), per_query=[])
    # Rows are validated one by one so a failure names its query
    queries = np.atleast_2d(queries)

    def run(position: int):
        try:
            ctx = prepare_query(queries[position], index, params)
            return search(ctx, index, params)
        except MrqError as e:
            raise QueryError(position, e) from e

    positions = range(queries.shape[0])
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        outputs = executor.map(run, positions)
        if progress:
            outputs = tqdm(outputs, total=len(positions), desc='search')
        outputs = list(outputs)

    total = SearchStats()
    for _, stats in outputs:
        total.merge(stats)
    return BatchResult(
        results=[result for result, _ in outputs],
        stats=total,
        per_query=[stats for _, stats in outputs],
    )
