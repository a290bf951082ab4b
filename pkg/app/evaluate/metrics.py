"""Ground truth and recall."""

import logging

import numpy as np
from tqdm import tqdm

from core.errors import DimensionMismatchError, InvalidConfigError
from core.linalg import as_matrix
from search.engine import brute_force

logger = logging.getLogger(__name__)


def generate_groundtruth(corpus, queries, top_k: int, progress: bool = False) -> np.ndarray:
    """
    Exact nearest-neighbor ids for every query.

    Args:
        corpus: (N, D) matrix
        queries: (Q, D) matrix
        top_k: Neighbors per query (capped at N)
        progress: Show a progress bar

    Returns:
        (Q, min(top_k, N)) int32 matrix, row i in ascending-distance order (ties by id)

    Raises:
        DimensionMismatchError: If corpus and queries differ in dimension
    """
    corpus = as_matrix(corpus)
    queries = as_matrix(queries)
    if corpus.shape[1] != queries.shape[1]:
        raise DimensionMismatchError(
            f'corpus dimension {corpus.shape[1]} != query dimension {queries.shape[1]}'
        )

    width = min(top_k, corpus.shape[0])
    truth = np.empty((queries.shape[0], width), dtype=np.int32)
    rows = range(queries.shape[0])
    if progress:
        rows = tqdm(rows, desc='groundtruth')
    for i in rows:
        truth[i] = [item_id for item_id, _ in brute_force(queries[i], corpus, width)]

    logger.info(f'正解データを生成しました: {queries.shape[0]}クエリ x {width}近傍')
    return truth


def recall_at_k(results, groundtruth, top_k: int) -> float:
    """
    Mean over queries of |returned ∩ true| / K using the first K entries of each row.

    Args:
        results: Per-query id lists (or a 2-D array)
        groundtruth: Per-query true id lists (or a 2-D array)
        top_k: K

    Raises:
        InvalidConfigError: If any row is shorter than K or the row counts differ
    """
    if top_k < 1:
        raise InvalidConfigError(f'top_k must be >= 1, got {top_k}')
    if len(results) != len(groundtruth):
        raise InvalidConfigError(f'{len(results)} result rows vs {len(groundtruth)} ground-truth rows')
    if len(results) == 0:
        return 0.0

    hits = 0
    for row, (found, truth) in enumerate(zip(results, groundtruth)):
        if len(found) < top_k or len(truth) < top_k:
            raise InvalidConfigError(f'row {row} has fewer than {top_k} entries')
        hits += len({int(i) for i in found[:top_k]} & {int(i) for i in truth[:top_k]})
    return hits / (top_k * len(results))


def result_ids(results: list[list[tuple[int, float]]]) -> list[list[int]]:
    """Strip distances from search output."""
    return [[item_id for item_id, _ in row] for row in results]
