"""Recall/latency sweeps over a parameter grid."""

import itertools
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

from config import THREADS
from evaluate.metrics import recall_at_k, result_ids
from index.ivf import IvfIndex
from search.engine import SearchMode, SearchParams, batch_search

logger = logging.getLogger(__name__)

REPORT_COLUMNS = ['nprobe', 'epsilon0', 'm', 'stage2', 'recall', 'mean_ms', 'p99_ms', 'exact_ratio', 'scanned']


@dataclass(frozen=True)
class GridPoint:
    nprobe: int
    epsilon0: float
    m: float


def parameter_grid(nprobes, epsilons, ms) -> list[GridPoint]:
    """Cartesian product with nprobe ascending and varying slowest."""
    return [
        GridPoint(nprobe=int(nprobe), epsilon0=float(eps), m=float(m))
        for nprobe, eps, m in itertools.product(sorted(nprobes), epsilons, ms)
    ]


def evaluate_point(index: IvfIndex, queries, groundtruth, params: SearchParams,
                   threads: int = THREADS) -> dict:
    """
    Search every query at one grid point and summarize.

    Returns:
        Report row dict keyed by REPORT_COLUMNS
    """
    batch = batch_search(queries, index, params, threads)
    # Searches return min(K, N) ids per query
    top_k = min(params.top_k, index.size)
    recall = recall_at_k(result_ids(batch.results), groundtruth, top_k)
    latencies = np.array([s.elapsed * 1000.0 for s in batch.per_query], dtype=np.float64)
    count = max(len(batch.per_query), 1)

    row = {
        'nprobe': params.nprobe,
        'epsilon0': params.epsilon0,
        'm': params.m,
        'stage2': params.stage2,
        'recall': round(recall, 4),
        'mean_ms': round(float(latencies.mean()) if len(latencies) else 0.0, 4),
        'p99_ms': round(float(np.percentile(latencies, 99)) if len(latencies) else 0.0, 4),
        'exact_ratio': round(batch.stats.exact_ratio, 4),
        'scanned': round(batch.stats.candidates_scanned / count, 2),
    }
    logger.info(
        f'nprobe={row["nprobe"]}, ε0={row["epsilon0"]}, m={row["m"]}: '
        f'recall@{top_k}={row["recall"]:.4f}, 平均={row["mean_ms"]:.3f}ms, '
        f'p99={row["p99_ms"]:.3f}ms, 厳密計算率={row["exact_ratio"]:.4f}'
    )
    return row


def bench(index: IvfIndex, queries, groundtruth, grid: list[GridPoint], top_k: int = 20,
          mode: SearchMode | str = SearchMode.FULL, threads: int = THREADS, stage2: bool = True) -> pd.DataFrame:
    """
    Evaluate each grid point; one untimed warm-up sweep over all queries runs first.

    stage2=False refines every stage-1 survivor without the head-exact recheck.

    Returns:
        DataFrame with REPORT_COLUMNS, one row per grid point in grid order
    """
    if not grid:
        return pd.DataFrame(columns=REPORT_COLUMNS)

    warmup = SearchParams(top_k=top_k, nprobe=grid[0].nprobe, epsilon0=grid[0].epsilon0, m=grid[0].m, mode=mode,
                          stage2=stage2)
    batch_search(queries, index, warmup, threads)
    logger.info(f'ウォームアップ完了: {len(queries)}クエリ')

    rows = []
    for point in grid:
        params = SearchParams(top_k=top_k, nprobe=point.nprobe, epsilon0=point.epsilon0, m=point.m, mode=mode,
                              stage2=stage2)
        rows.append(evaluate_point(index, queries, groundtruth, params, threads))
    return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def first_reaching(report: pd.DataFrame, recall: float) -> pd.Series | None:
    """First row (in report order) with recall >= the target."""
    hits = report[report['recall'] >= recall]
    if hits.empty:
        return None
    return hits.iloc[0]


def write_report(report: pd.DataFrame, path: str | Path) -> None:
    report.to_csv(path, index=False, columns=REPORT_COLUMNS)
    logger.info(f'評価レポートを保存しました: {path} ({len(report)}行)')
