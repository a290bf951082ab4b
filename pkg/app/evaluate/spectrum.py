"""PCA variance spectrum diagnostic."""

import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from config import PCA_SAMPLE_LIMIT
from core.pca import PcaModel, train_pca

logger = logging.getLogger(__name__)

ENERGY_LEVELS = (0.5, 0.9, 0.95, 0.99)


@dataclass(frozen=True)
class SpectrumReport:
    """
    table: one row per PCA dimension with columns dim (1-based), variance, cumulative
    levels: smallest number of leading dimensions reaching each energy fraction
    """

    table: pd.DataFrame
    levels: dict[float, int]


def spectrum_from_model(model: PcaModel) -> SpectrumReport:
    """Build the report from already-trained PCA variances."""
    variances = model.variances.astype(np.float64)
    cumulative = np.cumsum(variances) / variances.sum()
    table = pd.DataFrame({
        'dim': np.arange(1, len(variances) + 1),
        'variance': variances,
        'cumulative': cumulative,
    })
    # Tolerance for float rounding of the final cumulative sum
    levels = {
        level: int(np.searchsorted(cumulative, level - 1e-12) + 1)
        for level in ENERGY_LEVELS
    }
    levels = {level: min(d, len(variances)) for level, d in levels.items()}
    return SpectrumReport(table=table, levels=levels)


def spectrum_report(corpus, sample_limit: int = PCA_SAMPLE_LIMIT) -> SpectrumReport:
    """
    PCA variance spectrum of a corpus with cumulative energy fractions.

    Raises:
        DegenerateDataError: If the corpus has fewer than 2 rows or no variance
    """
    report = spectrum_from_model(train_pca(corpus, sample_limit))
    summary = ', '.join(f'{int(level * 100)}%={d}' for level, d in report.levels.items())
    logger.info(f'分散スペクトル (D={len(report.table)}): 累積寄与率到達次元 {summary}')
    return report
