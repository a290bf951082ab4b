"""
Head/tail decomposition of projected vectors and the MRQ distance bounds.

A PCA-rotated vector is split into its leading d coordinates (the head, which
is quantized) and the remaining D − d coordinates (the tail, which is dropped
from the estimate and covered by a Chebyshev bound). For a record x, query q
and cluster centroid c:

    dis  = ‖x_d−c‖² + ‖q_d−c‖² − 2⟨x_d−c, q_d−c⟩ + ‖x_r‖² + ‖q_r‖² − 2⟨x_r, q_r⟩
    dis′ = ‖x_d−c‖² + ‖q_d−c‖² − 2·‖x_d−c‖·‖q_d−c‖·est + ‖x_r‖² + ‖q_r‖²
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from core.errors import DimensionMismatchError, InvalidConfigError
from quantize.rabitq import CodeFactors, quantization_error_bound

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SplitVector:
    """Leading d coordinates (head) and trailing D − d coordinates (tail)."""

    head: np.ndarray
    tail: np.ndarray

    @property
    def dim(self) -> int:
        return self.head.shape[0] + self.tail.shape[0]

    def concat(self) -> np.ndarray:
        return np.concatenate([self.head, self.tail])


@dataclass(frozen=True)
class MrqRecordMeta:
    """
    Precomputed per-record scalars. Fields may hold aligned arrays for a cluster block.

    dist_to_centroid: ‖x_d − c‖
    tail_norm: ‖x_r‖
    factors: CodeFactors of the record's binary code
    """

    dist_to_centroid: float | np.ndarray
    tail_norm: float | np.ndarray
    factors: CodeFactors


@dataclass(frozen=True)
class QueryConstants:
    """Per-query (and per-probed-cluster) scalars used by the distance bounds."""

    q_head_dist: float
    q_tail_norm_sq: float
    sigma: float
    m: float
    epsilon0: float

    def __post_init__(self):
        if self.sigma < 0:
            raise InvalidConfigError(f'sigma must be >= 0, got {self.sigma}')
        if self.m <= 0:
            raise InvalidConfigError(f'm must be > 0, got {self.m}')
        if self.epsilon0 < 0:
            raise InvalidConfigError(f'epsilon0 must be >= 0, got {self.epsilon0}')


class Decision(Enum):
    PRUNE = 'prune'
    CHECK_STAGE2 = 'check_stage2'
    REFINE = 'refine'


def split(rotated, d: int) -> SplitVector:
    """
    Split a rotated vector into head (first d) and tail (the rest).

    Raises:
        InvalidConfigError: If d < 1 or d > len(rotated)
    """
    rotated = np.asarray(rotated).reshape(-1)
    if d < 1 or d > rotated.shape[0]:
        raise InvalidConfigError(f'd must be in 1..{rotated.shape[0]}, got {d}')
    return SplitVector(head=rotated[:d].copy(), tail=rotated[d:].copy())


def residual_variance(q_tail, variances) -> float:
    """
    Standard deviation of ⟨x_r, q_r⟩ over the data distribution.

    σ² = Σ qᵢ²·λᵢ over the tail dimensions, with λᵢ the PCA variances.

    Args:
        q_tail: Query tail (length r)
        variances: Tail slice of PcaModel.variances (length r)

    Returns:
        σ >= 0

    Raises:
        DimensionMismatchError: If the lengths differ
    """
    q_tail = np.asarray(q_tail, dtype=np.float64).reshape(-1)
    variances = np.asarray(variances, dtype=np.float64).reshape(-1)
    if q_tail.shape != variances.shape:
        raise DimensionMismatchError(
            f'query tail has {q_tail.shape[0]} coordinates, variances have {variances.shape[0]}'
        )
    if q_tail.shape[0] == 0:
        return 0.0
    return math.sqrt(max(0.0, float(np.dot(q_tail * q_tail, variances))))


def residual_error_bound(sigma: float, m: float) -> float:
    """
    Chebyshev half-width m·σ: P(|⟨x_r, q_r⟩| >= m·σ) <= 1/m².

    Raises:
        InvalidConfigError: If sigma < 0 or m <= 0
    """
    if sigma < 0:
        raise InvalidConfigError(f'sigma must be >= 0, got {sigma}')
    if m <= 0:
        raise InvalidConfigError(f'm must be > 0, got {m}')
    return m * sigma


def approximate_distance(meta: MrqRecordMeta, qc: QueryConstants, est_ip):
    """
    Approximate squared distance dis′ from the estimated head inner product.

    The tail cross term −2⟨x_r, q_r⟩ is omitted; its magnitude is covered by eps_r.
    Accepts block arrays in meta/est_ip and returns an array in that case.
    """
    a = np.asarray(meta.dist_to_centroid, dtype=np.float64)
    b = qc.q_head_dist
    tail_sq = np.asarray(meta.tail_norm, dtype=np.float64) ** 2
    result = a * a + b * b - 2.0 * a * b * np.asarray(est_ip, dtype=np.float64) + tail_sq + qc.q_tail_norm_sq
    return float(result) if result.ndim == 0 else result


def head_exact_distance(meta: MrqRecordMeta, qc: QueryConstants, head_ip):
    """
    Stage-2 distance dis_o′: dis′ with the exact ⟨x_d − c, q_d − c⟩ in place of the estimate.

    Only the tail cross term remains unknown.
    """
    a = np.asarray(meta.dist_to_centroid, dtype=np.float64)
    b = qc.q_head_dist
    tail_sq = np.asarray(meta.tail_norm, dtype=np.float64) ** 2
    result = a * a + b * b - 2.0 * np.asarray(head_ip, dtype=np.float64) + tail_sq + qc.q_tail_norm_sq
    return float(result) if result.ndim == 0 else result


def combined_error(meta: MrqRecordMeta, qc: QueryConstants):
    """
    Distance-domain error bounds (eps_b, eps_r).

    eps_b = 2·‖x_d−c‖·‖q_d−c‖·err_coeff·ε0 scales the quantization bound into
    squared-distance units; eps_r = 2·m·σ because the residual enters the
    distance as −2⟨x_r, q_r⟩.
    """
    if qc.epsilon0 > 0:
        bound = quantization_error_bound(meta.factors, qc.epsilon0)
    else:
        bound = 0.0
    a = np.asarray(meta.dist_to_centroid, dtype=np.float64)
    eps_b = 2.0 * a * qc.q_head_dist * np.asarray(bound, dtype=np.float64)
    eps_r = 2.0 * residual_error_bound(qc.sigma, qc.m)
    return (float(eps_b) if eps_b.ndim == 0 else eps_b), eps_r


def should_refine(dis_prime: float, eps_b: float, eps_r: float, tau: float,
                  dis_o: float | None = None) -> Decision:
    """
    Two-stage correction decision for one candidate.

    Stage 1 prunes when the lower bound dis′ − eps_b − eps_r reaches tau.
    Without dis_o the caller is asked to compute the stage-2 distance; with it,
    the candidate is pruned when dis_o − eps_r reaches tau and refined otherwise.
    A non-full result queue (tau = +inf) always refines.
    """
    if math.isinf(tau):
        return Decision.REFINE
    if dis_prime - eps_b - eps_r >= tau:
        return Decision.PRUNE
    if dis_o is None:
        return Decision.CHECK_STAGE2
    if dis_o - eps_r >= tau:
        return Decision.PRUNE
    return Decision.REFINE
