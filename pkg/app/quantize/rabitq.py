"""
Sign-based binary quantization with an unbiased inner-product estimator.

A unit vector x_b is rotated by a random orthogonal matrix and quantized to the
signs of its coordinates, i.e. to the nearest codeword of {±1/√d}^d. The query
is quantized to B_q-bit uniform levels and the inner product between code and
query is evaluated from bitplane popcounts.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from config import C0, EPSILON0, QUERY_BITS
from core.errors import DimensionMismatchError, InvalidConfigError, ZeroVectorError
from core.linalg import RandomRotation, as_vector

logger = logging.getLogger(__name__)

# Number of set bits for every byte value
_POPCOUNT_TABLE = np.array([bin(i).count('1') for i in range(256)], dtype=np.uint8)

UNIT_NORM_TOL = 1e-4
ZERO_NORM_TOL = 1e-12


@dataclass(frozen=True)
class QuantizerConfig:
    """Quantization parameters: code length, bound multiplier, constant, query bits."""

    d: int
    epsilon0: float = EPSILON0
    c0: float = C0
    query_bits: int = QUERY_BITS

    def __post_init__(self):
        if self.d < 1:
            raise InvalidConfigError(f'd must be >= 1, got {self.d}')
        if self.epsilon0 <= 0:
            raise InvalidConfigError(f'epsilon0 must be > 0, got {self.epsilon0}')
        if not 1 <= self.query_bits <= 8:
            raise InvalidConfigError(f'query_bits must be in 1..8, got {self.query_bits}')


@dataclass(frozen=True)
class BinaryCode:
    """Packed sign bits: ceil(d/64) little-endian uint64 words, trailing bits zero."""

    words: np.ndarray
    dim: int

    def bits(self) -> np.ndarray:
        return unpack_bits(self.words, self.dim)


@dataclass(frozen=True)
class CodeFactors:
    """
    Per-code scalars. Fields may also hold aligned arrays for a whole block.

    denom: ⟨x̄_b, x_b⟩, in (0, 1]
    err_coeff: sqrt((1 − denom²)/denom²) / sqrt(d − 1)
    """

    denom: float | np.ndarray
    err_coeff: float | np.ndarray


@dataclass(frozen=True)
class QuantizedQuery:
    """Query quantized to uniform levels: q'ᵢ ≈ lo + delta·levelᵢ, stored as bitplanes."""

    bitplanes: np.ndarray
    lo: float
    delta: float
    sum_levels: int
    levels: np.ndarray
    dim: int

    @property
    def query_bits(self) -> int:
        return self.bitplanes.shape[0]

    def reconstruct(self) -> np.ndarray:
        """Dequantized query coordinates (rotated space)."""
        return self.lo + self.delta * self.levels.astype(np.float64)


def words_per_code(dim: int) -> int:
    return (dim + 63) // 64


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """
    Pack boolean rows into little-endian uint64 words.

    Args:
        bits: (n, d) or (d,) boolean array

    Returns:
        (n, ceil(d/64)) or (ceil(d/64),) uint64 array; bit i lives in word i // 64
        at position i % 64
    """
    bits = np.asarray(bits, dtype=bool)
    single = bits.ndim == 1
    bits = np.atleast_2d(bits)
    n, dim = bits.shape
    padded = np.zeros((n, words_per_code(dim) * 64), dtype=bool)
    padded[:, :dim] = bits
    packed = np.packbits(padded, axis=1, bitorder='little')
    words = np.ascontiguousarray(packed).view('<u8').astype(np.uint64)
    return words[0] if single else words


def unpack_bits(words: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of pack_bits."""
    words = np.asarray(words, dtype=np.uint64)
    single = words.ndim == 1
    words = np.atleast_2d(words)
    as_bytes = np.ascontiguousarray(words.astype('<u8')).view(np.uint8)
    bits = np.unpackbits(as_bytes, axis=1, bitorder='little')[:, :dim].astype(bool)
    return bits[0] if single else bits


def popcount(words: np.ndarray) -> np.ndarray:
    """Set-bit count per row (sum over the last axis of uint64 words)."""
    words = np.ascontiguousarray(words, dtype=np.uint64)
    as_bytes = words.view(np.uint8)
    return _POPCOUNT_TABLE[as_bytes].sum(axis=-1, dtype=np.int64)


def error_coefficient(denom, dim: int):
    """sqrt((1 − denom²)/denom²)/sqrt(d − 1); zero for d = 1 (exact 1-D quantization)."""
    denom = np.asarray(denom, dtype=np.float64)
    if dim < 2:
        return np.zeros_like(denom)
    return np.sqrt(np.clip(1.0 - denom * denom, 0.0, None)) / denom / math.sqrt(dim - 1)


def quantize_vectors(unit_rows: np.ndarray, rot: RandomRotation) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Quantize a batch of unit vectors.

    Args:
        unit_rows: (n, d) rows with unit norm
        rot: RandomRotation of size d

    Returns:
        (codes (n, W) uint64, denom (n,) float64, err_coeff (n,) float64)
    """
    rotated = rot.apply_transpose(unit_rows)
    rotated = np.atleast_2d(rotated)
    dim = rot.dim
    bits = rotated >= 0.0
    codes = pack_bits(bits)
    denom = np.abs(rotated).sum(axis=1) / math.sqrt(dim)
    denom = np.clip(denom, ZERO_NORM_TOL, 1.0)
    return codes, denom, error_coefficient(denom, dim)


def quantize_vector(x_b, rot: RandomRotation) -> tuple[BinaryCode, CodeFactors]:
    """
    Quantize a single unit vector to its sign code.

    Args:
        x_b: Unit vector of length d (normalized, centered projection)
        rot: RandomRotation of size d

    Returns:
        (BinaryCode, CodeFactors)

    Raises:
        ZeroVectorError: If ‖x_b‖ < 1e-12
        InvalidConfigError: If ‖x_b‖ is not 1 within 1e-4
        DimensionMismatchError: If len(x_b) != d
    """
    x_b = as_vector(x_b, rot.dim)
    norm = float(np.linalg.norm(x_b))
    if norm < ZERO_NORM_TOL:
        raise ZeroVectorError('cannot quantize a zero vector')
    if abs(norm - 1.0) > UNIT_NORM_TOL:
        raise InvalidConfigError(f'vector must be unit length, got norm {norm:.6f}')

    codes, denom, err = quantize_vectors(x_b[np.newaxis, :], rot)
    return BinaryCode(words=codes[0], dim=rot.dim), CodeFactors(denom=float(denom[0]), err_coeff=float(err[0]))


def quantize_rotated_query(rotated, query_bits: int = QUERY_BITS) -> QuantizedQuery:
    """
    Uniform scalar quantization of an already-rotated query over its min–max range.

    Levels are rounded to nearest, so every coordinate is reconstructed within delta/2.
    """
    if query_bits < 1:
        raise InvalidConfigError(f'query_bits must be >= 1, got {query_bits}')
    rotated = np.asarray(rotated, dtype=np.float64).reshape(-1)
    dim = rotated.shape[0]
    top = (1 << query_bits) - 1

    lo = float(rotated.min())
    hi = float(rotated.max())
    delta = (hi - lo) / top
    if delta > 0.0:
        levels = np.clip(np.rint((rotated - lo) / delta), 0, top).astype(np.uint8)
    else:
        delta = 0.0
        levels = np.zeros(dim, dtype=np.uint8)

    planes = np.stack([(levels >> plane) & 1 for plane in range(query_bits)]).astype(bool)
    return QuantizedQuery(
        bitplanes=pack_bits(planes),
        lo=lo,
        delta=delta,
        sum_levels=int(levels.sum(dtype=np.int64)),
        levels=levels,
        dim=dim,
    )


def quantize_query(q_b, rot: RandomRotation, query_bits: int = QUERY_BITS) -> QuantizedQuery:
    """
    Quantize a query: rotate by rotᵀ then apply B_q-bit uniform quantization.

    Raises:
        DimensionMismatchError: If len(q_b) != d
    """
    q_b = as_vector(q_b, rot.dim)
    return quantize_rotated_query(rot.apply_transpose(q_b), query_bits)


def selected_level_sum(codes: np.ndarray, qq: QuantizedQuery) -> np.ndarray:
    """Σ_{i: code_i = 1} level_i for each code, from bitplane popcounts."""
    codes = np.atleast_2d(codes)
    total = np.zeros(codes.shape[0], dtype=np.int64)
    for plane in range(qq.query_bits):
        total += popcount(codes & qq.bitplanes[plane]) << plane
    return total


def estimate_inner_product(code, factors: CodeFactors, qq: QuantizedQuery, code_popcounts=None):
    """
    Unbiased estimate of ⟨x_b, q_b⟩: ⟨x̄_b, q̃_b⟩ / ⟨x̄_b, x_b⟩.

    ⟨x̄_b, q̃_b⟩ = (1/√d)·(2·Σ_{bit=1} q̃ᵢ − Σᵢ q̃ᵢ), with the selected sum taken
    from bitplane popcounts.

    Args:
        code: BinaryCode, or (n, W) packed words for a block
        factors: CodeFactors (scalars, or arrays aligned with the block)
        qq: QuantizedQuery
        code_popcounts: Optional precomputed popcount of each code

    Returns:
        float for a single code, (n,) array for a block

    Raises:
        DimensionMismatchError: If the code length differs from the query's
    """
    if isinstance(code, BinaryCode):
        if code.dim != qq.dim:
            raise DimensionMismatchError(f'code length {code.dim} != query length {qq.dim}')
        words = code.words
    else:
        words = np.asarray(code, dtype=np.uint64)
    single = words.ndim == 1
    words = np.atleast_2d(words)
    if words.shape[1] != qq.bitplanes.shape[1]:
        raise DimensionMismatchError(
            f'code has {words.shape[1]} words, query has {qq.bitplanes.shape[1]}'
        )

    if code_popcounts is None:
        code_popcounts = popcount(words)
    selected = qq.lo * code_popcounts + qq.delta * selected_level_sum(words, qq)
    total = qq.dim * qq.lo + qq.delta * qq.sum_levels
    ip = (2.0 * selected - total) / math.sqrt(qq.dim)
    estimate = ip / np.asarray(factors.denom, dtype=np.float64)
    return float(estimate[0]) if single else estimate


def quantization_error_bound(factors: CodeFactors, epsilon0: float = EPSILON0):
    """
    Half-width of the estimator's confidence interval: err_coeff·ε0.

    |estimate − ⟨x_b, q_b⟩| exceeds it with probability at most 2·exp(−c0·ε0²).

    Raises:
        InvalidConfigError: If epsilon0 <= 0
    """
    if epsilon0 <= 0:
        raise InvalidConfigError(f'epsilon0 must be > 0, got {epsilon0}')
    bound = np.asarray(factors.err_coeff, dtype=np.float64) * epsilon0
    return float(bound) if bound.ndim == 0 else bound


def failure_probability(epsilon0: float = EPSILON0, c0: float = C0) -> float:
    """Upper bound 2·exp(−c0·ε0²) on the quantization bound's violation rate."""
    return min(1.0, 2.0 * math.exp(-c0 * epsilon0 * epsilon0))
