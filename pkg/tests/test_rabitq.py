"""Tests for the binary quantizer and inner-product estimator."""

import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'app'))

import math

import numpy as np
import pytest

from core.errors import DimensionMismatchError, InvalidConfigError, ZeroVectorError
from core.linalg import random_orthogonal
from quantize.rabitq import (
    BinaryCode, CodeFactors, QuantizerConfig, estimate_inner_product, failure_probability,
    pack_bits, popcount, quantization_error_bound, quantize_query, quantize_rotated_query, quantize_vector,
    quantize_vectors, unpack_bits,
)


def _dense_codeword(code, rot):
    """Codeword in the unrotated space: rot·(±1/√d)."""
    signs = np.where(code.bits(), 1.0, -1.0) / math.sqrt(code.dim)
    return rot.matrix.astype(np.float64) @ signs


def _estimate_errors(unit_vectors, dim, n_pairs, query_bits=4, seed=3):
    """Estimator errors and error coefficients over random unit pairs."""
    rot = random_orthogonal(dim, seed)
    xs = unit_vectors(n_pairs, dim)
    qs = unit_vectors(n_pairs, dim)
    codes, denom, err_coeff = quantize_vectors(xs, rot)
    errors = np.empty(n_pairs)
    for i in range(n_pairs):
        qq = quantize_query(qs[i], rot, query_bits)
        factors = CodeFactors(denom=float(denom[i]), err_coeff=float(err_coeff[i]))
        est = estimate_inner_product(BinaryCode(codes[i], dim), factors, qq)
        errors[i] = est - float(np.dot(xs[i], qs[i]))
    return errors, err_coeff


class TestBitPacking:
    """Tests for pack_bits, unpack_bits and popcount."""

    def test_bit_positions(self):
        """Test that bit i lands in word i // 64 at position i % 64."""
        bits = np.zeros(70, dtype=bool)
        bits[0] = True
        bits[65] = True
        words = pack_bits(bits)
        assert words.dtype == np.uint64
        assert words.tolist() == [1, 2]

    def test_round_trip(self, rng):
        """Test that unpack inverts pack."""
        bits = rng.random((5, 130)) < 0.5
        np.testing.assert_array_equal(unpack_bits(pack_bits(bits), 130), bits)

    def test_popcount(self):
        """Test popcount across words."""
        words = np.array([[0xFF, 1], [0, 0]], dtype=np.uint64)
        assert popcount(words).tolist() == [9, 0]

    def test_popcount_full_word(self):
        """Test popcount of an all-ones word."""
        assert int(popcount(np.array([np.iinfo(np.uint64).max], dtype=np.uint64))) == 64


class TestQuantizerConfig:
    """Tests for QuantizerConfig validation."""

    def test_defaults(self):
        """Test that defaults are accepted."""
        config = QuantizerConfig(d=64)
        assert config.epsilon0 > 0
        assert 1 <= config.query_bits <= 8

    @pytest.mark.parametrize('kwargs', [
        {'d': 0},
        {'d': 8, 'epsilon0': 0.0},
        {'d': 8, 'query_bits': 0},
        {'d': 8, 'query_bits': 9},
    ])
    def test_invalid(self, kwargs):
        """Test that out-of-range parameters are rejected."""
        with pytest.raises(InvalidConfigError):
            QuantizerConfig(**kwargs)


class TestQuantizeVector:
    """Tests for quantize_vector."""

    def test_one_dimension_exact(self):
        """Test that d=1 quantization is exact."""
        rot = random_orthogonal(1, seed=0)
        code, factors = quantize_vector([1.0], rot)
        assert factors.denom == pytest.approx(1.0)
        assert factors.err_coeff == 0.0
        assert code.words.shape == (1,)

    def test_denominator_is_codeword_inner_product(self, unit_vectors):
        """Test that denom equals ⟨x̄, x⟩ computed densely."""
        rot = random_orthogonal(40, seed=2)
        x = unit_vectors(1, 40)[0]
        code, factors = quantize_vector(x, rot)
        codeword = _dense_codeword(code, rot)
        assert np.linalg.norm(codeword) == pytest.approx(1.0, rel=1e-5)
        assert factors.denom == pytest.approx(float(np.dot(codeword, x)), rel=1e-5)
        assert 0.0 < factors.denom <= 1.0

    def test_codeword_is_nearest(self, unit_vectors):
        """Test that the sign codeword beats random codewords in inner product."""
        dim = 16
        rot = random_orthogonal(dim, seed=4)
        x = unit_vectors(1, dim)[0]
        code, factors = quantize_vector(x, rot)
        rng = np.random.default_rng(0)
        for _ in range(50):
            bits = rng.random(dim) < 0.5
            other = _dense_codeword(BinaryCode(pack_bits(bits), dim), rot)
            assert float(np.dot(other, x)) <= factors.denom + 1e-6

    def test_error_coefficient(self, unit_vectors):
        """Test err_coeff = sqrt((1 − denom²)/denom²)/sqrt(d − 1)."""
        rot = random_orthogonal(64, seed=1)
        _, factors = quantize_vector(unit_vectors(1, 64)[0], rot)
        expected = math.sqrt((1 - factors.denom ** 2) / factors.denom ** 2) / math.sqrt(63)
        assert factors.err_coeff == pytest.approx(expected, rel=1e-9)

    def test_denominator_concentrates(self, unit_vectors):
        """Test that the mean denom over random unit vectors is near sqrt(2/π) at d=128."""
        rot = random_orthogonal(128, seed=4)
        _, denom, _ = quantize_vectors(unit_vectors(10_000, 128), rot)
        assert float(denom.mean()) == pytest.approx(math.sqrt(2 / math.pi), rel=0.05)

    def test_zero_vector(self):
        """Test that a zero vector is rejected."""
        with pytest.raises(ZeroVectorError):
            quantize_vector(np.zeros(8), random_orthogonal(8, seed=0))

    def test_not_unit(self):
        """Test that a non-normalized vector is rejected."""
        with pytest.raises(InvalidConfigError):
            quantize_vector(np.full(8, 1.0), random_orthogonal(8, seed=0))

    def test_dimension_mismatch(self):
        """Test that a wrong-length vector is rejected."""
        with pytest.raises(DimensionMismatchError):
            quantize_vector(np.ones(7) / math.sqrt(7), random_orthogonal(8, seed=0))

    def test_batch_matches_single(self, unit_vectors):
        """Test that quantize_vectors agrees with quantize_vector row by row."""
        rot = random_orthogonal(24, seed=6)
        xs = unit_vectors(5, 24)
        codes, denom, err_coeff = quantize_vectors(xs, rot)
        for i in range(5):
            code, factors = quantize_vector(xs[i], rot)
            np.testing.assert_array_equal(code.words, codes[i])
            assert factors.denom == pytest.approx(denom[i])
            assert factors.err_coeff == pytest.approx(err_coeff[i])


class TestQuantizeQuery:
    """Tests for query quantization."""

    def test_two_levels(self):
        """Test the 1-bit example: (0, 1) quantizes to levels (0, 1)."""
        qq = quantize_rotated_query([0.0, 1.0], query_bits=1)
        assert qq.lo == 0.0
        assert qq.delta == 1.0
        assert qq.levels.tolist() == [0, 1]
        assert qq.sum_levels == 1

    def test_reconstruction_error(self, rng):
        """Test that every coordinate is reconstructed within delta/2."""
        z = rng.standard_normal(100)
        qq = quantize_rotated_query(z, query_bits=4)
        assert np.all(np.abs(qq.reconstruct() - z) <= qq.delta / 2 + 1e-12)
        assert qq.levels.max() == 15
        assert qq.levels.min() == 0

    def test_constant_query(self):
        """Test that a constant vector quantizes with delta 0."""
        qq = quantize_rotated_query(np.full(10, 0.3), query_bits=4)
        assert qq.delta == 0.0
        np.testing.assert_allclose(qq.reconstruct(), 0.3)

    def test_bitplanes(self, rng):
        """Test that bitplanes reassemble the levels."""
        qq = quantize_rotated_query(rng.standard_normal(70), query_bits=3)
        planes = unpack_bits(qq.bitplanes, 70).astype(np.int64)
        levels = sum(planes[p] << p for p in range(3))
        np.testing.assert_array_equal(levels, qq.levels)

    def test_dimension_mismatch(self):
        """Test that a wrong-length query is rejected."""
        with pytest.raises(DimensionMismatchError):
            quantize_query(np.ones(5), random_orthogonal(4, seed=0))


class TestEstimator:
    """Tests for estimate_inner_product and its error bound."""

    def test_matches_dense_formula(self, unit_vectors):
        """Test popcount evaluation against the dense ⟨x̄, q̃⟩/⟨x̄, x⟩ formula."""
        dim = 100
        rot = random_orthogonal(dim, seed=8)
        x, q = unit_vectors(2, dim)
        code, factors = quantize_vector(x, rot)
        qq = quantize_query(q, rot, query_bits=4)
        signs = np.where(code.bits(), 1.0, -1.0) / math.sqrt(dim)
        dense = float(np.dot(signs, qq.reconstruct())) / factors.denom
        assert estimate_inner_product(code, factors, qq) == pytest.approx(dense, rel=1e-9, abs=1e-12)

    def test_block_matches_single(self, unit_vectors):
        """Test that block estimation equals per-code estimation."""
        dim = 70
        rot = random_orthogonal(dim, seed=2)
        xs = unit_vectors(6, dim)
        codes, denom, err_coeff = quantize_vectors(xs, rot)
        qq = quantize_query(unit_vectors(1, dim)[0], rot)
        block = estimate_inner_product(codes, CodeFactors(denom, err_coeff), qq)
        for i in range(6):
            single = estimate_inner_product(BinaryCode(codes[i], dim), CodeFactors(float(denom[i]), float(err_coeff[i])), qq)
            assert block[i] == pytest.approx(single, rel=1e-12, abs=1e-12)

    def test_self_estimate_near_one(self, unit_vectors):
        """Test that estimating ⟨x, x⟩ with 8-bit queries is close to 1."""
        dim = 128
        rot = random_orthogonal(dim, seed=1)
        x = unit_vectors(1, dim)[0]
        code, factors = quantize_vector(x, rot)
        qq = quantize_query(x, rot, query_bits=8)
        assert estimate_inner_product(code, factors, qq) == pytest.approx(1.0, abs=0.02)

    def test_code_length_mismatch(self, unit_vectors):
        """Test that code and query of different lengths are rejected."""
        rot = random_orthogonal(8, seed=0)
        code, factors = quantize_vector(unit_vectors(1, 8)[0], rot)
        qq = quantize_query(unit_vectors(1, 4)[0], random_orthogonal(4, seed=0))
        with pytest.raises(DimensionMismatchError):
            estimate_inner_product(code, factors, qq)

    def test_unbiased(self, unit_vectors):
        """Test that the mean error over 10,000 pairs is within 3 standard errors of zero."""
        errors, _ = _estimate_errors(unit_vectors, 128, 10_000)
        standard_error = errors.std(ddof=1) / math.sqrt(len(errors))
        assert abs(errors.mean()) < 3 * standard_error

    def test_bound_coverage(self, unit_vectors):
        """Test violation rates against the bound and their monotonicity in ε0."""
        errors, err_coeff = _estimate_errors(unit_vectors, 128, 5_000)
        rates = []
        for epsilon0 in (0.5, 1.0, 1.9, 3.0):
            bound = quantization_error_bound(CodeFactors(np.zeros_like(err_coeff), err_coeff), epsilon0)
            rates.append(float(np.mean(np.abs(errors) > bound)))
        assert rates == sorted(rates, reverse=True)
        assert rates[2] <= failure_probability(1.9, 0.5)
        assert rates[3] < 0.01

    def test_bound_invalid_epsilon(self):
        """Test that ε0 <= 0 is rejected."""
        with pytest.raises(InvalidConfigError):
            quantization_error_bound(CodeFactors(1.0, 0.1), 0.0)

    def test_failure_probability(self):
        """Test 2·exp(−c0·ε0²) and its cap at 1."""
        assert failure_probability(1.9, 0.5) == pytest.approx(2 * math.exp(-0.5 * 1.9 ** 2))
        assert failure_probability(0.1, 0.5) == 1.0
