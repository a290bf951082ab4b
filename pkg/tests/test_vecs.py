"""Tests for fvecs/bvecs/ivecs I/O."""

import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'app'))

import struct

import numpy as np
import pytest

from core.errors import FormatError, InconsistentDimensionError, InvalidConfigError
from dataset.vecs import encode_vecs, inspect_vecs, kind_for_path, parse_vecs, read_vecs, write_vecs


def _record(dim, values, fmt='f'):
    return struct.pack('<I', dim) + struct.pack(f'<{len(values)}{fmt}', *values)


class TestParseVecs:
    """Tests for parse_vecs."""

    def test_fvecs(self):
        """Test two hand-encoded float records."""
        raw = _record(2, [1.0, 2.0]) + _record(2, [3.5, -4.0])
        matrix = parse_vecs(raw, 'f32')
        assert matrix.dtype == np.float32
        assert matrix.tolist() == [[1.0, 2.0], [3.5, -4.0]]

    def test_bvecs(self):
        """Test byte elements."""
        raw = struct.pack('<I', 3) + bytes([0, 128, 255])
        assert parse_vecs(raw, 'u8').tolist() == [[0, 128, 255]]

    def test_ivecs(self):
        """Test signed integer elements."""
        raw = _record(2, [-1, 7], 'i')
        matrix = parse_vecs(raw, 'i32')
        assert matrix.dtype == np.int32
        assert matrix.tolist() == [[-1, 7]]

    def test_empty(self):
        """Test that an empty file is an empty matrix."""
        assert parse_vecs(b'', 'f32').shape == (0, 0)

    def test_inconsistent_dimension(self):
        """Test that a later record with another dimension is reported with its index."""
        raw = _record(2, [1.0, 2.0]) + _record(3, [1.0, 2.0, 3.0])
        with pytest.raises(InconsistentDimensionError) as exc_info:
            parse_vecs(raw, 'f32')
        assert exc_info.value.record == 1
        assert exc_info.value.offset == 12

    def test_truncated_record(self):
        """Test that a cut-off last record raises FormatError at its offset."""
        raw = _record(2, [1.0, 2.0]) + _record(2, [3.0, 4.0])[:-2]
        with pytest.raises(FormatError) as exc_info:
            parse_vecs(raw, 'f32')
        assert exc_info.value.offset == 12

    def test_truncated_header(self):
        """Test that fewer than four bytes is a truncated header."""
        with pytest.raises(FormatError):
            parse_vecs(b'\x01\x00', 'f32')

    def test_zero_dimension(self):
        """Test that a zero dimension is rejected."""
        with pytest.raises(FormatError):
            parse_vecs(struct.pack('<I', 0), 'f32')

    def test_unknown_kind(self):
        """Test that an unknown element kind is rejected."""
        with pytest.raises(InvalidConfigError):
            parse_vecs(b'', 'f16')


class TestVecsFiles:
    """Tests for file-level helpers."""

    @pytest.mark.parametrize('name,kind', [('a.fvecs', 'f32'), ('a.BVECS', 'u8'), ('gt.ivecs', 'i32')])
    def test_kind_for_path(self, name, kind):
        """Test suffix inference."""
        assert kind_for_path(name) == kind

    def test_kind_for_unknown_suffix(self):
        """Test that an unknown suffix is rejected."""
        with pytest.raises(InvalidConfigError):
            kind_for_path('data.npy')

    def test_write_then_read(self, tmp_path, rng):
        """Test writing and reading a float matrix."""
        matrix = rng.standard_normal((5, 3)).astype(np.float32)
        path = tmp_path / 'base.fvecs'
        write_vecs(path, matrix)
        np.testing.assert_array_equal(read_vecs(path), matrix)
        assert path.stat().st_size == 5 * (4 + 3 * 4)

    def test_encode_layout(self):
        """Test the record layout produced by encode_vecs."""
        raw = encode_vecs(np.array([[1, 2]], dtype=np.int32), 'i32')
        assert raw == _record(2, [1, 2], 'i')

    def test_encode_rejects_vector(self):
        """Test that a 1-D input is rejected."""
        with pytest.raises(InvalidConfigError):
            encode_vecs(np.zeros(3), 'f32')

    def test_inspect(self, tmp_path):
        """Test count and dimension from the file size."""
        path = tmp_path / 'gt.ivecs'
        write_vecs(path, np.arange(12, dtype=np.int32).reshape(4, 3))
        info = inspect_vecs(path)
        assert (info.count, info.dim, info.kind) == (4, 3, 'i32')
        assert info.nbytes == path.stat().st_size

    def test_inspect_bad_size(self, tmp_path):
        """Test that a size that is not a whole number of records is rejected."""
        path = tmp_path / 'bad.fvecs'
        path.write_bytes(_record(2, [1.0, 2.0]) + b'\x00')
        with pytest.raises(FormatError):
            inspect_vecs(path)
