"""Tests for index persistence."""

import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'app'))

import dataclasses
import json
import struct

import numpy as np
import pytest

from core.errors import FormatError, VersionMismatchError
from index.ivf import IndexConfig, build_index
from core.linalg import RandomRotation
from index.storage import INDEX_MAGIC, build_info_path, deserialize, load_index, save_index, serialize
from search.engine import SearchParams, batch_search


@pytest.fixture(scope='module')
def payload(small_index):
    """Serialized shared index."""
    return serialize(small_index)


class TestRoundTrip:
    """Tests for serialize/deserialize."""

    def test_bytes_stable(self, payload):
        """Test that re-serializing a loaded index reproduces the same bytes."""
        assert serialize(deserialize(payload)) == payload

    def test_header(self, payload, small_index):
        """Test the magic, version and shape fields."""
        assert payload[:8] == INDEX_MAGIC
        version, dim, d, k, n, query_bits = struct.unpack_from('<6I', payload, 8)
        assert version == 1
        assert (dim, d, k, n) == (32, 16, 16, small_index.size)
        assert query_bits == small_index.config.query_bits

    def test_search_identical(self, payload, small_index, queries):
        """Test that a loaded index answers queries exactly like the original."""
        loaded = deserialize(payload)
        params = SearchParams(top_k=10, nprobe=4)
        before = batch_search(queries[:20], small_index, params, threads=1)
        after = batch_search(queries[:20], loaded, params, threads=1)
        assert before.results == after.results

    def test_restores_fields(self, payload, small_index):
        """Test that arrays and parameters survive the round trip."""
        loaded = deserialize(payload)
        assert loaded.config.centroid_mode == 'projected'
        assert loaded.config.seed == small_index.config.seed
        assert loaded.rot.matrix.tobytes() == small_index.rot.matrix.tobytes()
        assert loaded.tail_store.tobytes() == small_index.tail_store.tobytes()
        for original, restored in zip(small_index.blocks, loaded.blocks):
            np.testing.assert_array_equal(original.ids, restored.ids)
            np.testing.assert_array_equal(original.codes, restored.codes)
            np.testing.assert_array_equal(original.popcounts, restored.popcounts)

    def test_full_centroid_mode(self, corpus):
        """Test that the centroid mode is recovered from the centroid dimension."""
        index = build_index(corpus, IndexConfig(d=8, k=4, seed=3, centroid_mode='full'))
        loaded = deserialize(serialize(index))
        assert loaded.config.centroid_mode == 'full'
        assert loaded.centroids.dim == 32

    def test_builds_are_bit_identical(self, corpus):
        """Test that two builds with the same seed serialize identically."""
        config = IndexConfig(d=8, k=8, seed=5)
        assert serialize(build_index(corpus, config)) == serialize(build_index(corpus, config, threads=3))

    def test_save_and_load(self, small_index, tmp_path):
        """Test file persistence."""
        path = tmp_path / 'index.mrq'
        save_index(small_index, path)
        loaded = load_index(path)
        assert loaded.size == small_index.size
        assert path.stat().st_size == len(serialize(small_index))

    def test_build_time_sidecar(self, small_index, tmp_path):
        """Test that the build time is written beside the index and read back."""
        path = tmp_path / 'index.mrq'
        save_index(dataclasses.replace(small_index, build_seconds=1.25), path)
        info = json.loads(build_info_path(path).read_text(encoding='utf-8'))
        assert info == {'build_seconds': 1.25, 'N': small_index.size, 'k': 16}
        assert load_index(path).build_seconds == 1.25

    def test_without_sidecar(self, small_index, tmp_path):
        """Test that an index without a sidecar loads with an unknown build time."""
        path = tmp_path / 'index.mrq'
        save_index(dataclasses.replace(small_index, build_seconds=None), path)
        assert not build_info_path(path).exists()
        assert load_index(path).build_seconds is None

    def test_unreadable_sidecar(self, small_index, tmp_path, caplog):
        """Test that a broken sidecar is skipped with a warning."""
        path = tmp_path / 'index.mrq'
        save_index(dataclasses.replace(small_index, build_seconds=None), path)
        build_info_path(path).write_text('{not json', encoding='utf-8')
        with caplog.at_level('WARNING'):
            loaded = load_index(path)
        assert loaded.build_seconds is None
        assert 'ビルド情報を読み込めませんでした' in caplog.text


class TestCorruption:
    """Tests for malformed index files."""

    def test_bad_magic(self, payload):
        """Test that an unknown magic is a version mismatch."""
        with pytest.raises(VersionMismatchError):
            deserialize(b'NOTANIDX' + payload[8:])

    def test_bad_version(self, payload):
        """Test that an unknown version is a version mismatch."""
        with pytest.raises(VersionMismatchError):
            deserialize(payload[:8] + struct.pack('<I', 2) + payload[12:])

    @pytest.mark.parametrize('cut', [4, 20, 200, 5000])
    def test_truncated(self, payload, cut):
        """Test that truncation raises FormatError with an offset."""
        with pytest.raises(FormatError) as exc_info:
            deserialize(payload[:-cut])
        assert exc_info.value.offset is not None

    def test_trailing_bytes(self, payload):
        """Test that extra bytes after the tail store are rejected."""
        with pytest.raises(FormatError):
            deserialize(payload + b'\x00')

    def test_rotation_not_orthogonal(self, small_index):
        """Test that a scaled rotation matrix is rejected on load."""
        scaled = RandomRotation(matrix=small_index.rot.matrix * 2.0, seed=small_index.rot.seed)
        with pytest.raises(FormatError, match='not orthogonal') as exc_info:
            deserialize(serialize(dataclasses.replace(small_index, rot=scaled)))
        assert exc_info.value.offset is not None

    def test_inconsistent_header(self, payload):
        """Test that d > D in the header is rejected."""
        corrupted = payload[:16] + struct.pack('<I', 99) + payload[20:]
        with pytest.raises(FormatError):
            deserialize(corrupted)
