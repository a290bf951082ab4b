"""Tests for the bounded result queue."""

import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'app'))

import math

import pytest

from core.errors import InvalidConfigError
from search.heap import ResultHeap


class TestResultHeap:
    """Tests for ResultHeap."""

    def test_tau_until_full(self):
        """Test that tau stays +inf until K entries are held."""
        heap = ResultHeap(3)
        heap.push(1, 5.0)
        heap.push(2, 1.0)
        assert heap.tau() == math.inf
        heap.push(3, 3.0)
        assert heap.full
        assert heap.tau() == 5.0

    def test_keeps_best(self):
        """Test that only the K smallest distances survive."""
        heap = ResultHeap(2)
        for item_id, dist in [(0, 4.0), (1, 2.0), (2, 9.0), (3, 1.0)]:
            heap.push(item_id, dist)
        assert heap.results() == [(3, 1.0), (1, 2.0)]
        assert heap.ids() == [3, 1]

    def test_equal_to_tau_rejected(self):
        """Test that a full heap rejects a candidate equal to tau."""
        heap = ResultHeap(1)
        assert heap.push(5, 2.0)
        assert not heap.push(1, 2.0)
        assert heap.results() == [(5, 2.0)]

    def test_ties_sorted_by_id(self):
        """Test that equal distances are reported by ascending id."""
        heap = ResultHeap(4)
        for item_id in (9, 2, 7):
            heap.push(item_id, 1.0)
        assert heap.ids() == [2, 7, 9]

    def test_tie_evicts_larger_id(self):
        """Test that among equal worst distances the larger id is the root."""
        heap = ResultHeap(2)
        heap.push(4, 3.0)
        heap.push(8, 3.0)
        heap.push(1, 0.5)
        assert heap.ids() == [1, 4]

    def test_len(self):
        """Test the entry count."""
        heap = ResultHeap(5)
        heap.push(0, 1.0)
        assert len(heap) == 1

    def test_invalid_capacity(self):
        """Test that capacity < 1 is rejected."""
        with pytest.raises(InvalidConfigError):
            ResultHeap(0)
