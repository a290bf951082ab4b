"""Bounded result queue holding the K best (id, distance) pairs."""

import heapq
import math

from core.errors import InvalidConfigError


class ResultHeap:
    """
    Max-heap of capacity K keyed on distance.

    The root is the current worst entry; its distance is the pruning threshold
    once the heap is full. Entries are stored as (-distance, -id) so the worst
    of equal distances is the larger id.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise InvalidConfigError(f'capacity must be >= 1, got {capacity}')
        self.capacity = capacity
        self._heap: list[tuple[float, int]] = []

    def __len__(self) -> int:
        return len(self._heap)

    @property
    def full(self) -> bool:
        return len(self._heap) >= self.capacity

    def tau(self) -> float:
        """Largest kept distance when full, +inf otherwise."""
        if not self.full:
            return math.inf
        return -self._heap[0][0]

    def push(self, item_id: int, distance: float) -> bool:
        """
        Offer a candidate. A full heap accepts it only if distance < tau.

        Returns:
            True if the candidate was kept
        """
        entry = (-float(distance), -int(item_id))
        if not self.full:
            heapq.heappush(self._heap, entry)
            return True
        if distance < self.tau():
            heapq.heapreplace(self._heap, entry)
            return True
        return False

    def ids(self) -> list[int]:
        return [item_id for item_id, _ in self.results()]

    def results(self) -> list[tuple[int, float]]:
        """Entries sorted by ascending distance, ties by smaller id."""
        return sorted(((-neg_id, -neg_dist) for neg_dist, neg_id in self._heap), key=lambda e: (e[1], e[0]))
