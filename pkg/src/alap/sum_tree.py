"""Binary sum tree for O(log n) proportional sampling."""

from __future__ import annotations

import numpy as np


class EmptyTreeError(ValueError):
    """Raised when sampling from a tree whose total is zero."""


class SumTree:
    """Complete binary tree whose leaves hold non-negative priorities.

    Internal nodes store the sum of their two children, so the root is the
    total mass. Leaf *i* lives at node ``i + leaf_count - 1`` where
    ``leaf_count`` is ``capacity`` rounded up to a power of two; the padding
    leaves stay zero forever and keep every leaf at the same depth, which is
    what makes ``find_prefix`` agree with a left-to-right prefix scan.
    """

    def __init__(self, capacity: int) -> None:
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self._leaf_count = 1 << (self.capacity - 1).bit_length()
        self._depth = self._leaf_count.bit_length() - 1
        self.nodes = np.zeros(2 * self._leaf_count - 1, dtype=np.float64)
        self._occupied = np.zeros(self.capacity, dtype=bool)

    @property
    def size(self) -> int:
        """Number of leaves that have been written at least once."""
        return int(self._occupied.sum())

    @property
    def leaves(self) -> np.ndarray:
        """Read-only view of the ``capacity`` leaf values."""
        start = self._leaf_count - 1
        view = self.nodes[start:start + self.capacity]
        view.flags.writeable = False
        return view

    def total(self) -> float:
        return float(self.nodes[0])

    def max_leaf(self) -> float:
        if not self._occupied.any():
            return 0.0
        start = self._leaf_count - 1
        return float(self.nodes[start:start + self.capacity][self._occupied].max())

    def min_leaf(self) -> float:
        """Smallest occupied leaf value (0 if empty)."""
        if not self._occupied.any():
            return 0.0
        start = self._leaf_count - 1
        return float(self.nodes[start:start + self.capacity][self._occupied].min())

    def __getitem__(self, index: int) -> float:
        return float(self.nodes[self._leaf_count - 1 + index])

    def get_many(self, indices) -> np.ndarray:
        return self.nodes[self._leaf_count - 1 + np.asarray(indices, dtype=np.int64)]

    def set(self, index: int, value: float) -> None:
        """Write one leaf and re-sum its ancestor path."""
        self.set_many(np.array([index]), np.array([value], dtype=np.float64))

    def set_many(self, indices, values) -> None:
        """Write several leaves, then re-sum each affected level once.

        When an index repeats, the last value wins. Ancestors are recomputed
        from their children rather than patched with deltas, so rounding
        error never accumulates across updates.
        """
        indices = np.asarray(indices, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=np.float64).ravel()
        if indices.shape != values.shape:
            raise ValueError("indices and values must have the same length")
        if indices.size == 0:
            return
        if indices.min() < 0 or indices.max() >= self.capacity:
            raise ValueError(f"leaf index out of range [0, {self.capacity})")
        if not np.all(np.isfinite(values)) or np.any(values < 0):
            raise ValueError("leaf values must be finite and non-negative")

        nodes = self.nodes
        pos = indices + (self._leaf_count - 1)
        nodes[pos] = values
        self._occupied[indices] = True
        for _ in range(self._depth):
            pos = np.unique((pos - 1) >> 1)
            nodes[pos] = nodes[2 * pos + 1] + nodes[2 * pos + 2]

    def find_prefix(self, value: float) -> int:
        """Smallest leaf index whose inclusive prefix sum exceeds *value*."""
        return int(self.find_prefix_many(np.array([value], dtype=np.float64))[0])

    def find_prefix_many(self, values) -> np.ndarray:
        """Vectorised :meth:`find_prefix` over an array of query values."""
        values = np.array(values, dtype=np.float64, ndmin=1)
        total = self.nodes[0]
        if total <= 0.0:
            raise EmptyTreeError("cannot search an empty tree")
        if np.any(values < 0) or np.any(values >= total) or not np.all(np.isfinite(values)):
            raise ValueError(f"query values must lie in [0, {total})")

        nodes = self.nodes
        pos = np.zeros(values.shape, dtype=np.int64)
        for _ in range(self._depth):
            left = 2 * pos + 1
            left_sum = nodes[left]
            go_right = values >= left_sum
            # rounding can push a query past the last positive leaf; never
            # descend into an all-zero subtree
            go_right &= nodes[left + 1] > 0.0
            values = np.where(go_right, values - left_sum, values)
            pos = np.where(go_right, left + 1, left)
        return pos - (self._leaf_count - 1)
