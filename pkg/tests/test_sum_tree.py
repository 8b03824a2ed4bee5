import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from alap.sum_tree import EmptyTreeError, SumTree


def tree_with(leaves):
    t = SumTree(len(leaves))
    for i, v in enumerate(leaves):
        t.set(i, v)
    return t


def prefix_scan(leaves, value):
    """Linear oracle: first index whose running sum exceeds value."""
    acc = 0.0
    for i, v in enumerate(leaves):
        acc += v
        if acc > value:
            return i
    raise AssertionError("value beyond total")


def internal_sums_ok(t: SumTree) -> bool:
    n = t.nodes
    parents = np.arange((n.size - 1) // 2)
    expected = n[2 * parents + 1] + n[2 * parents + 2]
    return np.allclose(n[parents], expected, rtol=1e-9, atol=0)


class TestConstruction:
    def test_empty(self):
        t = SumTree(4)
        assert t.total() == 0
        assert t.max_leaf() == 0

    def test_single_leaf(self):
        t = SumTree(1)
        assert t.total() == 0
        t.set(0, 3.5)
        assert t.total() == 3.5
        assert t.find_prefix(1.0) == 0

    def test_single_insertion(self):
        t = SumTree(4)
        t.set(0, 2.0)
        assert t.total() == 2.0

    def test_zero_capacity_rejected(self):
        with pytest.raises(ValueError):
            SumTree(0)


class TestSet:
    def test_arithmetic(self):
        t = tree_with([1, 2, 3, 4])
        t.set(1, 5)
        assert t.total() == 13

    def test_zeroing(self):
        t = tree_with([1, 0, 0, 0])
        t.set(0, 0)
        assert t.total() == 0

    @pytest.mark.parametrize("index", [-1, 4, 100])
    def test_index_out_of_range(self, index):
        with pytest.raises(ValueError):
            SumTree(4).set(index, 1.0)

    @pytest.mark.parametrize("value", [-1.0, float("nan"), float("inf")])
    def test_bad_value(self, value):
        with pytest.raises(ValueError):
            SumTree(4).set(0, value)

    def test_random_sets_match_linear_sum(self):
        rng = np.random.default_rng(1)
        t = SumTree(1000)
        leaves = np.zeros(1000)
        for _ in range(10_000):
            i = int(rng.integers(1000))
            v = float(rng.exponential(3.0))
            t.set(i, v)
            leaves[i] = v
        assert t.total() == pytest.approx(leaves.sum(), rel=1e-9)
        assert internal_sums_ok(t)

    def test_repeated_index_last_write_wins(self):
        t = SumTree(4)
        t.set_many([1, 1, 2], [5.0, 7.0, 1.0])
        assert t[1] == 7.0
        assert t.total() == 8.0


class TestFindPrefix:
    def test_examples(self):
        t = tree_with([1, 2, 3, 4])
        assert t.find_prefix(0.5) == 0
        assert t.find_prefix(5.5) == 2

    def test_boundaries_go_right(self):
        t = tree_with([1, 2, 3, 4])
        assert t.find_prefix(0.0) == 0
        assert t.find_prefix(1.0) == 1
        assert t.find_prefix(3.0) == 2
        assert t.find_prefix(9.999) == 3

    def test_errors(self):
        t = tree_with([1, 2, 3, 4])
        with pytest.raises(ValueError):
            t.find_prefix(10.0)
        with pytest.raises(ValueError):
            t.find_prefix(-0.1)
        with pytest.raises(EmptyTreeError):
            SumTree(4).find_prefix(0.0)

    def test_matches_prefix_scan_oracle(self):
        rng = np.random.default_rng(7)
        leaves = rng.exponential(1.0, size=37)
        leaves[rng.random(37) < 0.2] = 0.0
        t = tree_with(leaves)
        queries = rng.uniform(0, t.total(), size=100_000)
        got = t.find_prefix_many(queries)
        cums = np.cumsum(leaves)
        # vectorised form of prefix_scan(); spot-check it against the loop
        expected = np.searchsorted(cums, queries, side="right")
        for q in queries[:200]:
            assert prefix_scan(leaves, q) == expected[np.where(queries == q)[0][0]]
        assert np.array_equal(got, expected)

    def test_never_returns_zero_leaf(self):
        t = tree_with([0, 0, 1, 0, 0, 2, 0])
        qs = np.linspace(0, t.total(), 1001)[:-1]
        got = t.find_prefix_many(qs)
        assert set(got.tolist()) <= {2, 5}
        # the very top of the range must not fall through into padding
        assert t.find_prefix(np.nextafter(t.total(), 0)) == 5

    def test_proportional_frequencies(self):
        rng = np.random.default_rng(3)
        t = tree_with([1, 2, 3, 4])
        idx = t.find_prefix_many(rng.uniform(0, t.total(), size=100_000))
        freq = np.bincount(idx, minlength=4) / idx.size
        np.testing.assert_allclose(freq, [0.1, 0.2, 0.3, 0.4], atol=0.01)


class TestTotals:
    def test_examples(self):
        t = tree_with([1, 2, 3, 4])
        assert t.total() == 10
        assert t.max_leaf() == 4

    def test_random_max(self):
        rng = np.random.default_rng(11)
        t = SumTree(100)
        leaves = np.zeros(100)
        for _ in range(1000):
            i = int(rng.integers(100))
            leaves[i] = rng.uniform(0, 50)
            t.set(i, leaves[i])
        assert t.max_leaf() == max(leaves)


@settings(max_examples=60, deadline=None)
@given(
    capacity=st.integers(1, 40),
    ops=st.lists(st.tuples(st.integers(0, 10_000), st.floats(0, 1e6)), max_size=200),
)
def test_parent_sum_invariant(capacity, ops):
    t = SumTree(capacity)
    leaves = np.zeros(capacity)
    for i, v in ops:
        t.set(i % capacity, v)
        leaves[i % capacity] = v
        assert t.nodes.min() >= 0
    assert internal_sums_ok(t)
    assert t.total() == pytest.approx(leaves.sum(), rel=1e-9, abs=0)
    assert np.array_equal(t.leaves, leaves)


@settings(max_examples=60, deadline=None)
@given(
    leaves=st.lists(st.floats(0, 100), min_size=1, max_size=30).filter(lambda xs: sum(xs) > 1e-3),
    frac=st.floats(0, 1, exclude_max=True),
)
def test_find_prefix_agrees_with_scan(leaves, frac):
    t = tree_with(leaves)
    value = frac * t.total()
    got = t.find_prefix(value)
    assert leaves[got] > 0
    # exact-boundary rounding can legitimately differ between pairwise and
    # sequential sums; only compare when the query is clear of a boundary
    cums = np.cumsum(leaves)
    if np.min(np.abs(cums - value)) > 1e-9 * t.total():
        assert got == prefix_scan(leaves, value)
