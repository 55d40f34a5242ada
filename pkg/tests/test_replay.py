import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from replaylab.replay import (EmptyBufferError, SumTree, SumTreeBuffer,
                              Transition, UniformReplay)


def make_transition(k: int, dim: int = 2) -> Transition:
    return Transition(np.full(dim, float(k)), k % 3, np.full(dim, float(k) + 0.5),
                      float(-k), k % 7 == 0)


class TestSumTree:
    def test_push_three_root_total(self):
        buf = SumTreeBuffer(8, 2)
        for k, p in enumerate([1.0, 2.0, 3.0]):
            buf.push(make_transition(k), p)
        assert buf.tree.total == pytest.approx(6.0)

    def test_prefix_walk_interval(self):
        buf = SumTreeBuffer(4, 2)
        for k, p in enumerate([1.0, 2.0, 3.0]):
            buf.push(make_transition(k), p)
        # cumulative intervals [0,1), [1,3), [3,6)
        assert buf.tree.find_prefix(1.5) == 1
        assert buf.tree.find_prefix(0.999) == 0
        assert buf.tree.find_prefix(3.0) == 2

    def test_ring_eviction(self):
        buf = SumTreeBuffer(3, 2)
        for k in range(4):
            buf.push(make_transition(k), 1.0)
        assert buf.count == 3
        stored = {tuple(buf.storage.states[i]) for i in range(3)}
        assert (0.0, 0.0) not in stored  # oldest evicted

    def test_zero_priority_never_sampled(self):
        buf = SumTreeBuffer(4, 2)
        buf.push(make_transition(0), 0.0)
        buf.push(make_transition(1), 5.0)
        rng = np.random.default_rng(0)
        idx = buf.sample_proportional_indices(256, rng)
        assert np.all(idx == 1)

    def test_invalid_priorities_rejected(self):
        buf = SumTreeBuffer(4, 2)
        with pytest.raises(ValueError):
            buf.push(make_transition(0), -1.0)
        with pytest.raises(ValueError):
            buf.push(make_transition(0), float("nan"))

    def test_update_priorities_path(self):
        buf = SumTreeBuffer(4, 2)
        for k, p in enumerate([1.0, 2.0, 3.0]):
            buf.push(make_transition(k), p)
        buf.update_priorities([0], [5.0])
        assert buf.tree.total == pytest.approx(10.0)
        before = buf.tree.nodes.copy()
        buf.update_priorities([1], [2.0])  # no-op value
        np.testing.assert_array_equal(buf.tree.nodes, before)
        with pytest.raises(ValueError):
            buf.update_priorities([7], [1.0])

    def test_root_equals_leaf_sum_after_random_updates(self):
        rng = np.random.default_rng(5)
        buf = SumTreeBuffer(64, 2)
        for k in range(64):
            buf.push(make_transition(k), float(rng.uniform(0, 10)))
        for _ in range(500):
            idx = rng.integers(0, 64, size=8)
            buf.update_priorities(idx, rng.uniform(0, 10, size=8))
        assert buf.tree.total == pytest.approx(buf.priorities.sum(), abs=1e-9)

    @given(st.lists(st.floats(0.0, 100.0), min_size=1, max_size=70))
    @settings(max_examples=60, deadline=None)
    def test_rebuild_matches_sum_any_size(self, values):
        tree = SumTree(len(values))
        tree.rebuild(np.array(values))
        assert tree.total == pytest.approx(float(np.sum(values)), abs=1e-9)
        np.testing.assert_allclose(tree.leaf_values, values)


class TestProportionalSampling:
    def test_single_positive_leaf(self):
        buf = SumTreeBuffer(8, 2)
        buf.push(make_transition(0), 3.0)
        idx = buf.sample_proportional_indices(32, np.random.default_rng(1))
        assert np.all(idx == 0)

    def test_empirical_frequencies(self):
        buf = SumTreeBuffer(4, 2)
        pris = [1.0, 2.0, 3.0, 4.0]
        for k, p in enumerate(pris):
            buf.push(make_transition(k), p)
        rng = np.random.default_rng(2)
        counts = np.zeros(4)
        draws = 100000
        idx = buf.sample_proportional_indices(draws, rng)
        for i in idx:
            counts[i] += 1
        freq = counts / draws
        np.testing.assert_allclose(freq, np.array(pris) / 10.0, atol=0.01)

    def test_all_zero_priorities_error(self):
        buf = SumTreeBuffer(4, 2)
        buf.push(make_transition(0), 0.0)
        with pytest.raises(EmptyBufferError):
            buf.sample_proportional_indices(4, np.random.default_rng(0))

    def test_empty_buffer_error(self):
        buf = SumTreeBuffer(4, 2)
        with pytest.raises(EmptyBufferError):
            buf.sample_proportional_indices(1, np.random.default_rng(0))
        with pytest.raises(EmptyBufferError):
            buf.sample_uniform_indices(1, np.random.default_rng(0))

    def test_sample_returns_index_transition_pairs(self):
        buf = SumTreeBuffer(4, 2)
        buf.push(make_transition(3), 1.0)
        pairs = buf.sample_proportional(2, np.random.default_rng(0))
        idx, tr = pairs[0]
        assert idx == 0
        assert tr.action == 0
        np.testing.assert_array_equal(tr.state, [3.0, 3.0])


class TestRefreshAll:
    def test_constant_priority_becomes_uniform(self):
        buf = SumTreeBuffer(8, 2)
        for k in range(5):
            buf.push(make_transition(k), float(k + 1))
        buf.refresh_all_priorities(lambda tr: 1.0)
        np.testing.assert_allclose(buf.priorities, 1.0)
        idx = buf.sample_proportional_indices(50000, np.random.default_rng(3))
        freq = np.bincount(idx, minlength=5) / 50000
        np.testing.assert_allclose(freq, 0.2, atol=0.02)

    def test_priority_fn_applied_per_transition(self):
        buf = SumTreeBuffer(8, 2)
        for k in range(6):
            buf.push(make_transition(k), 1.0)
        buf.refresh_all_priorities(lambda tr: abs(tr.reward) + 1.0)
        np.testing.assert_allclose(buf.priorities, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0])

    def test_frequencies_track_new_profile(self):
        rng = np.random.default_rng(4)
        buf = SumTreeBuffer(16, 2)
        for k in range(16):
            buf.push(make_transition(k), 1.0)
        profile = rng.uniform(0.1, 5.0, size=16)
        buf.set_all_priorities(profile)
        idx = buf.sample_proportional_indices(50000, rng)
        freq = np.bincount(idx, minlength=16) / 50000
        np.testing.assert_allclose(freq, profile / profile.sum(), atol=0.02)

    def test_invalid_priority_fn(self):
        buf = SumTreeBuffer(4, 2)
        buf.push(make_transition(0), 1.0)
        with pytest.raises(ValueError):
            buf.refresh_all_priorities(lambda tr: -2.0)

    def test_set_all_matches_refresh_all(self):
        a = SumTreeBuffer(8, 2)
        b = SumTreeBuffer(8, 2)
        for k in range(7):
            a.push(make_transition(k), 1.0)
            b.push(make_transition(k), 1.0)
        fn = lambda tr: float(tr.state[0]) * 2.0 + 1.0
        a.refresh_all_priorities(fn)
        b.set_all_priorities(np.array([fn(b.storage.transition(i))
                                       for i in range(b.count)]))
        np.testing.assert_array_equal(a.tree.nodes, b.tree.nodes)


class TestUniformReplay:
    def test_single_item(self):
        buf = UniformReplay(4, 2)
        buf.push(make_transition(9))
        pairs = buf.sample_uniform(8, np.random.default_rng(0))
        assert all(i == 0 for i, _ in pairs)

    def test_uniform_frequencies(self):
        buf = UniformReplay(4, 2)
        for k in range(4):
            buf.push(make_transition(k))
        idx = buf.sample_uniform_indices(100000, np.random.default_rng(1))
        freq = np.bincount(idx, minlength=4) / 100000
        np.testing.assert_allclose(freq, 0.25, atol=0.01)

    def test_indices_in_range(self):
        buf = UniformReplay(8, 2)
        for k in range(5):
            buf.push(make_transition(k))
        idx = buf.sample_uniform_indices(1000, np.random.default_rng(2))
        assert idx.min() >= 0 and idx.max() < 5


class TestInterleavedConsistency:
    @given(st.lists(st.tuples(st.integers(0, 2), st.floats(0.0, 50.0)),
                    min_size=1, max_size=200))
    @settings(max_examples=40, deadline=None)
    def test_root_matches_leaves(self, ops):
        buf = SumTreeBuffer(32, 2)
        rng = np.random.default_rng(0)
        for kind, value in ops:
            if kind == 0 or buf.count == 0:
                buf.push(make_transition(int(value)), value)
            elif kind == 1:
                buf.update_priorities([int(value) % buf.count], [value])
            else:
                buf.refresh_all_priorities(lambda tr: abs(tr.reward) + 0.5)
        assert buf.tree.total == pytest.approx(buf.priorities.sum(), abs=1e-9)

    def test_full_refresh_equals_partial_when_frozen(self):
        # identical priority_fn frozen between updates: a buffer refreshed in
        # full equals one where only touched leaves were updated
        fn = lambda tr: abs(tr.reward) + 1.0
        full = SumTreeBuffer(16, 2)
        partial = SumTreeBuffer(16, 2)
        for k in range(10):
            full.push(make_transition(k), fn(make_transition(k)))
            partial.push(make_transition(k), fn(make_transition(k)))
        full.refresh_all_priorities(fn)
        partial.update_priorities(np.arange(3), [fn(partial.storage.transition(i))
                                                 for i in range(3)])
        np.testing.assert_allclose(full.priorities, partial.priorities)
        assert full.tree.total == pytest.approx(partial.tree.total)
