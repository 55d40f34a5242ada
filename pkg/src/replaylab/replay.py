"""Experience replay: uniform ring buffer and proportional prioritized buffer
backed by a sum tree, plus a full-sweep priority refresh.

The sum tree is the array representation of a complete binary tree whose
leaves hold priorities and whose internal nodes hold subtree sums; parents
are recomputed from their children on update, which keeps drift at rounding
level.  Proportional draws are stratified: one uniform per equal segment of
[0, total).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class EmptyBufferError(RuntimeError):
    """Raised when sampling from an empty buffer or an all-zero priority tree."""


@dataclass
class Transition:
    state: np.ndarray
    action: int
    next_state: np.ndarray
    reward: float
    done: bool


class SumTree:
    """Priorities over `capacity` leaves with O(log n) update and prefix find."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be >= 1")
        self.capacity = capacity
        self.nodes = np.zeros(2 * capacity - 1)

    @property
    def total(self) -> float:
        return float(self.nodes[0])

    @property
    def leaf_values(self) -> np.ndarray:
        return self.nodes[self.capacity - 1:]

    def update(self, leaf: int, value: float) -> None:
        if not (0 <= leaf < self.capacity):
            raise ValueError(f"leaf index {leaf} out of range")
        if not np.isfinite(value) or value < 0.0:
            raise ValueError(f"priority must be finite and >= 0, got {value}")
        idx = leaf + self.capacity - 1
        self.nodes[idx] = value
        idx = (idx - 1) // 2
        while idx >= 0:
            self.nodes[idx] = self.nodes[2 * idx + 1] + self.nodes[2 * idx + 2]
            if idx == 0:
                break
            idx = (idx - 1) // 2

    def rebuild(self, values: np.ndarray) -> None:
        """Set all leaves at once and recompute internal sums bottom-up."""
        values = np.asarray(values, dtype=np.float64)
        if len(values) > self.capacity:
            raise ValueError("more values than leaves")
        if np.any(~np.isfinite(values)) or np.any(values < 0.0):
            raise ValueError("priorities must be finite and >= 0")
        cap = self.capacity
        self.nodes[cap - 1:cap - 1 + len(values)] = values
        self.nodes[cap - 1 + len(values):] = 0.0
        if cap == 1:
            return
        # walk internal levels bottom-up; children always sit one level deeper
        level = 0
        while (1 << (level + 1)) - 1 < cap - 1:
            level += 1
        for k in range(level, -1, -1):
            lo = (1 << k) - 1
            hi = min((1 << (k + 1)) - 1, cap - 1)
            idx = np.arange(lo, hi)
            self.nodes[idx] = self.nodes[2 * idx + 1] + self.nodes[2 * idx + 2]

    def find_prefix_batch(self, masses: np.ndarray) -> np.ndarray:
        """Leaf indices whose cumulative interval contains each mass."""
        cap = self.capacity
        idx = np.zeros(len(masses), dtype=np.int64)
        mass = np.asarray(masses, dtype=np.float64).copy()
        while True:
            internal = idx < cap - 1
            if not internal.any():
                break
            cur = idx[internal]
            left = 2 * cur + 1
            left_sum = self.nodes[left]
            go_left = mass[internal] < left_sum
            idx[internal] = np.where(go_left, left, left + 1)
            mass[internal] = np.where(go_left, mass[internal],
                                      mass[internal] - left_sum)
        return idx - (cap - 1)

    def find_prefix(self, mass: float) -> int:
        return int(self.find_prefix_batch(np.asarray([mass]))[0])


class _RingStorage:
    """Preallocated transition arrays with ring overwrite semantics."""

    def __init__(self, capacity: int, state_dim: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros(capacity, dtype=np.int64)
        self.next_states = np.zeros((capacity, state_dim))
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity, dtype=bool)
        self.count = 0
        self.cursor = 0

    def append(self, tr: Transition) -> int:
        slot = self.cursor
        self.states[slot] = tr.state
        self.actions[slot] = tr.action
        self.next_states[slot] = tr.next_state
        self.rewards[slot] = tr.reward
        self.dones[slot] = tr.done
        self.cursor = (self.cursor + 1) % self.capacity
        self.count = min(self.count + 1, self.capacity)
        return slot

    def transition(self, i: int) -> Transition:
        return Transition(self.states[i].copy(), int(self.actions[i]),
                          self.next_states[i].copy(), float(self.rewards[i]),
                          bool(self.dones[i]))


class UniformReplay:
    """Plain ER buffer: ring storage with uniform-with-replacement sampling."""

    def __init__(self, capacity: int, state_dim: int):
        self._store = _RingStorage(capacity, state_dim)

    @property
    def count(self) -> int:
        return self._store.count

    @property
    def capacity(self) -> int:
        return self._store.capacity

    @property
    def storage(self) -> _RingStorage:
        return self._store

    def push(self, transition: Transition) -> int:
        return self._store.append(transition)

    def sample_uniform_indices(self, batch_size: int,
                               rng: np.random.Generator) -> np.ndarray:
        if self.count < 1:
            raise EmptyBufferError("buffer is empty")
        return rng.integers(0, self.count, size=batch_size)

    def sample_uniform(self, batch_size: int, rng: np.random.Generator):
        idx = self.sample_uniform_indices(batch_size, rng)
        return [(int(i), self._store.transition(int(i))) for i in idx]


class SumTreeBuffer:
    """Proportional prioritized replay store over ring storage."""

    def __init__(self, capacity: int, state_dim: int):
        self._store = _RingStorage(capacity, state_dim)
        self.tree = SumTree(capacity)

    @property
    def count(self) -> int:
        return self._store.count

    @property
    def capacity(self) -> int:
        return self._store.capacity

    @property
    def storage(self) -> _RingStorage:
        return self._store

    @property
    def priorities(self) -> np.ndarray:
        """Leaf priorities of the stored items (read-only view)."""
        return self.tree.leaf_values[:self.count]

    def max_priority(self) -> float:
        """Largest stored priority, or 1.0 when empty (insert default)."""
        if self.count == 0:
            return 1.0
        return float(self.priorities.max())

    def push(self, transition: Transition, priority: float) -> int:
        if not np.isfinite(priority) or priority < 0.0:
            raise ValueError(f"priority must be finite and >= 0, got {priority}")
        slot = self._store.append(transition)
        self.tree.update(slot, priority)
        return slot

    def update_priorities(self, indices, new_priorities) -> None:
        indices = np.atleast_1d(np.asarray(indices, dtype=np.int64))
        values = np.atleast_1d(np.asarray(new_priorities, dtype=np.float64))
        if indices.shape != values.shape:
            raise ValueError("indices and priorities must align")
        if np.any(indices < 0) or np.any(indices >= self.count):
            raise ValueError("index out of range")
        for i, v in zip(indices, values):
            self.tree.update(int(i), float(v))

    def refresh_all_priorities(self, priority_fn) -> None:
        """Recompute every stored priority with priority_fn(transition)."""
        values = np.empty(self.count)
        for i in range(self.count):
            values[i] = priority_fn(self._store.transition(i))
        if np.any(~np.isfinite(values)) or np.any(values < 0.0):
            raise ValueError("priority_fn produced a negative or non-finite value")
        self.tree.rebuild(values)

    def set_all_priorities(self, values: np.ndarray) -> None:
        """Vectorized sibling of refresh_all_priorities: set the whole table."""
        values = np.asarray(values, dtype=np.float64)
        if len(values) != self.count:
            raise ValueError(f"expected {self.count} priorities, got {len(values)}")
        self.tree.rebuild(values)

    def sample_proportional_indices(self, batch_size: int,
                                    rng: np.random.Generator) -> np.ndarray:
        if self.count < 1:
            raise EmptyBufferError("buffer is empty")
        total = self.tree.total
        if total <= 0.0:
            raise EmptyBufferError("all priorities are zero")
        segment = total / batch_size
        offsets = rng.uniform(0.0, 1.0, size=batch_size)
        masses = (np.arange(batch_size) + offsets) * segment
        masses = np.minimum(masses, total * (1.0 - 1e-15))
        return self.tree.find_prefix_batch(masses)

    def sample_proportional(self, batch_size: int, rng: np.random.Generator):
        idx = self.sample_proportional_indices(batch_size, rng)
        return [(int(i), self._store.transition(int(i))) for i in idx]

    def sample_uniform_indices(self, batch_size: int,
                               rng: np.random.Generator) -> np.ndarray:
        if self.count < 1:
            raise EmptyBufferError("buffer is empty")
        return rng.integers(0, self.count, size=batch_size)

    def sample_uniform(self, batch_size: int, rng: np.random.Generator):
        idx = self.sample_uniform_indices(batch_size, rng)
        return [(int(i), self._store.transition(int(i))) for i in idx]
