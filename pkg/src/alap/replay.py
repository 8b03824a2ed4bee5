"""Ring-buffer replay storage with prioritized and mirrored uniform sampling.

The main buffer serves priority-based minibatches for learning. The mirror
buffer receives every write the main buffer receives and serves uniform
minibatches that feed the beta estimator, so the two sampling streams never
draw from, or perturb, the same store.
"""

from __future__ import annotations

import csv
import os
import tempfile
from dataclasses import dataclass

import numpy as np

from alap.sum_tree import SumTree


class NotReadyError(RuntimeError):
    """Raised when a buffer holds fewer transitions than requested."""


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: np.ndarray
    reward: float
    done: bool
    next_state: np.ndarray


@dataclass
class Batch:
    """Column-major view of ``m`` transitions."""

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    dones: np.ndarray
    next_states: np.ndarray

    def __len__(self) -> int:
        return self.states.shape[0]

    def transitions(self) -> list[Transition]:
        return [
            Transition(self.states[i], self.actions[i], float(self.rewards[i]),
                       bool(self.dones[i]), self.next_states[i])
            for i in range(len(self))
        ]

    @classmethod
    def from_transitions(cls, items) -> "Batch":
        items = list(items)
        return cls(
            states=np.array([t.state for t in items], dtype=np.float64),
            actions=np.array([t.action for t in items], dtype=np.float64),
            rewards=np.array([t.reward for t in items], dtype=np.float64),
            dones=np.array([t.done for t in items], dtype=np.float64),
            next_states=np.array([t.next_state for t in items], dtype=np.float64),
        )


class RingStore:
    """Fixed-capacity FIFO of transitions backed by preallocated arrays."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int) -> None:
        if capacity < 1:
            raise ValueError(f"capacity must be >= 1, got {capacity}")
        self.capacity = int(capacity)
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.states = np.zeros((capacity, state_dim))
        self.actions = np.zeros((capacity, action_dim))
        self.rewards = np.zeros(capacity)
        self.dones = np.zeros(capacity)
        self.next_states = np.zeros((capacity, state_dim))
        self.cursor = 0
        self.count = 0

    def __len__(self) -> int:
        return self.count

    def _check(self, t: Transition) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        s = np.asarray(t.state, dtype=np.float64).ravel()
        a = np.asarray(t.action, dtype=np.float64).ravel()
        s2 = np.asarray(t.next_state, dtype=np.float64).ravel()
        if s.size != self.state_dim or s2.size != self.state_dim:
            raise ValueError(f"state dimension must be {self.state_dim}")
        if a.size != self.action_dim:
            raise ValueError(f"action dimension must be {self.action_dim}")
        return s, a, s2

    def push(self, t: Transition) -> int:
        """Write *t* at the cursor and return the slot it landed in."""
        s, a, s2 = self._check(t)
        i = self.cursor
        self.states[i] = s
        self.actions[i] = a
        self.rewards[i] = t.reward
        self.dones[i] = float(t.done)
        self.next_states[i] = s2
        self.cursor = (i + 1) % self.capacity
        self.count = min(self.count + 1, self.capacity)
        return i

    def gather(self, indices) -> Batch:
        idx = np.asarray(indices, dtype=np.int64)
        return Batch(self.states[idx], self.actions[idx], self.rewards[idx],
                     self.dones[idx], self.next_states[idx])

    def sample_uniform(self, m: int, rng: np.random.Generator) -> tuple[np.ndarray, Batch]:
        """Draw ``m`` slots uniformly with replacement from the occupied region."""
        if self.count < 1 or m < 1:
            raise NotReadyError(f"cannot draw {m} from a buffer holding {self.count}")
        idx = rng.integers(0, self.count, size=m)
        return idx, self.gather(idx)

    def same_contents(self, other: "RingStore") -> bool:
        if (self.cursor, self.count) != (other.cursor, other.count):
            return False
        n = self.count
        return all(
            np.array_equal(getattr(self, f)[:n], getattr(other, f)[:n])
            for f in ("states", "actions", "rewards", "dones", "next_states")
        )


class MirrorBuffer(RingStore):
    """Uniform-sampling duplicate of the prioritized buffer."""


class PrioritizedBuffer(RingStore):
    """Ring buffer whose slots carry ``alpha``-exponentiated priorities in a sum tree.

    With ``clip=True`` leaves hold ``max(|d|^alpha, 1)`` (loss-adjusted
    clipping) instead of ``(|d| + eps)^alpha``.
    """

    def __init__(self, capacity: int, state_dim: int, action_dim: int,
                 alpha: float = 0.6, epsilon: float = 1e-6, clip: bool = False) -> None:
        super().__init__(capacity, state_dim, action_dim)
        self.alpha = float(alpha)
        self.epsilon = float(epsilon)
        self.clip = clip
        self.tree = SumTree(capacity)
        self.raw_priorities = np.zeros(capacity)
        self.max_raw_priority = 1.0
        # bumps on every write so late priority updates can detect overwrites
        self.serials = np.full(capacity, -1, dtype=np.int64)
        self._writes = 0

    def _leaf(self, raw):
        leaf = np.asarray(raw, dtype=np.float64) ** self.alpha
        return np.maximum(leaf, 1.0) if self.clip else leaf

    def push(self, t: Transition) -> int:
        i = super().push(t)
        self.raw_priorities[i] = self.max_raw_priority
        self.tree.set(i, float(self._leaf(self.max_raw_priority)))
        self.serials[i] = self._writes
        self._writes += 1
        return i

    def probabilities(self, indices) -> np.ndarray:
        return self.tree.get_many(indices) / self.tree.total()

    def min_probability(self) -> float:
        return self.tree.min_leaf() / self.tree.total()

    def sample_prioritized(self, m: int, rng: np.random.Generator):
        """Stratified proportional draw of ``m`` slots.

        ``[0, total)`` is cut into ``m`` equal segments with one uniform draw
        in each. Returns ``(indices, batch, probabilities, serials)``.
        """
        if m < 1 or self.count < m:
            raise NotReadyError(f"need {m} transitions, buffer holds {self.count}")
        total = self.tree.total()
        segment = total / m
        u = (np.arange(m) + rng.random(m)) * segment
        # guard the top stratum against rounding up to total
        u = np.minimum(u, np.nextafter(total, 0.0))
        idx = self.tree.find_prefix_many(u)
        return idx, self.gather(idx), self.probabilities(idx), self.serials[idx].copy()

    def update_priorities(self, indices, td_magnitudes, epsilon: float | None = None,
                          serials=None) -> None:
        """Set slot priorities from TD-error magnitudes.

        Slots whose serial no longer matches (overwritten since sampling)
        are skipped.
        """
        idx = np.asarray(indices, dtype=np.int64).ravel()
        td = np.asarray(td_magnitudes, dtype=np.float64).ravel()
        if idx.shape != td.shape:
            raise ValueError("indices and td_magnitudes must have the same length")
        if np.any(np.isnan(td)) or np.any(td < 0) or not np.all(np.isfinite(td)):
            raise ValueError("td magnitudes must be finite and non-negative")
        if idx.size and (idx.min() < 0 or idx.max() >= self.count):
            raise ValueError("priority update for an unoccupied slot")
        if serials is not None:
            keep = self.serials[idx] == np.asarray(serials, dtype=np.int64).ravel()
            idx, td = idx[keep], td[keep]
            if idx.size == 0:
                return
        eps = self.epsilon if epsilon is None else float(epsilon)
        raw = td if self.clip else td + eps
        self.raw_priorities[idx] = raw
        self.tree.set_many(idx, self._leaf(raw))
        self.max_raw_priority = max(self.max_raw_priority, float(raw.max()))

    def dump_snapshot(self, path) -> None:
        """Write occupied slots as CSV rows of transition fields plus raw priority."""
        dump_snapshot(self, path)


class ReplayPair:
    """Main prioritized buffer D plus its write-synchronised mirror D*."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int,
                 alpha: float = 0.6, epsilon: float = 1e-6, clip: bool = False) -> None:
        self.main = PrioritizedBuffer(capacity, state_dim, action_dim, alpha, epsilon, clip)
        self.mirror = MirrorBuffer(capacity, state_dim, action_dim)

    def __len__(self) -> int:
        return len(self.main)

    def push(self, t: Transition) -> int:
        i = self.main.push(t)
        j = self.mirror.push(t)
        assert i == j
        return i

    def in_sync(self) -> bool:
        return self.main.same_contents(self.mirror)


def dump_snapshot(buffer: RingStore, path) -> None:
    sd, ad = buffer.state_dim, buffer.action_dim
    header = ([f"s{k}" for k in range(sd)] + [f"a{k}" for k in range(ad)]
              + ["reward", "done"] + [f"ns{k}" for k in range(sd)] + ["priority"])
    prios = getattr(buffer, "raw_priorities", np.full(buffer.capacity, np.nan))
    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(path)), suffix=".tmp")
    with os.fdopen(fd, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for i in range(buffer.count):
            w.writerow([repr(float(x)) for x in buffer.states[i]]
                       + [repr(float(x)) for x in buffer.actions[i]]
                       + [repr(float(buffer.rewards[i])), int(buffer.dones[i])]
                       + [repr(float(x)) for x in buffer.next_states[i]]
                       + [repr(float(prios[i]))])
    os.replace(tmp, path)
