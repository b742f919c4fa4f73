"""Bounded FIFO replay buffer with seeded uniform sampling."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: Union[float, int]
    r: float
    s_next: np.ndarray
    terminal: bool


class ReplayBuffer:
    """Keeps at most `capacity` transitions, evicting the oldest first.

    Storage is a ring over a plain list so random access during sampling
    stays O(1).
    """

    def __init__(self, capacity: int, seed: int | None = 0):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = capacity
        self._storage: list[Transition] = []
        self._head = 0  # index of the oldest transition once full
        self._rng = np.random.default_rng(seed)

    def __len__(self) -> int:
        return len(self._storage)

    def __iter__(self):
        n = len(self._storage)
        for k in range(n):
            yield self._storage[(self._head + k) % n]

    def push(self, t: Transition) -> "ReplayBuffer":
        if len(self._storage) < self.capacity:
            self._storage.append(t)
        else:
            self._storage[self._head] = t
            self._head = (self._head + 1) % self.capacity
        return self

    def sample(self, n: int) -> Optional[list[Transition]]:
        """n transitions drawn uniformly with replacement.

        Returns None while the buffer holds fewer than n transitions, so the
        caller can skip the update until enough experience has accumulated.
        """
        if len(self._storage) < n:
            return None
        storage = self._storage
        idx = self._rng.integers(0, len(storage), size=n)
        return [storage[i] for i in idx]
