from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass
class Batch:
    s: np.ndarray
    u: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    terminal: np.ndarray

    def __len__(self):
        return len(self.r)


class ReplayBuffer:
    """Fixed-capacity ring of transitions stored column-wise."""

    def __init__(self, capacity: int, obs_dim: int):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.s = np.zeros((capacity, obs_dim))
        self.s_next = np.zeros((capacity, obs_dim))
        self.u = np.zeros(capacity)
        self.r = np.zeros(capacity)
        self.terminal = np.zeros(capacity, dtype=bool)
        self.size = 0
        self._next = 0

    def __len__(self):
        return self.size

    def push(self, s, u, r, s_next, terminal=False):
        if not np.isfinite(r):
            raise ValueError(f"non-finite reward {r}")
        i = self._next
        self.s[i] = s
        self.u[i] = u
        self.r[i] = r
        self.s_next[i] = s_next
        self.terminal[i] = terminal
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> Optional[np.ndarray]:
        """Uniform indices without replacement, or ``None`` while the buffer is underfilled."""
        if self.size < batch_size:
            return None
        return rng.choice(self.size, size=batch_size, replace=False)

    def sample(self, batch_size: int, rng: np.random.Generator) -> Optional[Batch]:
        idx = self.sample_indices(batch_size, rng)
        if idx is None:
            return None
        return Batch(self.s[idx], self.u[idx], self.r[idx], self.s_next[idx], self.terminal[idx])
