"""Fixed-capacity FIFO replay buffer with uniform sampling."""

from __future__ import annotations

import numpy as np

from .envs import Transition


class ReplayBuffer:
    """Ring buffer over transitions; sampling is uniform with replacement."""

    def __init__(self, capacity: int, obs_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._obs = np.zeros((capacity, obs_dim))
        self._action = np.zeros((capacity, action_dim))
        self._reward = np.zeros(capacity)
        self._next_obs = np.zeros((capacity, obs_dim))
        self._terminated = np.zeros(capacity)
        self._next = 0
        self.size = 0

    def __len__(self):
        return self.size

    def push(self, t: Transition):
        i = self._next
        self._obs[i] = t.obs
        self._action[i] = t.action
        self._reward[i] = t.reward
        self._next_obs[i] = t.next_obs
        self._terminated[i] = float(t.terminated)
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, n: int, rng: np.random.Generator) -> dict:
        """Return a batch of n uniform draws (with replacement) as arrays."""
        if n > self.size:
            raise ValueError(f"cannot sample {n} from buffer of size {self.size}")
        idx = rng.integers(0, self.size, size=n)
        return self.batch_at(idx)

    def batch_at(self, idx) -> dict:
        return {
            "obs": self._obs[idx].copy(),
            "action": self._action[idx].copy(),
            "reward": self._reward[idx].copy(),
            "next_obs": self._next_obs[idx].copy(),
            "terminated": self._terminated[idx].copy(),
        }

    def transitions(self):
        """Stored transitions in insertion order (oldest first)."""
        if self.size < self.capacity:
            order = range(self.size)
        else:
            order = [(self._next + k) % self.capacity for k in range(self.capacity)]
        return [
            Transition(self._obs[i].copy(), self._action[i].copy(),
                       float(self._reward[i]), self._next_obs[i].copy(),
                       bool(self._terminated[i]))
            for i in order
        ]
