"""Brute-force reference implementations used to verify the learning code.

Everything here is tabular or numerical and independent of the torch-based
training path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass
class TabularMdp:
    """Small finite MDP; transitions are either an index table (deterministic)
    or a full probability tensor of shape (S, A, S)."""

    n_states: int
    n_actions: int
    transition: np.ndarray  # (S, A) int indices or (S, A, S) probabilities
    reward: np.ndarray      # (S, A)
    terminal: np.ndarray    # (S,) bool
    gamma: float

    def __post_init__(self):
        self.transition = np.asarray(self.transition)
        self.reward = np.asarray(self.reward, dtype=np.float64)
        self.terminal = np.asarray(self.terminal, dtype=bool)
        if self.transition.ndim == 3:
            rows = self.transition.sum(axis=2)
            if not np.allclose(rows, 1.0):
                raise ValueError("transition probability rows must sum to 1")
        elif self.transition.ndim == 2:
            if self.transition.min() < 0 or self.transition.max() >= self.n_states:
                raise ValueError("transition indices out of range")
        else:
            raise ValueError("transition must be (S,A) indices or (S,A,S) probs")

    @property
    def deterministic(self):
        return self.transition.ndim == 2


def _max_reward_backup(mdp: TabularMdp, q: np.ndarray) -> np.ndarray:
    """One application of Q'(s,a) = max(r, gamma * E[max_a' Q(s',a')])."""
    next_best = q.max(axis=1)
    next_best = np.where(mdp.terminal, 0.0, next_best)
    if mdp.deterministic:
        future = next_best[mdp.transition]
    else:
        future = mdp.transition @ next_best
    future = np.where(mdp.terminal[:, None], 0.0, mdp.gamma * future)
    return np.maximum(mdp.reward, future)


def max_reward_value_iteration(mdp: TabularMdp, tol: float = 1e-8,
                               max_iters: int = 1_000_000):
    """Iterate the maximum-reward backup from Q = 0 to its fixed point."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0.0 <= mdp.gamma < 1.0:
        raise ValueError("gamma must be in [0, 1)")
    q = np.zeros((mdp.n_states, mdp.n_actions))
    for _ in range(max_iters):
        q_next = _max_reward_backup(mdp, q)
        if np.max(np.abs(q_next - q)) < tol:
            return q_next
        q = q_next
    raise RuntimeError("value iteration did not converge")


def contraction_check(mdp: TabularMdp, trials: int, rng: np.random.Generator,
                      scale: float = 10.0) -> float:
    """Max sup-norm expansion ratio of the backup over random Q-table pairs."""
    worst = 0.0
    shape = (mdp.n_states, mdp.n_actions)
    for _ in range(trials):
        q_a = rng.uniform(-scale, scale, size=shape)
        q_b = rng.uniform(-scale, scale, size=shape)
        denom = np.max(np.abs(q_a - q_b))
        if denom == 0.0:
            continue
        num = np.max(np.abs(_max_reward_backup(mdp, q_a) - _max_reward_backup(mdp, q_b)))
        worst = max(worst, num / denom)
    return worst


def random_tabular_mdp(rng: np.random.Generator, max_states: int = 10,
                       max_actions: int = 4, gamma: float = 0.99,
                       stochastic: bool = False) -> TabularMdp:
    n_s = int(rng.integers(2, max_states + 1))
    n_a = int(rng.integers(1, max_actions + 1))
    reward = rng.uniform(-1.0, 1.0, size=(n_s, n_a))
    terminal = rng.random(n_s) < 0.2
    terminal[0] = False
    if stochastic:
        raw = rng.random((n_s, n_a, n_s)) + 1e-3
        transition = raw / raw.sum(axis=2, keepdims=True)
    else:
        transition = rng.integers(0, n_s, size=(n_s, n_a))
    return TabularMdp(n_s, n_a, transition, reward, terminal, gamma)


def mixing_distribution_exact(adv_exploit: float, adv_explore: float,
                              lam: float = 0.5, tau_mix: float = 1.0):
    """Two-way softmax over the scaled relative advantages."""
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must be in [0, 1]")
    if tau_mix <= 0.0:
        raise ValueError("tau_mix must be positive")
    l_q = lam * adv_exploit / tau_mix
    l_d = (1.0 - lam) * adv_explore / tau_mix
    m = max(l_q, l_d)
    e_q = math.exp(l_q - m)
    e_d = math.exp(l_d - m)
    return e_q / (e_q + e_d), e_d / (e_q + e_d)


def finite_difference_gradients(loss_fn, flat_params: np.ndarray,
                                h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of ``loss_fn(flat_params)``."""
    if h <= 0:
        raise ValueError("h must be positive")
    flat = np.asarray(flat_params, dtype=np.float64)
    grad = np.zeros_like(flat)
    for i in range(flat.size):
        plus = flat.copy()
        minus = flat.copy()
        plus[i] += h
        minus[i] -= h
        grad[i] = (loss_fn(plus) - loss_fn(minus)) / (2.0 * h)
    return grad


def enumerate_best_discounted_reward(mdp: TabularMdp, state: int, action: int,
                                     depth: int) -> float:
    """Best single discounted reward along any path from (s, a), by search.

    Deterministic MDPs only; used to cross-check the value-iteration fixed
    point on tiny instances.
    """
    if not mdp.deterministic:
        raise ValueError("path enumeration requires deterministic transitions")

    def recurse(s, a, d):
        best = mdp.reward[s, a]
        if d == 0 or mdp.terminal[s]:
            return best
        s2 = int(mdp.transition[s, a])
        if mdp.terminal[s2]:
            return best
        for a2 in range(mdp.n_actions):
            best = max(best, mdp.gamma * recurse(s2, a2, d - 1))
        return best

    return recurse(state, action, depth)
