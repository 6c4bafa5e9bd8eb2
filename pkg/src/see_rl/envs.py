"""Desk-scale control environments with dense/sparse/adverse reward variants.

All environments are self-contained, deterministic given (state, action),
and expose a uniform episodic interface: ``reset(seed)`` and ``step(action)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

DENSE = "dense"
SPARSE = "sparse"
ADVERSE = "adverse"
VARIANTS = (DENSE, SPARSE, ADVERSE)


class EnvError(ValueError):
    """Invalid state, action, or configuration passed to an environment."""


@dataclass(frozen=True)
class MdpSpec:
    state_dim: int
    action_dim: int
    action_low: np.ndarray
    action_high: np.ndarray
    max_episode_steps: int
    discount_hint: float = 0.99
    # Used for e.g. probe initialization; [-1, 1] where a dimension is unbounded.
    obs_low: np.ndarray = None
    obs_high: np.ndarray = None

    def __post_init__(self):
        if self.state_dim < 1 or self.action_dim < 1:
            raise EnvError("dimensions must be positive")
        if self.max_episode_steps < 1:
            raise EnvError("max_episode_steps must be >= 1")
        if not np.all(self.action_low < self.action_high):
            raise EnvError("action_low must be elementwise below action_high")
        if self.obs_low is None:
            object.__setattr__(self, "obs_low", -np.ones(self.state_dim))
        if self.obs_high is None:
            object.__setattr__(self, "obs_high", np.ones(self.state_dim))


@dataclass
class StepResult:
    next_obs: np.ndarray
    reward: float
    terminated: bool
    truncated: bool


@dataclass
class Transition:
    obs: np.ndarray
    action: np.ndarray
    reward: float
    next_obs: np.ndarray
    terminated: bool


def _check_finite(name, value):
    arr = np.asarray(value, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise EnvError(f"non-finite {name}: {value!r}")
    return arr


def angle_normalize(x: float) -> float:
    return ((x + math.pi) % (2.0 * math.pi)) - math.pi


class PendulumEnv:
    """Torque-controlled inverted pendulum.

    Dynamics: g=10, m=1, l=1, dt=0.05, torque clipped to [-2, 2], angular
    velocity clipped to [-8, 8]. Observation is (cos th, sin th, thdot).

    Variants:
      dense   -- cost -(th^2 + 0.1 thdot^2 + 0.001 u^2), random start
      sparse  -- +1 while within 10 degrees of upright, start hanging down
      adverse -- sparse reward - 0.001 u^2, start hanging down
    """

    G = 10.0
    M = 1.0
    L = 1.0
    DT = 0.05
    MAX_TORQUE = 2.0
    MAX_SPEED = 8.0
    GOAL_ANGLE = math.radians(10.0)

    def __init__(self, variant: str = DENSE):
        if variant not in VARIANTS:
            raise EnvError(f"unknown variant {variant!r}")
        self.variant = variant
        self.spec = MdpSpec(
            state_dim=3,
            action_dim=1,
            action_low=np.array([-self.MAX_TORQUE]),
            action_high=np.array([self.MAX_TORQUE]),
            max_episode_steps=200,
            obs_low=np.array([-1.0, -1.0, -self.MAX_SPEED]),
            obs_high=np.array([1.0, 1.0, self.MAX_SPEED]),
        )
        self._theta = math.pi
        self._theta_dot = 0.0
        self._elapsed = 0

    def _obs(self) -> np.ndarray:
        return np.array([math.cos(self._theta), math.sin(self._theta), self._theta_dot])

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        if self.variant == DENSE:
            self._theta = rng.uniform(-math.pi, math.pi)
            self._theta_dot = rng.uniform(-1.0, 1.0)
        else:
            # Sparse/adverse episodes always start hanging down at rest.
            self._theta = math.pi
            self._theta_dot = 0.0
        self._elapsed = 0
        return self._obs()

    def step(self, action) -> StepResult:
        action = _check_finite("action", action)
        _check_finite("state", [self._theta, self._theta_dot])
        u = float(np.clip(action, -self.MAX_TORQUE, self.MAX_TORQUE).reshape(-1)[0])

        th, thdot = self._theta, self._theta_dot
        g, m, l, dt = self.G, self.M, self.L, self.DT
        newthdot = thdot + (3.0 * g / (2.0 * l) * math.sin(th) + 3.0 / (m * l**2) * u) * dt
        newthdot = float(np.clip(newthdot, -self.MAX_SPEED, self.MAX_SPEED))
        newth = th + newthdot * dt

        self._theta, self._theta_dot = newth, newthdot
        self._elapsed += 1

        if self.variant == DENSE:
            reward = -(angle_normalize(th) ** 2 + 0.1 * thdot**2 + 0.001 * u**2)
        else:
            in_goal = abs(angle_normalize(newth)) <= self.GOAL_ANGLE
            reward = 1.0 if in_goal else 0.0
            if self.variant == ADVERSE:
                reward -= 0.001 * u**2

        truncated = self._elapsed >= self.spec.max_episode_steps
        return StepResult(self._obs(), reward, terminated=False, truncated=truncated)


class LocalOptimumCarEnv:
    """Continuous mountain car with a lesser goal on the left.

    Reaching position >= 0.45 terminates with +100; reaching position
    <= -1.1 terminates with +10 (the local-optimum trap).

    Variants:
      dense   -- goal rewards - 0.1 force^2 per step - |position - 0.45|
      sparse  -- goal rewards only
      adverse -- goal rewards - 0.1 force^2 per step
    """

    POWER = 0.0015
    GRAVITY = 0.0025
    MIN_POS = -1.2
    MAX_POS = 0.6
    MAX_SPEED = 0.07
    RIGHT_GOAL = 0.45
    LEFT_GOAL = -1.1
    RIGHT_REWARD = 100.0
    LEFT_REWARD = 10.0

    def __init__(self, variant: str = DENSE):
        if variant not in VARIANTS:
            raise EnvError(f"unknown variant {variant!r}")
        self.variant = variant
        self.spec = MdpSpec(
            state_dim=2,
            action_dim=1,
            action_low=np.array([-1.0]),
            action_high=np.array([1.0]),
            max_episode_steps=999,
            obs_low=np.array([self.MIN_POS, -self.MAX_SPEED]),
            obs_high=np.array([self.MAX_POS, self.MAX_SPEED]),
        )
        self._position = -0.5
        self._velocity = 0.0
        self._elapsed = 0

    def _obs(self) -> np.ndarray:
        return np.array([self._position, self._velocity])

    def reset(self, seed: int) -> np.ndarray:
        rng = np.random.default_rng(seed)
        self._position = rng.uniform(-0.6, -0.4)
        self._velocity = 0.0
        self._elapsed = 0
        return self._obs()

    def step(self, action) -> StepResult:
        action = _check_finite("action", action)
        _check_finite("state", [self._position, self._velocity])
        force = float(np.clip(action, -1.0, 1.0).reshape(-1)[0])

        velocity = self._velocity + force * self.POWER - self.GRAVITY * math.cos(3.0 * self._position)
        velocity = float(np.clip(velocity, -self.MAX_SPEED, self.MAX_SPEED))
        position = float(np.clip(self._position + velocity, self.MIN_POS, self.MAX_POS))
        if position <= self.MIN_POS and velocity < 0.0:
            velocity = 0.0

        self._position, self._velocity = position, velocity
        self._elapsed += 1

        terminated = False
        reward = 0.0
        if position >= self.RIGHT_GOAL:
            reward += self.RIGHT_REWARD
            terminated = True
        elif position <= self.LEFT_GOAL:
            reward += self.LEFT_REWARD
            terminated = True

        if self.variant in (DENSE, ADVERSE):
            reward -= 0.1 * force**2
        if self.variant == DENSE:
            reward -= abs(position - self.RIGHT_GOAL)

        truncated = not terminated and self._elapsed >= self.spec.max_episode_steps
        return StepResult(self._obs(), reward, terminated, truncated)


class TwoGoalPlaneEnv:
    """2x2 plane with two terminal goal points, reward 1 at either goal.

    Actions are displacements clipped to a maximum norm of 0.05. All
    variants share the same sparse goal reward.
    """

    MAX_STEP = 0.05

    def __init__(self, variant: str = SPARSE,
                 goal_a=(-0.75, 0.0), goal_b=(0.75, 0.0),
                 goal_radius: float = 0.05, start=(0.0, 0.0)):
        if variant not in VARIANTS:
            raise EnvError(f"unknown variant {variant!r}")
        self.variant = variant
        self.goal_a = np.asarray(goal_a, dtype=np.float64)
        self.goal_b = np.asarray(goal_b, dtype=np.float64)
        self.goal_radius = float(goal_radius)
        self.start = np.asarray(start, dtype=np.float64)
        self.spec = MdpSpec(
            state_dim=2,
            action_dim=2,
            action_low=np.array([-self.MAX_STEP, -self.MAX_STEP]),
            action_high=np.array([self.MAX_STEP, self.MAX_STEP]),
            max_episode_steps=200,
            discount_hint=0.9,
            obs_low=np.array([-1.0, -1.0]),
            obs_high=np.array([1.0, 1.0]),
        )
        self._pos = self.start.copy()
        self._elapsed = 0

    def reset(self, seed: int) -> np.ndarray:
        np.random.default_rng(seed)  # consumed for interface uniformity
        self._pos = self.start.copy()
        self._elapsed = 0
        return self._pos.copy()

    def _at_goal(self, pos) -> bool:
        return (np.linalg.norm(pos - self.goal_a) <= self.goal_radius
                or np.linalg.norm(pos - self.goal_b) <= self.goal_radius)

    def step(self, action) -> StepResult:
        action = _check_finite("action", action).reshape(-1)
        _check_finite("state", self._pos)
        norm = float(np.linalg.norm(action))
        if norm > self.MAX_STEP:
            action = action * (self.MAX_STEP / norm)
        self._pos = np.clip(self._pos + action, -1.0, 1.0)
        self._elapsed += 1

        terminated = self._at_goal(self._pos)
        reward = 1.0 if terminated else 0.0
        truncated = not terminated and self._elapsed >= self.spec.max_episode_steps
        return StepResult(self._pos.copy(), reward, terminated, truncated)


_REGISTRY = {
    "pendulum": PendulumEnv,
    "local-optimum-car": LocalOptimumCarEnv,
    "two-goal-plane": TwoGoalPlaneEnv,
}


def env_ids():
    return sorted(_REGISTRY)


def make(env_id: str, variant: str = DENSE, **kwargs):
    """Build an environment by string id and reward variant."""
    if env_id not in _REGISTRY:
        raise EnvError(f"unknown environment {env_id!r}; known: {env_ids()}")
    if variant not in VARIANTS:
        raise EnvError(f"unknown variant {variant!r}; known: {list(VARIANTS)}")
    return _REGISTRY[env_id](variant=variant, **kwargs)
