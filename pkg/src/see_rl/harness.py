"""Seeded training/evaluation loop, metrics logging, and checkpointing."""

from __future__ import annotations

import dataclasses
import json
import math
import os
import time
from dataclasses import dataclass, field

import numpy as np
import torch

from . import envs
from .base import SAC, TD3, NonFiniteLoss
from .buffer import ReplayBuffer
from .envs import Transition
from .nets import save_checkpoint
from .see import AblationMode, SeeAgent

METRICS_COLUMNS = [
    "step", "episode", "eval_return_mean", "eval_return_stderr",
    "train_episode_return", "exploration_reward_mean", "p_q_mean",
    "exploit_critic_loss", "exploit_actor_loss",
    "explore_critic_loss", "explore_actor_loss", "wall_time",
]


class ConfigError(ValueError):
    """Invalid training configuration."""


@dataclass
class TrainConfig:
    algo: str = "sac"
    see_enabled: bool = True
    env_id: str = "pendulum"
    variant: str = "dense"
    seed: int = 0
    total_steps: int = 100_000
    warm_up_steps: int = 1000
    eval_every: int = 1000
    eval_episodes: int = 10
    # Table-style defaults for the classic-control setting
    lr: float = 1e-3
    batch_size: int = 256
    gamma: float = 0.99
    buffer_size: int = 200_000
    tau: float = 0.005
    hidden_dims: tuple = (400, 300)
    init_temperature: float = 1.0
    n_probes: int = 16
    lam: float = 0.5
    tau_mix: float = 1.0
    action_noise_std: float = None  # default: 0.1 for plain TD3, 0.0 under SEE
    target_noise_std: float = 0.2
    target_noise_clip: float = 0.5
    actor_update_freq: int = 2
    ablation: AblationMode = field(default_factory=AblationMode)
    entropy_in_target: bool = False
    dtype: str = "float64"
    out_dir: str = None

    def __post_init__(self):
        if self.algo not in ("sac", "td3"):
            raise ConfigError(f"unknown algo {self.algo!r}")
        if self.variant not in envs.VARIANTS:
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.env_id not in envs.env_ids():
            raise ConfigError(f"unknown env {self.env_id!r}")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must be in [0, 1)")
        for name in ("total_steps", "warm_up_steps", "eval_every",
                     "eval_episodes", "batch_size", "buffer_size", "n_probes"):
            if getattr(self, name) < (0 if name == "total_steps" else 1):
                raise ConfigError(f"{name} must be positive")
        if self.dtype not in ("float64", "float32"):
            raise ConfigError("dtype must be float64 or float32")
        if self.action_noise_std is None:
            self.action_noise_std = 0.0 if self.see_enabled else 0.1

    @property
    def torch_dtype(self):
        return torch.float64 if self.dtype == "float64" else torch.float32

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        return d


@dataclass
class MetricsRow:
    step: int
    episode: int
    eval_return_mean: float
    eval_return_stderr: float
    train_episode_return: float = math.nan
    exploration_reward_mean: float = math.nan
    p_q_mean: float = math.nan
    exploit_critic_loss: float = math.nan
    exploit_actor_loss: float = math.nan
    explore_critic_loss: float = math.nan
    explore_actor_loss: float = math.nan
    wall_time: float = 0.0

    def to_csv_line(self):
        vals = [getattr(self, c) for c in METRICS_COLUMNS]
        return ",".join(str(v) for v in vals)


def _torch_gen(seed_seq: np.random.SeedSequence) -> torch.Generator:
    gen = torch.Generator()
    gen.manual_seed(int(seed_seq.generate_state(1, dtype=np.uint64)[0] >> 1))
    return gen


class RngStreams:
    """Named independent substreams of one master seed."""

    NAMES = ("env", "rollout", "warmup", "mix", "buffer", "init_exploit",
             "init_explore", "update_exploit", "update_explore", "eval")

    def __init__(self, seed: int):
        master = np.random.SeedSequence(seed)
        children = master.spawn(len(self.NAMES))
        self.seqs = dict(zip(self.NAMES, children))
        self.env = np.random.default_rng(self.seqs["env"])
        self.rollout = np.random.default_rng(self.seqs["warmup"])
        self.mix = np.random.default_rng(self.seqs["mix"])
        self.buffer = np.random.default_rng(self.seqs["buffer"])
        self.eval = np.random.default_rng(self.seqs["eval"])
        self.torch_rollout = _torch_gen(self.seqs["rollout"])
        self.torch_init_exploit = _torch_gen(self.seqs["init_exploit"])
        self.torch_init_explore = _torch_gen(self.seqs["init_explore"])
        self.torch_update_exploit = _torch_gen(self.seqs["update_exploit"])
        self.torch_update_explore = _torch_gen(self.seqs["update_explore"])


def build_base_algo(config: TrainConfig, spec, init_gen):
    if config.algo == "sac":
        return SAC(spec, hidden_dims=config.hidden_dims, lr=config.lr,
                   gamma=config.gamma, tau=config.tau,
                   init_temperature=config.init_temperature,
                   dtype=config.torch_dtype, init_gen=init_gen)
    return TD3(spec, hidden_dims=config.hidden_dims, lr=config.lr,
               gamma=config.gamma, tau=config.tau,
               action_noise_std=config.action_noise_std,
               target_noise_std=config.target_noise_std,
               target_noise_clip=config.target_noise_clip,
               actor_update_freq=config.actor_update_freq,
               dtype=config.torch_dtype, init_gen=init_gen)


def evaluate(eval_action, env_id, variant, episodes, seed):
    """Mean and standard error of return under the deterministic policy."""
    if episodes < 1:
        raise ConfigError("need at least one evaluation episode")
    returns = []
    rng = np.random.default_rng(seed)
    for _ in range(episodes):
        env = envs.make(env_id, variant)
        obs = env.reset(int(rng.integers(0, 2**31)))
        total = 0.0
        while True:
            action = eval_action(obs)
            result = env.step(action)
            total += result.reward
            obs = result.next_obs
            if result.terminated or result.truncated:
                break
        returns.append(total)
    mean = float(np.mean(returns))
    stderr = (float(np.std(returns, ddof=1) / math.sqrt(len(returns)))
              if len(returns) > 1 else 0.0)
    return mean, stderr


def _to_batch(arrays: dict, dtype) -> dict:
    return {k: torch.as_tensor(v, dtype=dtype) for k, v in arrays.items()}


class Trainer:
    """Owns all mutable training state for a single seeded run."""

    def __init__(self, config: TrainConfig):
        self.config = config
        self.rng = RngStreams(config.seed)
        self.env = envs.make(config.env_id, config.variant)
        self.spec = self.env.spec
        self.base = build_base_algo(config, self.spec, self.rng.torch_init_exploit)
        self.see = None
        if config.see_enabled:
            self.see = SeeAgent(
                self.base, self.spec, hidden_dims=config.hidden_dims,
                lr=config.lr, gamma=config.gamma, tau=config.tau,
                n_probes=config.n_probes, lam=config.lam,
                tau_mix=config.tau_mix, ablation=config.ablation,
                entropy_in_target=config.entropy_in_target,
                dtype=config.torch_dtype, init_gen=self.rng.torch_init_explore)
        self.buffer = ReplayBuffer(config.buffer_size, self.spec.state_dim,
                                   self.spec.action_dim)
        self.rows: list[MetricsRow] = []
        self._start_time = time.monotonic()

    def _eval_action(self, obs):
        obs_t = torch.as_tensor(obs, dtype=self.config.torch_dtype).unsqueeze(0)
        return self.base.eval_action(obs_t).squeeze(0).numpy()

    def _rollout_action(self, obs):
        """Behavior action after warm-up; returns (action, p_q or nan)."""
        obs_t = torch.as_tensor(obs, dtype=self.config.torch_dtype).unsqueeze(0)
        if self.see is not None:
            decision = self.see.behavior_action(obs_t, self.rng.torch_rollout,
                                                self.rng.mix)
            action = (decision.action_exploit if decision.chosen == 0
                      else decision.action_explore)
            return action, decision.p_exploit
        action = self.base.rollout_action(obs_t, self.rng.torch_rollout)
        return action.squeeze(0).numpy(), math.nan

    def _metrics_row(self, step, episode, last_ep_return, losses, p_q_vals):
        mean, stderr = evaluate(
            self._eval_action, self.config.env_id, self.config.variant,
            self.config.eval_episodes,
            int(self.rng.eval.integers(0, 2**31)))
        p_q_mean = float(np.mean(p_q_vals)) if p_q_vals else math.nan
        return MetricsRow(
            step=step, episode=episode,
            eval_return_mean=mean, eval_return_stderr=stderr,
            train_episode_return=last_ep_return,
            exploration_reward_mean=losses.get("exploration_reward_mean", math.nan),
            p_q_mean=p_q_mean,
            exploit_critic_loss=losses.get("critic_loss", math.nan),
            exploit_actor_loss=losses.get("actor_loss", math.nan),
            explore_critic_loss=losses.get("explore_critic_loss", math.nan),
            explore_actor_loss=losses.get("explore_actor_loss", math.nan),
            wall_time=time.monotonic() - self._start_time)

    def run(self) -> MetricsRow:
        config = self.config
        out_dir = config.out_dir
        metrics_file = None
        if out_dir:
            os.makedirs(out_dir, exist_ok=True)
            with open(os.path.join(out_dir, "config.json"), "w") as fh:
                json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
            metrics_file = open(os.path.join(out_dir, "metrics.csv"), "w")
            metrics_file.write(",".join(METRICS_COLUMNS) + "\n")

        def emit(row):
            self.rows.append(row)
            if metrics_file:
                metrics_file.write(row.to_csv_line() + "\n")
                metrics_file.flush()

        obs = self.env.reset(int(self.rng.env.integers(0, 2**31)))
        episode = 0
        ep_return = 0.0
        last_ep_return = math.nan
        losses: dict = {}
        p_q_vals: list = []

        emit(self._metrics_row(0, episode, last_ep_return, losses, p_q_vals))
        try:
            for step in range(1, config.total_steps + 1):
                if step <= config.warm_up_steps:
                    action = self.rng.rollout.uniform(
                        self.spec.action_low, self.spec.action_high)
                else:
                    action, p_q = self._rollout_action(obs)
                    if not math.isnan(p_q):
                        p_q_vals.append(p_q)

                result = self.env.step(action)
                self.buffer.push(Transition(obs, np.asarray(action, dtype=np.float64),
                                            result.reward, result.next_obs,
                                            result.terminated))
                ep_return += result.reward
                obs = result.next_obs
                if result.terminated or result.truncated:
                    last_ep_return = ep_return
                    ep_return = 0.0
                    episode += 1
                    obs = self.env.reset(int(self.rng.env.integers(0, 2**31)))

                if step > config.warm_up_steps and len(self.buffer) >= config.batch_size:
                    arrays = self.buffer.sample(config.batch_size, self.rng.buffer)
                    batch = _to_batch(arrays, config.torch_dtype)
                    losses = dict(self.base.update(batch, step,
                                                   self.rng.torch_update_exploit))
                    if self.see is not None:
                        losses.update(self.see.update(batch, step,
                                                      self.rng.torch_update_explore))

                if step % config.eval_every == 0:
                    emit(self._metrics_row(step, episode, last_ep_return,
                                           losses, p_q_vals))
                    p_q_vals = []
        except NonFiniteLoss:
            if metrics_file:
                metrics_file.flush()
            raise
        finally:
            if metrics_file:
                metrics_file.close()

        if out_dir:
            self.save_checkpoint(os.path.join(out_dir, "checkpoint.npz"))
        return self.rows[-1]

    def checkpoint_modules(self) -> dict:
        modules = {
            "base.actor": self.base.actor,
            "base.critic": self.base.critic,
            "base.target_critic": self.base.target_critic,
        }
        if isinstance(self.base, SAC):
            modules["base.log_alpha"] = self.base.log_alpha
        else:
            modules["base.target_actor"] = self.base.target_actor
        if self.see is not None:
            modules["see.critic"] = self.see.critic
            modules["see.target_critic"] = self.see.target_critic
            modules["see.actor"] = self.see.actor
            if self.see.is_sac:
                modules["see.log_alpha"] = self.see.log_alpha
            else:
                modules["see.target_actor"] = self.see.target_actor
        return modules

    def save_checkpoint(self, path):
        rng_state = {
            "env": self.rng.env.bit_generator.state,
            "buffer": self.rng.buffer.bit_generator.state,
            "mix": self.rng.mix.bit_generator.state,
            "eval": self.rng.eval.bit_generator.state,
        }
        save_checkpoint(path, self.checkpoint_modules(),
                        self.config.to_dict(), rng_state)


def train(config: TrainConfig) -> MetricsRow:
    """Run one seeded training job; returns the final metrics row."""
    return Trainer(config).run()
