"""Unmodified SAC and TD3 update rules.

Both algorithms expose the same surface used elsewhere:

  ``update(batch, step, gen)``    one gradient pass over a batch
  ``actor_value(obs, action)``    the value computation used for the actor
                                  update (min over twins for SAC, first
                                  critic for TD3)
  ``rollout_action(obs, gen)``    the algorithm's own exploration action
  ``eval_action(obs)``            deterministic evaluation action
"""

from __future__ import annotations

import copy

import numpy as np
import torch
import torch.nn.functional as F

from .nets import (DeterministicPolicy, SquashedGaussianPolicy, TwinCritic,
                   init_weights)


class NonFiniteLoss(RuntimeError):
    """A training loss became NaN or infinite."""


def _check_loss(name, loss):
    if not torch.isfinite(loss):
        raise NonFiniteLoss(f"{name} loss is non-finite: {loss.item()!r}")
    return loss


def soft_target_update(online: torch.nn.Module, target: torch.nn.Module, tau: float):
    """target <- tau * online + (1 - tau) * target, elementwise."""
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    with torch.no_grad():
        for p, tp in zip(online.parameters(), target.parameters()):
            tp.mul_(1.0 - tau).add_(p, alpha=tau)
        for b, tb in zip(online.buffers(), target.buffers()):
            tb.copy_(b)


class SAC:
    """Soft Actor-Critic with twin critics and automatic temperature."""

    def __init__(self, spec, hidden_dims=(400, 300), lr=1e-3, gamma=0.99,
                 tau=0.005, init_temperature=1.0, target_entropy=None,
                 dtype=torch.float64, init_gen: torch.Generator = None):
        self.gamma = gamma
        self.tau = tau
        self.dtype = dtype
        self.target_entropy = (-float(spec.action_dim)
                               if target_entropy is None else target_entropy)

        gen = init_gen if init_gen is not None else torch.Generator()
        self.actor = SquashedGaussianPolicy(
            spec.state_dim, spec.action_dim, spec.action_low, spec.action_high,
            hidden_dims).to(dtype)
        self.critic = TwinCritic(spec.state_dim, spec.action_dim, hidden_dims).to(dtype)
        init_weights(self.actor, gen)
        init_weights(self.critic.q1, gen)
        init_weights(self.critic.q2, gen)
        self.target_critic = copy.deepcopy(self.critic)
        for p in self.target_critic.parameters():
            p.requires_grad_(False)

        self.log_alpha = torch.tensor(float(np.log(init_temperature)),
                                      dtype=dtype, requires_grad=True)
        self.actor_opt = torch.optim.Adam(self.actor.parameters(), lr=lr)
        self.critic_opt = torch.optim.Adam(self.critic.parameters(), lr=lr)
        self.alpha_opt = torch.optim.Adam([self.log_alpha], lr=lr)

    @property
    def alpha(self):
        return self.log_alpha.exp()

    def actor_value(self, obs, action):
        q1, q2 = self.critic(obs, action)
        return torch.min(q1, q2)

    def rollout_action(self, obs, gen):
        with torch.no_grad():
            action, _ = self.actor.sample(obs, gen)
        return action

    def eval_action(self, obs):
        with torch.no_grad():
            return self.actor.mean_action(obs)

    def critic_update(self, batch, gen) -> float:
        obs, action = batch["obs"], batch["action"]
        reward, next_obs = batch["reward"], batch["next_obs"]
        terminated = batch["terminated"]
        with torch.no_grad():
            next_action, next_logp = self.actor.sample(next_obs, gen)
            tq1, tq2 = self.target_critic(next_obs, next_action)
            next_v = torch.min(tq1, tq2) - self.alpha.detach() * next_logp
            y = reward + self.gamma * (1.0 - terminated) * next_v
        q1, q2 = self.critic(obs, action)
        loss = _check_loss("sac critic", F.mse_loss(q1, y) + F.mse_loss(q2, y))
        self.critic_opt.zero_grad()
        loss.backward()
        self.critic_opt.step()
        return loss.item()

    def actor_and_temperature_update(self, batch, gen) -> tuple[float, float]:
        obs = batch["obs"]
        action, logp = self.actor.sample(obs, gen)
        q = self.actor_value(obs, action)
        actor_loss = _check_loss("sac actor", (self.alpha.detach() * logp - q).mean())
        self.actor_opt.zero_grad()
        actor_loss.backward()
        self.actor_opt.step()

        alpha_loss = -(self.log_alpha * (logp.detach() + self.target_entropy)).mean()
        self.alpha_opt.zero_grad()
        alpha_loss.backward()
        self.alpha_opt.step()
        return actor_loss.item(), self.alpha.item()

    def update(self, batch, step, gen) -> dict:
        critic_loss = self.critic_update(batch, gen)
        actor_loss, alpha = self.actor_and_temperature_update(batch, gen)
        soft_target_update(self.critic, self.target_critic, self.tau)
        return {"critic_loss": critic_loss, "actor_loss": actor_loss, "alpha": alpha}


class TD3:
    """Twin Delayed DDPG with delayed actor/target updates."""

    def __init__(self, spec, hidden_dims=(400, 300), lr=1e-3, gamma=0.99,
                 tau=0.005, action_noise_std=0.1, target_noise_std=0.2,
                 target_noise_clip=0.5, actor_update_freq=2,
                 dtype=torch.float64, init_gen: torch.Generator = None):
        self.gamma = gamma
        self.tau = tau
        self.dtype = dtype
        self.action_noise_std = action_noise_std
        self.target_noise_std = target_noise_std
        self.target_noise_clip = target_noise_clip
        self.actor_update_freq = actor_update_freq
        self._last_actor_loss = 0.0

        gen = init_gen if init_gen is not None else torch.Generator()
        self.actor = DeterministicPolicy(
            spec.state_dim, spec.action_dim, spec.action_low, spec.action_high,
            hidden_dims).to(dtype)
        self.critic = TwinCritic(spec.state_dim, spec.action_dim, hidden_dims).to(dtype)
        init_weights(self.actor, gen)
        init_weights(self.critic.q1, gen)
        init_weights(self.critic.q2, gen)
        self.target_actor = copy.deepcopy(self.actor)
        self.target_critic = copy.deepcopy(self.critic)
        for m in (self.target_actor, self.target_critic):
            for p in m.parameters():
                p.requires_grad_(False)

        self.low = torch.as_tensor(np.asarray(spec.action_low), dtype=dtype)
        self.high = torch.as_tensor(np.asarray(spec.action_high), dtype=dtype)
        self.actor_opt = torch.optim.Adam(self.actor.parameters(), lr=lr)
        self.critic_opt = torch.optim.Adam(self.critic.parameters(), lr=lr)

    def actor_value(self, obs, action):
        # TD3 uses only the first critic in its actor objective.
        return self.critic.q1(obs, action)

    def rollout_action(self, obs, gen):
        with torch.no_grad():
            action = self.actor(obs)
            if self.action_noise_std > 0.0:
                noise = torch.randn(action.shape, generator=gen, dtype=action.dtype)
                action = action + noise * self.action_noise_std
            return torch.clamp(action, self.low, self.high)

    def eval_action(self, obs):
        with torch.no_grad():
            return self.actor(obs)

    def critic_update(self, batch, gen) -> float:
        obs, action = batch["obs"], batch["action"]
        reward, next_obs = batch["reward"], batch["next_obs"]
        terminated = batch["terminated"]
        with torch.no_grad():
            next_action = self.target_actor(next_obs)
            noise = torch.randn(next_action.shape, generator=gen,
                                dtype=next_action.dtype) * self.target_noise_std
            noise = torch.clamp(noise, -self.target_noise_clip, self.target_noise_clip)
            next_action = torch.clamp(next_action + noise, self.low, self.high)
            tq1, tq2 = self.target_critic(next_obs, next_action)
            y = reward + self.gamma * (1.0 - terminated) * torch.min(tq1, tq2)
        q1, q2 = self.critic(obs, action)
        loss = _check_loss("td3 critic", F.mse_loss(q1, y) + F.mse_loss(q2, y))
        self.critic_opt.zero_grad()
        loss.backward()
        self.critic_opt.step()
        return loss.item()

    def actor_update(self, batch) -> float:
        obs = batch["obs"]
        loss = _check_loss("td3 actor", -self.actor_value(obs, self.actor(obs)).mean())
        self.actor_opt.zero_grad()
        loss.backward()
        self.actor_opt.step()
        return loss.item()

    def update(self, batch, step, gen) -> dict:
        critic_loss = self.critic_update(batch, gen)
        if step % self.actor_update_freq == 0:
            self._last_actor_loss = self.actor_update(batch)
            soft_target_update(self.critic, self.target_critic, self.tau)
            soft_target_update(self.actor, self.target_actor, self.tau)
        return {"critic_loss": critic_loss, "actor_loss": self._last_actor_loss}
