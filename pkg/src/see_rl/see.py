"""Error-seeking exploration around an unmodified off-policy base algorithm.

The exploration side learns a second actor-critic whose reward is the
absolute TD-error of the exploitation critic. Its critic is trained with a
maximum-reward backup and conditioned on the exploitation parameters via
fingerprint probes. During rollouts a mixed behavior policy picks between
the exploitation and exploration candidate actions.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from .base import SAC, TD3, _check_loss, soft_target_update
from .nets import (ConditionedTwinCritic, DeterministicPolicy,
                   SquashedGaussianPolicy, init_weights)


@dataclass(frozen=True)
class AblationMode:
    no_conditioning: bool = False
    no_max_update: bool = False
    no_mixing: bool = False


@dataclass
class MixDecision:
    """Record of one behavior-policy draw."""
    action_exploit: np.ndarray
    action_explore: np.ndarray
    adv_exploit: float
    adv_explore: float
    p_exploit: float
    p_explore: float
    chosen: int  # 0 = exploitation action, 1 = exploration action


def exploration_reward(batch, actor_value, next_exploit_actions, gamma) -> torch.Tensor:
    """Per-transition absolute TD-error of the exploitation value estimate.

    Uses only the online exploitation parameters; never stored in the
    replay buffer.
    """
    with torch.no_grad():
        q_next = actor_value(batch["next_obs"], next_exploit_actions)
        q_now = actor_value(batch["obs"], batch["action"])
        r_delta = torch.abs(batch["reward"]
                            + gamma * (1.0 - batch["terminated"]) * q_next
                            - q_now)
    if not torch.all(torch.isfinite(r_delta)):
        raise RuntimeError("non-finite exploration reward")
    return r_delta


def max_bellman_target(r_delta, next_value, gamma, terminated):
    """max(r, gamma * next_value); the bootstrap is dropped on termination."""
    bootstrapped = torch.maximum(r_delta, gamma * next_value)
    return torch.where(terminated.bool(), r_delta, bootstrapped)


def mixing_logits(adv_exploit, adv_explore, lam, tau_mix):
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must be in [0, 1]")
    if tau_mix <= 0.0:
        raise ValueError("mixing temperature must be positive")
    return lam * adv_exploit / tau_mix, (1.0 - lam) * adv_explore / tau_mix


def mixing_probabilities(adv_exploit, adv_explore, lam=0.5, tau_mix=1.0):
    """Closed-form two-way Boltzmann selection probabilities."""
    l_q, l_d = mixing_logits(adv_exploit, adv_explore, lam, tau_mix)
    # logistic form, stable for large logit gaps
    p_q = 1.0 / (1.0 + math.exp(min(max(l_d - l_q, -700.0), 700.0)))
    return p_q, 1.0 - p_q


def behavior_sample(adv_exploit, adv_explore, lam, tau_mix,
                    rng: np.random.Generator,
                    action_exploit=None, action_explore=None) -> MixDecision:
    """Draw the behavior-policy choice between the two candidate actions."""
    p_q, p_d = mixing_probabilities(adv_exploit, adv_explore, lam, tau_mix)
    chosen = 0 if rng.random() < p_q else 1
    return MixDecision(action_exploit, action_explore,
                       float(adv_exploit), float(adv_explore),
                       p_q, p_d, chosen)


class SeeAgent:
    """Exploration objective state plus the mixed behavior policy.

    ``base`` is an untouched SAC or TD3 instance; its own updates are never
    modified here.
    """

    def __init__(self, base, spec, hidden_dims=(400, 300), lr=1e-3,
                 gamma=0.99, tau=0.005, n_probes=16, lam=0.5, tau_mix=1.0,
                 ablation: AblationMode = AblationMode(),
                 entropy_in_target: bool = False,
                 dtype=torch.float64, init_gen: torch.Generator = None):
        self.base = base
        self.gamma = gamma
        self.tau = tau
        self.lam = lam
        self.tau_mix = tau_mix
        self.ablation = ablation
        self.entropy_in_target = entropy_in_target
        self.dtype = dtype
        self.is_sac = isinstance(base, SAC)
        self._alternate_next = 0  # no_mixing ablation: start with exploitation
        self._last_actor_loss = 0.0

        gen = init_gen if init_gen is not None else torch.Generator()
        self.critic = ConditionedTwinCritic(
            spec.state_dim, spec.action_dim, n_probes, hidden_dims,
            conditioned=not ablation.no_conditioning).to(dtype)
        init_weights(self.critic.q1, gen)
        init_weights(self.critic.q2, gen)
        self.critic.probes.init_uniform(spec.obs_low, spec.obs_high,
                                        spec.action_low, spec.action_high, gen)
        self.target_critic = copy.deepcopy(self.critic)
        for p in self.target_critic.parameters():
            p.requires_grad_(False)

        if self.is_sac:
            self.actor = SquashedGaussianPolicy(
                spec.state_dim, spec.action_dim, spec.action_low,
                spec.action_high, hidden_dims).to(dtype)
            # separate temperature for the exploration entropy objective
            self.log_alpha = torch.tensor(0.0, dtype=dtype, requires_grad=True)
            self.target_entropy = -float(spec.action_dim)
            self.alpha_opt = torch.optim.Adam([self.log_alpha], lr=lr)
            self.target_actor = None
        else:
            self.actor = DeterministicPolicy(
                spec.state_dim, spec.action_dim, spec.action_low,
                spec.action_high, hidden_dims).to(dtype)
            self.target_actor = None  # set after init below
        init_weights(self.actor, gen)
        if not self.is_sac:
            self.target_actor = copy.deepcopy(self.actor)
            for p in self.target_actor.parameters():
                p.requires_grad_(False)

        self.actor_opt = torch.optim.Adam(self.actor.parameters(), lr=lr)
        self.critic_opt = torch.optim.Adam(self.critic.parameters(), lr=lr)

    @property
    def alpha(self):
        return self.log_alpha.exp() if self.is_sac else None

    # -- value computations ------------------------------------------------

    def _embedding(self, critic, grad_probes: bool):
        """Fingerprint embedding of the online exploitation critic.

        The exploitation parameters are a constant input here; only the
        probes may receive gradient.
        """
        if not critic.conditioned:
            return None
        if grad_probes:
            # freeze the exploitation parameters for this forward pass so the
            # exploration loss backpropagates into the probes only
            base_params = list(self.base.critic.parameters())
            for p in base_params:
                p.requires_grad_(False)
            try:
                return critic.probes.embed(self.base.actor_value)
            finally:
                for p in base_params:
                    p.requires_grad_(True)
        with torch.no_grad():
            return critic.probes.embed(self.base.actor_value)

    def explore_value(self, obs, action, embedding=None):
        """Value computation mirroring the base algorithm's actor update."""
        if embedding is None:
            embedding = self._embedding(self.critic, grad_probes=False)
        q1, q2 = self.critic(obs, action, embedding)
        return torch.min(q1, q2) if self.is_sac else q1

    # -- candidate actions -------------------------------------------------

    def candidate_actions(self, obs, gen):
        a_q = self.base.rollout_action(obs, gen)
        if self.is_sac:
            with torch.no_grad():
                a_d, _ = self.actor.sample(obs, gen)
        else:
            with torch.no_grad():
                a_d = self.actor(obs)
        return a_q, a_d

    def relative_advantages(self, obs, a_q, a_d):
        with torch.no_grad():
            adv_q = (self.base.actor_value(obs, a_q)
                     - self.base.actor_value(obs, a_d))
            emb = self._embedding(self.critic, grad_probes=False)
            adv_d = (self.explore_value(obs, a_d, emb)
                     - self.explore_value(obs, a_q, emb))
        return float(adv_q.item()), float(adv_d.item())

    def behavior_action(self, obs, gen, mix_rng: np.random.Generator) -> MixDecision:
        """One behavior-policy draw for a single observation (batch of 1)."""
        a_q, a_d = self.candidate_actions(obs, gen)
        adv_q, adv_d = self.relative_advantages(obs, a_q, a_d)
        a_q_np = a_q.squeeze(0).numpy().copy()
        a_d_np = a_d.squeeze(0).numpy().copy()
        if self.ablation.no_mixing:
            chosen = self._alternate_next
            self._alternate_next = 1 - self._alternate_next
            p_q = 1.0 if chosen == 0 else 0.0
            return MixDecision(a_q_np, a_d_np, adv_q, adv_d, p_q, 1.0 - p_q, chosen)
        return behavior_sample(adv_q, adv_d, self.lam, self.tau_mix, mix_rng,
                               a_q_np, a_d_np)

    # -- updates -----------------------------------------------------------

    def _next_exploit_actions(self, next_obs, gen):
        with torch.no_grad():
            if self.is_sac:
                a, _ = self.base.actor.sample(next_obs, gen)
                return a
            return self.base.actor(next_obs)

    def critic_update(self, batch, gen) -> tuple[float, float]:
        """Exploration critic step; returns (loss, mean exploration reward)."""
        obs, action = batch["obs"], batch["action"]
        next_obs, terminated = batch["next_obs"], batch["terminated"]

        next_a_q = self._next_exploit_actions(next_obs, gen)
        r_delta = exploration_reward(batch, self.base.actor_value, next_a_q,
                                     self.base.gamma)

        with torch.no_grad():
            if self.is_sac:
                next_a_d, next_logp = self.actor.sample(next_obs, gen)
            else:
                next_a_d = self.target_actor(next_obs)
                noise = torch.randn(next_a_d.shape, generator=gen,
                                    dtype=next_a_d.dtype) * self.base.target_noise_std
                noise = torch.clamp(noise, -self.base.target_noise_clip,
                                    self.base.target_noise_clip)
                next_a_d = torch.clamp(next_a_d + noise, self.base.low, self.base.high)
            emb_t = self._embedding(self.target_critic, grad_probes=False)
            tq1, tq2 = self.target_critic(next_obs, next_a_d, emb_t)
            next_v = torch.min(tq1, tq2)
            # off by default: under the max backup the entropy bonus
            # compounds toward ~gamma*alpha*H/(1-gamma) and drowns the
            # TD-error signal the exploration critic is meant to track
            if self.is_sac and self.entropy_in_target:
                next_v = next_v - self.alpha.detach() * next_logp
            if self.ablation.no_max_update:
                y = r_delta + self.gamma * (1.0 - terminated) * next_v
            else:
                y = max_bellman_target(r_delta, next_v, self.gamma, terminated)

        emb = self._embedding(self.critic, grad_probes=True)
        q1, q2 = self.critic(obs, action, emb)
        loss = _check_loss("exploration critic", F.mse_loss(q1, y) + F.mse_loss(q2, y))
        self.critic_opt.zero_grad()
        loss.backward()
        self.critic_opt.step()
        return loss.item(), r_delta.mean().item()

    def actor_update(self, batch, gen) -> float:
        obs = batch["obs"]
        emb = self._embedding(self.critic, grad_probes=False)
        if emb is not None:
            emb = emb.detach()
        if self.is_sac:
            action, logp = self.actor.sample(obs, gen)
            q1, q2 = self.critic(obs, action, emb)
            q = torch.min(q1, q2)
            loss = _check_loss("exploration actor",
                               (self.alpha.detach() * logp - q).mean())
        else:
            action = self.actor(obs)
            q1, _ = self.critic(obs, action, emb)
            loss = _check_loss("exploration actor", -q1.mean())
        self.actor_opt.zero_grad()
        loss.backward()
        self.actor_opt.step()

        if self.is_sac:
            alpha_loss = -(self.log_alpha
                           * (logp.detach() + self.target_entropy)).mean()
            self.alpha_opt.zero_grad()
            alpha_loss.backward()
            self.alpha_opt.step()
        return loss.item()

    def update(self, batch, step, gen) -> dict:
        critic_loss, r_delta_mean = self.critic_update(batch, gen)
        if self.is_sac:
            self._last_actor_loss = self.actor_update(batch, gen)
            soft_target_update(self.critic, self.target_critic, self.tau)
        elif step % self.base.actor_update_freq == 0:
            self._last_actor_loss = self.actor_update(batch, gen)
            soft_target_update(self.critic, self.target_critic, self.tau)
            soft_target_update(self.actor, self.target_actor, self.tau)
        return {
            "explore_critic_loss": critic_loss,
            "explore_actor_loss": self._last_actor_loss,
            "exploration_reward_mean": r_delta_mean,
        }
