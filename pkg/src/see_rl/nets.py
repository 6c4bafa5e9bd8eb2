"""Function approximators: MLPs, policies, critics, fingerprint conditioning.

All modules are plain ``torch.nn`` networks. Stochastic sampling always goes
through an explicit ``torch.Generator`` so that separate RNG streams stay
independent.
"""

from __future__ import annotations

import json
import math

import numpy as np
import torch
import torch.nn as nn

LOG_STD_MIN = -20.0
LOG_STD_MAX = 2.0


def mlp(input_dim: int, hidden_dims, output_dim: int) -> nn.Sequential:
    """ReLU MLP with a linear output layer."""
    if not hidden_dims:
        raise ValueError("hidden_dims must be nonempty")
    layers = []
    last = input_dim
    for h in hidden_dims:
        layers += [nn.Linear(last, h), nn.ReLU()]
        last = h
    layers.append(nn.Linear(last, output_dim))
    return nn.Sequential(*layers)


def init_weights(module: nn.Module, gen: torch.Generator, final_scale: float = 1e-2):
    """Fan-in uniform init; the final linear layer is scaled down."""
    linears = [m for m in module.modules() if isinstance(m, nn.Linear)]
    for i, lin in enumerate(linears):
        bound = 1.0 / math.sqrt(lin.in_features)
        with torch.no_grad():
            lin.weight.uniform_(-bound, bound, generator=gen)
            lin.bias.uniform_(-bound, bound, generator=gen)
            if i == len(linears) - 1:
                lin.weight.mul_(final_scale)
                lin.bias.mul_(final_scale)


class QCritic(nn.Module):
    """Q(s, a) head on the concatenated state-action vector."""

    def __init__(self, obs_dim: int, action_dim: int, hidden_dims=(400, 300)):
        super().__init__()
        self.net = mlp(obs_dim + action_dim, list(hidden_dims), 1)

    def forward(self, obs, action):
        return self.net(torch.cat([obs, action], dim=-1)).squeeze(-1)


class TwinCritic(nn.Module):
    """Two independent critics over the same inputs."""

    def __init__(self, obs_dim: int, action_dim: int, hidden_dims=(400, 300)):
        super().__init__()
        self.q1 = QCritic(obs_dim, action_dim, hidden_dims)
        self.q2 = QCritic(obs_dim, action_dim, hidden_dims)

    def forward(self, obs, action):
        return self.q1(obs, action), self.q2(obs, action)


class FingerprintProbes(nn.Module):
    """Trainable probe state-action pairs used to embed a critic.

    The embedding of a critic is the vector of its values at the probes;
    probes are parameters of the conditioned (exploration) network.
    """

    def __init__(self, obs_dim: int, action_dim: int, n_probes: int = 16):
        super().__init__()
        if n_probes < 1:
            raise ValueError("need at least one probe")
        self.n_probes = n_probes
        self.probe_states = nn.Parameter(torch.zeros(n_probes, obs_dim))
        self.probe_actions = nn.Parameter(torch.zeros(n_probes, action_dim))

    def init_uniform(self, obs_low, obs_high, action_low, action_high, gen: torch.Generator):
        def fill(param, low, high):
            low = torch.as_tensor(low, dtype=param.dtype)
            high = torch.as_tensor(high, dtype=param.dtype)
            u = torch.rand(param.shape, generator=gen, dtype=param.dtype)
            with torch.no_grad():
                param.copy_(low + u * (high - low))
        fill(self.probe_states, obs_low, obs_high)
        fill(self.probe_actions, action_low, action_high)

    def embed(self, q_eval) -> torch.Tensor:
        """Evaluate ``q_eval(states, actions)`` at the probes.

        ``q_eval`` must be the same value computation the base algorithm uses
        for its actor update. Gradients flow into the probes only.
        """
        return q_eval(self.probe_states, self.probe_actions)


class ConditionedCritic(nn.Module):
    """Critic over (s, a) plus an embedding of another critic's parameters.

    With ``conditioned=False`` the embedding input is dropped entirely
    (the "w/o conditioning" ablation).
    """

    def __init__(self, obs_dim: int, action_dim: int, n_probes: int = 16,
                 hidden_dims=(400, 300), conditioned: bool = True):
        super().__init__()
        self.conditioned = conditioned
        embed_dim = n_probes if conditioned else 0
        self.net = mlp(obs_dim + action_dim + embed_dim, list(hidden_dims), 1)

    def forward(self, obs, action, embedding=None):
        parts = [obs, action]
        if self.conditioned:
            if embedding is None:
                raise ValueError("conditioned critic requires an embedding")
            if embedding.dim() == 1:
                embedding = embedding.unsqueeze(0).expand(obs.shape[0], -1)
            parts.append(embedding)
        return self.net(torch.cat(parts, dim=-1)).squeeze(-1)


class ConditionedTwinCritic(nn.Module):
    """Twin conditioned critics sharing one set of fingerprint probes."""

    def __init__(self, obs_dim: int, action_dim: int, n_probes: int = 16,
                 hidden_dims=(400, 300), conditioned: bool = True):
        super().__init__()
        self.conditioned = conditioned
        self.probes = FingerprintProbes(obs_dim, action_dim, n_probes)
        self.q1 = ConditionedCritic(obs_dim, action_dim, n_probes, hidden_dims, conditioned)
        self.q2 = ConditionedCritic(obs_dim, action_dim, n_probes, hidden_dims, conditioned)

    def embedding(self, q_eval):
        if not self.conditioned:
            return None
        return self.probes.embed(q_eval)

    def forward(self, obs, action, embedding=None):
        return self.q1(obs, action, embedding), self.q2(obs, action, embedding)


def _atanh_correction(x):
    # log(1 - tanh(x)^2), numerically stable form
    return 2.0 * (math.log(2.0) - x - nn.functional.softplus(-2.0 * x))


class SquashedGaussianPolicy(nn.Module):
    """Tanh-squashed Gaussian policy scaled to the action bounds."""

    def __init__(self, obs_dim: int, action_dim: int, action_low, action_high,
                 hidden_dims=(400, 300)):
        super().__init__()
        self.net = mlp(obs_dim, list(hidden_dims), 2 * action_dim)
        self.action_dim = action_dim
        low = torch.as_tensor(np.asarray(action_low, dtype=np.float64))
        high = torch.as_tensor(np.asarray(action_high, dtype=np.float64))
        self.register_buffer("scale", (high - low) / 2.0)
        self.register_buffer("shift", (high + low) / 2.0)

    def forward(self, obs):
        out = self.net(obs)
        mean, log_std = out.chunk(2, dim=-1)
        log_std = torch.clamp(log_std, LOG_STD_MIN, LOG_STD_MAX)
        return mean, log_std

    def _squash(self, x):
        return torch.tanh(x) * self.scale + self.shift

    def sample(self, obs, gen: torch.Generator):
        """Reparameterized draw; returns (action, log_prob)."""
        mean, log_std = self(obs)
        std = log_std.exp()
        eps = torch.randn(mean.shape, generator=gen, dtype=mean.dtype)
        x = mean + std * eps
        action = self._squash(x)
        log_prob = (-0.5 * eps.pow(2) - log_std - 0.5 * math.log(2.0 * math.pi)
                    - _atanh_correction(x) - torch.log(self.scale))
        return action, log_prob.sum(dim=-1)

    def log_prob(self, obs, x_pre_squash):
        """Log-density of the squashed action with pre-squash value ``x``."""
        mean, log_std = self(obs)
        std = log_std.exp()
        z = (x_pre_squash - mean) / std
        log_prob = (-0.5 * z.pow(2) - log_std - 0.5 * math.log(2.0 * math.pi)
                    - _atanh_correction(x_pre_squash) - torch.log(self.scale))
        return log_prob.sum(dim=-1)

    def mean_action(self, obs):
        mean, _ = self(obs)
        return self._squash(mean)


class DeterministicPolicy(nn.Module):
    """Tanh-bounded deterministic policy (TD3 actor)."""

    def __init__(self, obs_dim: int, action_dim: int, action_low, action_high,
                 hidden_dims=(400, 300)):
        super().__init__()
        self.net = mlp(obs_dim, list(hidden_dims), action_dim)
        low = torch.as_tensor(np.asarray(action_low, dtype=np.float64))
        high = torch.as_tensor(np.asarray(action_high, dtype=np.float64))
        self.register_buffer("scale", (high - low) / 2.0)
        self.register_buffer("shift", (high + low) / 2.0)

    def forward(self, obs):
        return torch.tanh(self.net(obs)) * self.scale + self.shift


def save_checkpoint(path, named_modules: dict, config: dict, rng_state: dict):
    """Write parameters as shape-annotated flat arrays plus a config echo."""
    payload = {}
    for mod_name, module in named_modules.items():
        if isinstance(module, torch.Tensor):
            payload[f"param::{mod_name}::value"] = module.detach().cpu().numpy()
            continue
        for p_name, tensor in module.state_dict().items():
            payload[f"param::{mod_name}::{p_name}"] = tensor.detach().cpu().numpy()
    payload["__config__"] = np.frombuffer(
        json.dumps(config, sort_keys=True).encode(), dtype=np.uint8)
    payload["__rng__"] = np.frombuffer(
        json.dumps(rng_state, sort_keys=True).encode(), dtype=np.uint8)
    np.savez(path, **payload)


def load_checkpoint(path):
    """Return (params: {module: state_dict arrays}, config, rng_state)."""
    data = np.load(path)
    params: dict = {}
    for key in data.files:
        if key.startswith("param::"):
            _, mod_name, p_name = key.split("::", 2)
            params.setdefault(mod_name, {})[p_name] = data[key]
    config = json.loads(data["__config__"].tobytes().decode())
    rng_state = json.loads(data["__rng__"].tobytes().decode())
    return params, config, rng_state


def restore_module(module: nn.Module, arrays: dict):
    state = {k: torch.as_tensor(v) for k, v in arrays.items()}
    module.load_state_dict(state)
