import math

import numpy as np
import pytest
import torch

from see_rl.base import SAC, TD3
from see_rl.envs import make
from see_rl.oracle import mixing_distribution_exact
from see_rl.see import (AblationMode, SeeAgent, behavior_sample,
                        exploration_reward, max_bellman_target,
                        mixing_probabilities)

torch.set_default_dtype(torch.float64)


def _gen(seed):
    gen = torch.Generator()
    gen.manual_seed(seed)
    return gen


def _spec():
    return make("pendulum", "sparse").spec


def _sac_see(seed=0, ablation=AblationMode(), algo="sac"):
    spec = _spec()
    if algo == "sac":
        base = SAC(spec, hidden_dims=(8, 8), init_gen=_gen(seed))
    else:
        base = TD3(spec, hidden_dims=(8, 8), action_noise_std=0.0,
                   init_gen=_gen(seed))
    agent = SeeAgent(base, spec, hidden_dims=(8, 8), n_probes=4,
                     ablation=ablation, init_gen=_gen(seed + 1))
    return spec, base, agent


def _batch(spec, n=8, seed=0, terminated=False):
    rng = np.random.default_rng(seed)
    return {
        "obs": torch.as_tensor(rng.uniform(-1, 1, (n, spec.state_dim))),
        "action": torch.as_tensor(rng.uniform(-2, 2, (n, spec.action_dim))),
        "reward": torch.as_tensor(rng.uniform(-1, 1, n)),
        "next_obs": torch.as_tensor(rng.uniform(-1, 1, (n, spec.state_dim))),
        "terminated": torch.full((n,), float(terminated), dtype=torch.float64),
    }


class TestExplorationReward:
    def _reward_for(self, r, q_next, q_now, gamma=0.99, terminated=False):
        batch = {
            "obs": torch.zeros(1, 1), "action": torch.zeros(1, 1),
            "reward": torch.tensor([r], dtype=torch.float64),
            "next_obs": torch.ones(1, 1),
            "terminated": torch.tensor([float(terminated)], dtype=torch.float64),
        }

        def actor_value(obs, action):
            # constant critics keyed on which side of the transition we see
            out = torch.where(obs[:, 0] == 0.0, q_now, q_next)
            return out

        return exploration_reward(batch, actor_value, torch.zeros(1, 1), gamma)

    def test_direct_arithmetic(self):
        r = self._reward_for(1.0, 2.0, 2.5)
        assert r.item() == pytest.approx(0.48)

    def test_absolute_value_of_negative_residual(self):
        r = self._reward_for(0.0, 0.0, 1.0)
        assert r.item() == pytest.approx(1.0)

    def test_zero_at_fixed_point(self):
        # one-step deterministic MDP: r=1 then terminal; Q(s,a)=1 is exact
        r = self._reward_for(1.0, 123.0, 1.0, terminated=True)
        assert r.item() == pytest.approx(0.0)

    def test_always_non_negative(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            r = self._reward_for(rng.normal(), rng.normal(), rng.normal())
            assert r.item() >= 0.0


class TestMaxBellmanTarget:
    def _target(self, r, next_v, gamma=0.99, terminated=False):
        return max_bellman_target(
            torch.tensor([r], dtype=torch.float64),
            torch.tensor([next_v], dtype=torch.float64),
            gamma, torch.tensor([float(terminated)])).item()

    def test_bootstrap_dominates(self):
        assert self._target(0.48, 1.0) == pytest.approx(0.99)

    def test_reward_dominates(self):
        assert self._target(2.0, 1.0) == pytest.approx(2.0)

    def test_terminal_drops_bootstrap(self):
        assert self._target(0.48, 1.0, terminated=True) == pytest.approx(0.48)

    def test_monotonicity(self):
        rng = np.random.default_rng(1)
        for _ in range(100):
            r = abs(rng.normal())
            v = rng.normal()
            t = self._target(r, v)
            assert t >= 0.99 * v - 1e-12
            assert t >= r - 1e-12
            assert self._target(r + 0.1, v) >= t
            assert self._target(r, v + 0.1) >= t


class TestMixing:
    def test_symmetric_advantages(self):
        p_q, p_d = mixing_probabilities(0.0, 0.0)
        assert p_q == pytest.approx(0.5)
        assert p_d == pytest.approx(0.5)

    def test_closed_form_logistic(self):
        p_q, p_d = mixing_probabilities(1.0, 0.0, lam=0.5, tau_mix=1.0)
        expected = math.exp(0.5) / (math.exp(0.5) + 1.0)
        assert p_q == pytest.approx(expected)
        assert p_q + p_d == 1.0

    def test_monotone_limit(self):
        last = 0.0
        for adv in (0.0, 1.0, 10.0, 100.0, 1000.0):
            p_q, _ = mixing_probabilities(adv, 0.0)
            assert p_q >= last
            last = p_q
        assert last == pytest.approx(1.0, abs=1e-12)

    def test_matches_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            a_q, a_d = rng.normal(scale=3, size=2)
            lam = rng.uniform(0, 1)
            tau = rng.uniform(0.1, 5)
            got = mixing_probabilities(a_q, a_d, lam, tau)
            want = mixing_distribution_exact(a_q, a_d, lam, tau)
            assert got[0] == pytest.approx(want[0], abs=1e-12)

    def test_constant_shift_invariance(self):
        # adding a per-state constant to one critic cancels in the advantage
        q = {"a1": 2.0, "a2": 1.5}
        adv_before = q["a1"] - q["a2"]
        shifted = {k: v + 17.3 for k, v in q.items()}
        adv_after = shifted["a1"] - shifted["a2"]
        assert mixing_probabilities(adv_before, 0.3) == \
            mixing_probabilities(adv_after, 0.3)

    def test_empirical_frequency_3sigma(self):
        rng = np.random.default_rng(3)
        n = 20000
        hits = sum(behavior_sample(1.0, 0.0, 0.5, 1.0, rng).chosen == 0
                   for _ in range(n))
        p, _ = mixing_distribution_exact(1.0, 0.0)
        sigma = math.sqrt(p * (1 - p) / n)
        assert abs(hits / n - p) < 3 * sigma

    def test_invalid_parameters(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            behavior_sample(0.0, 0.0, 1.5, 1.0, rng)
        with pytest.raises(ValueError):
            behavior_sample(0.0, 0.0, 0.5, 0.0, rng)


class TestRelativeAdvantages:
    def test_identical_candidates_give_zero(self):
        spec, base, agent = _sac_see()
        obs = torch.zeros(1, spec.state_dim)
        a = torch.full((1, spec.action_dim), 0.3, dtype=torch.float64)
        adv_q, adv_d = agent.relative_advantages(obs, a, a.clone())
        assert adv_q == pytest.approx(0.0, abs=1e-12)
        assert adv_d == pytest.approx(0.0, abs=1e-12)

    def test_matches_direct_value_difference(self):
        spec, base, agent = _sac_see()
        obs = torch.zeros(1, spec.state_dim)
        a_q = torch.full((1, spec.action_dim), 0.5, dtype=torch.float64)
        a_d = torch.full((1, spec.action_dim), -0.5, dtype=torch.float64)
        adv_q, adv_d = agent.relative_advantages(obs, a_q, a_d)
        with torch.no_grad():
            expected_q = (base.actor_value(obs, a_q)
                          - base.actor_value(obs, a_d)).item()
        assert adv_q == pytest.approx(expected_q, abs=1e-12)


class TestExplorationUpdates:
    def test_critic_loss_matches_hand_target(self):
        spec, base, agent = _sac_see()
        batch = _batch(spec, n=1, terminated=True)
        # terminal: target is exactly r_delta
        next_a = agent._next_exploit_actions(batch["next_obs"], _gen(5))
        r_delta = exploration_reward(batch, base.actor_value, next_a, base.gamma)
        with torch.no_grad():
            emb = agent._embedding(agent.critic, grad_probes=False)
            q1, q2 = agent.critic(batch["obs"], batch["action"], emb)
            expected = ((q1 - r_delta) ** 2 + (q2 - r_delta) ** 2).item()
        loss, _ = agent.critic_update(batch, _gen(5))
        assert loss == pytest.approx(expected, rel=1e-9)

    def test_zero_loss_at_fixed_point(self):
        y = torch.tensor([1.0, 2.0], dtype=torch.float64)
        loss = torch.nn.functional.mse_loss(y, y)
        assert loss.item() == 0.0
        assert not y.requires_grad

    def test_flat_critic_gives_zero_actor_gradient(self):
        spec, base, agent = _sac_see()
        # zero the final layers so the exploration critic is constant in a
        for critic in (agent.critic.q1, agent.critic.q2):
            with torch.no_grad():
                critic.net[-1].weight.zero_()
                critic.net[-1].bias.zero_()
        obs = torch.zeros(4, spec.state_dim)
        emb = agent._embedding(agent.critic, grad_probes=False).detach()
        action = agent.actor.mean_action(obs)
        q1, _ = agent.critic(obs, action, emb)
        loss = -q1.mean()
        loss.backward()
        grads = [p.grad for p in agent.actor.parameters() if p.grad is not None]
        assert all(torch.all(g == 0) for g in grads)

    def test_actor_moves_toward_quadratic_peak(self):
        spec, base, agent = _sac_see(algo="td3")
        target = 1.2

        # 1-D quadratic exploration landscape peaked at a* = 1.2
        def fake_critic(obs, action, emb=None):
            q = -(action[:, 0] - target) ** 2
            return q, q

        agent.critic.forward = fake_critic
        agent.critic.conditioned = False
        obs = torch.zeros(16, spec.state_dim)
        batch = {"obs": obs}
        before = agent.actor(obs)[0, 0].item()
        for _ in range(200):
            agent.actor_update(batch, _gen(0))
        after = agent.actor(obs)[0, 0].item()
        assert abs(after - target) < abs(before - target)

    def test_sac_actor_with_zero_alpha_matches_td3_style_objective(self):
        spec, base, agent = _sac_see()
        with torch.no_grad():
            agent.log_alpha.fill_(-200.0)
        batch = _batch(spec)
        emb = agent._embedding(agent.critic, grad_probes=False).detach()
        action, logp = agent.actor.sample(batch["obs"], _gen(4))
        q1, q2 = agent.critic(batch["obs"], action, emb)
        expected = (-torch.min(q1, q2)).mean().item()
        loss = agent.actor_update(batch, _gen(4))
        assert loss == pytest.approx(expected, rel=1e-9)


class TestAblations:
    def test_no_conditioning_is_theta_invariant(self):
        spec, base, agent = _sac_see(ablation=AblationMode(no_conditioning=True))
        batch = _batch(spec, n=2)
        emb = agent._embedding(agent.critic, grad_probes=False)
        assert emb is None
        q_before = agent.explore_value(batch["obs"], batch["action"])
        # perturb the exploitation parameters heavily
        with torch.no_grad():
            for p in base.critic.parameters():
                p.add_(torch.ones_like(p))
        q_after = agent.explore_value(batch["obs"], batch["action"])
        assert torch.equal(q_before, q_after)

    def test_conditioned_critic_is_theta_sensitive(self):
        spec, base, agent = _sac_see()
        batch = _batch(spec, n=2)
        q_before = agent.explore_value(batch["obs"], batch["action"])
        with torch.no_grad():
            for p in base.critic.parameters():
                p.add_(torch.ones_like(p))
        q_after = agent.explore_value(batch["obs"], batch["action"])
        assert not torch.allclose(q_before, q_after)

    def test_no_max_update_uses_additive_target(self):
        spec, base, agent = _sac_see(ablation=AblationMode(no_max_update=True))
        batch = _batch(spec, n=4)
        # replay the update's RNG consumption order with an equally-seeded gen
        gen = _gen(1234)
        next_a = agent._next_exploit_actions(batch["next_obs"], gen)
        r_delta = exploration_reward(batch, base.actor_value, next_a, base.gamma)
        with torch.no_grad():
            next_a_d, next_logp = agent.actor.sample(batch["next_obs"], gen)
            emb_t = agent._embedding(agent.target_critic, grad_probes=False)
            tq1, tq2 = agent.target_critic(batch["next_obs"], next_a_d, emb_t)
            next_v = torch.min(tq1, tq2)
            additive = r_delta + agent.gamma * (1 - batch["terminated"]) * next_v
            emb = agent._embedding(agent.critic, grad_probes=False)
            q1, q2 = agent.critic(batch["obs"], batch["action"], emb)
            expected = (torch.nn.functional.mse_loss(q1, additive)
                        + torch.nn.functional.mse_loss(q2, additive)).item()
        loss, _ = agent.critic_update(batch, _gen(1234))
        assert loss == pytest.approx(expected, rel=1e-9)

    def test_no_mixing_alternates_deterministically(self):
        spec, base, agent = _sac_see(ablation=AblationMode(no_mixing=True))
        obs = torch.zeros(1, spec.state_dim)
        rng = np.random.default_rng(0)
        chosen = [agent.behavior_action(obs, _gen(i), rng).chosen
                  for i in range(6)]
        assert chosen == [0, 1, 0, 1, 0, 1]

    def test_all_flags_off_is_full_method(self):
        mode = AblationMode()
        assert not (mode.no_conditioning or mode.no_max_update or mode.no_mixing)


class TestExploitationPurity:
    @pytest.mark.parametrize("algo", ["sac", "td3"])
    def test_base_losses_bitwise_identical_with_and_without_see(self, algo):
        spec = _spec()
        batch = _batch(spec, n=16, seed=9)

        losses = []
        for with_see in (True, False):
            if algo == "sac":
                base = SAC(spec, hidden_dims=(8, 8), init_gen=_gen(0))
            else:
                base = TD3(spec, hidden_dims=(8, 8), action_noise_std=0.0,
                           init_gen=_gen(0))
            if with_see:
                agent = SeeAgent(base, spec, hidden_dims=(8, 8), n_probes=4,
                                 init_gen=_gen(1))
                # exploration updates run first; they must not leak into the
                # exploitation update below
                agent.update(_batch(spec, n=16, seed=10), 2, _gen(2))
            losses.append(base.update(batch, 2, _gen(3)))
        assert losses[0] == losses[1]


class TestRolloutStep:
    def test_behavior_action_deterministic_given_seeds(self):
        results = []
        for _ in range(2):
            spec, base, agent = _sac_see()
            obs = torch.zeros(1, spec.state_dim)
            rng = np.random.default_rng(5)
            d = agent.behavior_action(obs, _gen(11), rng)
            results.append(d)
        a, b = results
        np.testing.assert_array_equal(a.action_exploit, b.action_exploit)
        np.testing.assert_array_equal(a.action_explore, b.action_explore)
        assert a.chosen == b.chosen
        assert a.p_exploit == b.p_exploit

    def test_probabilities_sum_to_one(self):
        spec, base, agent = _sac_see()
        obs = torch.zeros(1, spec.state_dim)
        d = agent.behavior_action(obs, _gen(0), np.random.default_rng(0))
        assert d.p_exploit + d.p_explore == 1.0
        assert d.chosen in (0, 1)
