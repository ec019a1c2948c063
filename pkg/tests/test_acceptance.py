"""
End-to-end checks at desk scale; the slow ones run with ``pytest -m slow``
"""
from pathlib import Path

import numpy as np
import pytest

from config.run_config import load_run_config
from controllers.baselines import ForceController, NoneController
from controllers.policy_controller import PolicyController
from label_view_manager import synthesize_scenes
from learning.agent_policy import NetworkConfig, Policy
from learning.checkpoint import load_checkpoint, model_fingerprint
from learning.neural_core import gaussian_head, gaussian_log_prob, gaussian_log_prob_grad, gradient_check, log_std_pass_mask
from learning.ppo_trainer import gae_stream, train
from processing.reward_metrics import finalize
from synthetic_generator import SynthParams, synth_generate
from tests.test_neural_core import random_inputs, weighted_sum
from trajectory_scenes import train_test_split
from workers.evaluation_worker import evaluate_scene, merge_accumulators

DESK_CONFIG = Path(__file__).resolve().parent.parent / "config" / "desk.toml"


def test_returns_match_direct_sums():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        n = int(rng.integers(1, 11))
        rewards, values = rng.normal(size=n), rng.normal(size=n)
        bootstrap = float(rng.normal()) if rng.random() < 0.5 else 0.0
        gamma, lam = float(rng.uniform(0.5, 1.0)), float(rng.uniform(0.0, 1.0))
        adv, ret = gae_stream(rewards, values, bootstrap, gamma, lam)
        next_values = np.append(values[1:], bootstrap)
        deltas = rewards + gamma * next_values - values
        direct = [sum((gamma * lam) ** (k - t) * deltas[k] for k in range(t, n)) for t in range(n)]
        np.testing.assert_allclose(adv, direct, atol=1e-6)
        np.testing.assert_allclose(ret, adv + values, atol=1e-12)
        _, mc = gae_stream(rewards, values, bootstrap, gamma, 1.0)
        np.testing.assert_allclose(mc[:-1], rewards[:-1] + gamma * mc[1:], atol=1e-6)


@pytest.mark.parametrize("kind, params, seeds", [
    ("crossing_pair", SynthParams(), range(50)),
    ("random_walk", SynthParams(count=5, speed_range=(0.5, 1.5)), range(5)),
])
def test_fixed_labels_never_move_relative_to_targets(sim, camera, kind, params, seeds):
    for seed in seeds:
        scene = synth_generate(kind, params, seed)
        metrics = finalize(evaluate_scene(scene, NoneController(), sim, camera).accumulator)
        assert metrics.dist == 0.0


class PolicyObjective:
    """Actor log-probability of fixed actions next to the critic value, as one network"""

    def __init__(self, policy: Policy, actions: np.ndarray):
        self.policy = policy
        self.store = policy.store
        self.actions = actions

    def forward(self, self_x, neighbors, mask):
        actor_out, actor_cache = self.policy.actor.forward(self_x, neighbors, mask)
        critic_out, critic_cache = self.policy.critic.forward(self_x, neighbors, mask)
        mean, log_std = gaussian_head(actor_out)
        out = np.column_stack([gaussian_log_prob(mean, log_std, self.actions), critic_out[:, 0]])
        return out, (actor_out, actor_cache, critic_cache, mean, log_std)

    def backward(self, cache, d_out):
        actor_out, actor_cache, critic_cache, mean, log_std = cache
        d_mu, d_ls = gaussian_log_prob_grad(mean, log_std, self.actions)
        d_actor = np.concatenate([d_out[:, :1] * d_mu, d_out[:, :1] * d_ls * log_std_pass_mask(actor_out)], axis=-1)
        self.policy.actor.backward(actor_cache, d_actor)
        self.policy.critic.backward(critic_cache, d_out[:, 1:])


@pytest.mark.slow
def test_end_to_end_gradients():
    for seed in range(100):
        rng = np.random.default_rng(seed)
        policy = Policy(NetworkConfig(hidden=6, score_hidden=4, activation="tanh", init_seed=seed), np.float64)
        for name, p in policy.store.params.items():
            p[...] = rng.normal(scale=0.5, size=p.shape)
        objective = PolicyObjective(policy, rng.normal(size=(3, 2)))
        error = gradient_check(objective, list(random_inputs(rng)), weighted_sum(rng.normal(size=(3, 2))), h=1e-3)
        assert error < 1e-5, f"seed {seed}"


@pytest.mark.slow
def test_force_halves_occlusions_on_crossings(sim, camera):
    scenes = [synth_generate("crossing_pair", SynthParams(), seed) for seed in range(50)]
    none = merge_accumulators([evaluate_scene(s, NoneController(), sim, camera) for s in scenes])
    force = merge_accumulators([evaluate_scene(s, ForceController(), sim, camera) for s in scenes])
    none_metrics, force_metrics = finalize(none), finalize(force)
    assert none_metrics.occ > 0
    assert force_metrics.occ <= 0.5 * none_metrics.occ
    assert force_metrics.dist > 0


def desk_training_passes(seed: int, out_dir: Path) -> bool:
    _, run = load_run_config(DESK_CONFIG, {"run": {"seed": seed}})
    split = train_test_split(synthesize_scenes(run), run.data.train_ratio, seed)
    result = train(run, split, out_dir)

    rewards = [row["test_reward"] for row in result.log_rows if np.isfinite(row["test_reward"])]
    tenth = max(1, len(rewards) // 10)
    early, late = float(np.mean(rewards[:tenth])), float(np.mean(rewards[-tenth:]))
    improved = late - early >= 0.5 * (0.201 * run.ppo.episode_len - early)

    policy = load_checkpoint(str(result.final_checkpoint), run.network, model_fingerprint(run.settings))
    held_out = [synth_generate("crossing_pair", run.data.synth, 10_000 + k) for k in range(20)]

    def metrics(controller):
        return finalize(merge_accumulators(
            [evaluate_scene(s, controller, run.sim, run.camera, run.reward) for s in held_out]
        ))

    rl = metrics(PolicyController(policy, run.encoder))
    none = metrics(NoneController())
    force = metrics(ForceController(run.force))
    return improved and rl.occ <= 0.7 * none.occ and rl.dist <= force.dist


@pytest.mark.slow
def test_desk_training_learns_to_avoid_occlusion(tmp_path):
    passed = [desk_training_passes(seed, tmp_path / f"seed{seed}") for seed in range(3)]
    assert sum(passed) >= 2
