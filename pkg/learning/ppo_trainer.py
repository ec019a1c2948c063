#!/usr/bin/env python3
"""
PPO Trainer - Clipped-surrogate policy optimization with GAE over per-label rollout streams
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from controllers.policy_controller import PolicyController
from errors import ConfigError, DataError, TrainingDivergenceError
from learning.agent_policy import Policy
from learning.checkpoint import model_fingerprint, save_checkpoint
from learning.curriculum import advance_curriculum
from learning.neural_core import AdamOptimizer, gaussian_log_prob_grad
from learning.rollout_buffer import EpisodeBuffer
from processing.state_encoder import EncodedObservation
from results_exporter import TrainingLogWriter
from trajectory_scenes import DatasetSplit, Scene
from workers.evaluation_worker import EvaluationWorker
from workers.rollout_worker import EpisodeSettings, RolloutPool, choose_labeled

if TYPE_CHECKING:
    from config.run_config import RunConfig

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PpoConfig:
    gamma: float = 0.99
    lam: float = 0.95
    clip: float = 0.2
    entropy_coef: float = 5e-3
    value_coef: float = 0.5
    epochs: int = 3
    buffer_size: int = 8192
    batch_size: int = 256
    lr: float = 3e-4
    total_steps: int = 300_000
    episode_len: int = 150
    max_grad_norm: float = 0.5
    abort_penalty: float = 0.5

    def __post_init__(self):
        if not 0 < self.gamma <= 1:
            raise ConfigError(f"gamma must be in (0, 1] (got {self.gamma})")
        if not 0 <= self.lam <= 1:
            raise ConfigError(f"lambda must be in [0, 1] (got {self.lam})")
        if self.clip <= 0:
            raise ConfigError(f"clip epsilon must be positive (got {self.clip})")
        if min(self.epochs, self.buffer_size, self.batch_size, self.total_steps, self.episode_len) <= 0:
            raise ConfigError(f"epochs, buffer_size, batch_size, total_steps and episode_len must be positive: {self}")
        if min(self.entropy_coef, self.value_coef, self.lr, self.max_grad_norm, self.abort_penalty) < 0:
            raise ConfigError(f"PPO coefficients must be non-negative: {self}")


@dataclass(frozen=True)
class LossReport:
    actor_loss: float
    critic_loss: float
    entropy: float
    approx_kl: float
    clip_fraction: float
    grad_norm: float
    lr: float


@dataclass
class TrainResult:
    global_step: int
    updates: int
    final_checkpoint: Path
    checkpoints: List[Path] = field(default_factory=list)
    log_rows: List[dict] = field(default_factory=list)


def gae_stream(rewards: Sequence[float], values: Sequence[float], bootstrap_value: float,
               gamma: float, lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Advantages and returns of one uninterrupted stream.

    bootstrap_value is V(s_T) after the last transition (0 when the stream ended terminally).
    """
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    n = len(rewards)
    advantages = np.zeros(n)
    next_value = float(bootstrap_value)
    running = 0.0
    for t in range(n - 1, -1, -1):
        delta = rewards[t] + gamma * next_value - values[t]
        running = delta + gamma * lam * running
        advantages[t] = running
        next_value = values[t]
    return advantages, advantages + values


def compute_gae(buffer: EpisodeBuffer, gamma: float, lam: float) -> Tuple[np.ndarray, np.ndarray]:
    """Raw (unnormalized) advantages and returns for every transition, in buffer order"""
    parts_a = []
    parts_r = []
    for stream in buffer.streams:
        if not stream.transitions:
            continue
        adv, ret = gae_stream([t.reward for t in stream.transitions], [t.value for t in stream.transitions],
                              stream.bootstrap_value, gamma, lam)
        parts_a.append(adv)
        parts_r.append(ret)
    buffer.advantages = np.concatenate(parts_a) if parts_a else np.zeros(0)
    buffer.returns = np.concatenate(parts_r) if parts_r else np.zeros(0)
    return buffer.advantages, buffer.returns


def normalize_advantages(advantages: np.ndarray) -> np.ndarray:
    if len(advantages) < 2:
        return advantages - advantages.mean() if len(advantages) else advantages
    return (advantages - advantages.mean()) / (advantages.std() + 1e-8)


def collect_rollouts(scenes: Sequence[Scene], policy: Policy, pool: RolloutPool, n_env_steps: int,
                     num_agent: int = 2) -> EpisodeBuffer:
    """Per-worker budget of n_env_steps world steps; scenes are fixed when the pool is built"""
    if not scenes:
        raise DataError("no scenes to collect rollouts from")
    buffer, _ = pool.collect(n_env_steps, num_agent)
    return buffer


@dataclass(frozen=True)
class MinibatchStats:
    actor_loss: float
    critic_loss: float
    entropy: float
    approx_kl: float
    clip_fraction: float


def ppo_minibatch_gradients(policy: Policy, observations: Sequence[EncodedObservation], actions: np.ndarray,
                            old_log_probs: np.ndarray, advantages: np.ndarray, returns: np.ndarray,
                            config: PpoConfig) -> MinibatchStats:
    """Zero the gradients, then accumulate d(actor loss + value_coef * critic loss) for one minibatch"""
    batch = len(observations)
    ev = policy.evaluate_actions(observations, actions)
    ratio = np.exp(ev.log_probs - old_log_probs)
    surr1 = ratio * advantages
    surr2 = np.clip(ratio, 1.0 - config.clip, 1.0 + config.clip) * advantages
    entropy = float(np.mean(ev.entropies))
    actor_loss = -float(np.mean(np.minimum(surr1, surr2))) - config.entropy_coef * entropy
    critic_loss = float(np.mean((ev.values - returns) ** 2))
    if not (math.isfinite(actor_loss) and math.isfinite(critic_loss)):
        raise TrainingDivergenceError(f"loss became non-finite (actor {actor_loss}, critic {critic_loss})")

    # The clipped branch contributes no gradient through the ratio
    unclipped = surr1 <= surr2
    d_log_prob = np.where(unclipped, -advantages * ratio / batch, 0.0)
    d_mu, d_ls = gaussian_log_prob_grad(ev.mean, ev.log_std, actions)
    d_mean = d_log_prob[:, None] * d_mu
    d_log_std = d_log_prob[:, None] * d_ls - config.entropy_coef / batch
    d_value = config.value_coef * 2.0 * (ev.values - returns) / batch

    policy.store.zero_grad()
    policy.backward(ev, d_mean, d_log_std, d_value)

    log_ratio = ev.log_probs - old_log_probs
    approx_kl = float(np.mean((ratio - 1.0) - log_ratio))
    clip_fraction = float(np.mean(np.abs(ratio - 1.0) > config.clip))
    return MinibatchStats(actor_loss, critic_loss, entropy, approx_kl, clip_fraction)


def ppo_update(policy: Policy, optimizer: AdamOptimizer, buffer: EpisodeBuffer, config: PpoConfig,
               rng: np.random.Generator, global_step: int = 0) -> LossReport:
    """`epochs` passes over shuffled minibatches; losses are averaged over minibatches"""
    if len(buffer) == 0:
        raise DataError("cannot update from an empty buffer")
    if len(buffer.advantages) != len(buffer):
        compute_gae(buffer, config.gamma, config.lam)
    observations, actions, old_log_probs = buffer.flatten()
    advantages = normalize_advantages(buffer.advantages)
    returns = buffer.returns
    n = len(observations)

    stats: List[MinibatchStats] = []
    norms: List[float] = []
    lr = optimizer.lr_at(global_step)
    for _ in range(config.epochs):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            stats.append(ppo_minibatch_gradients(
                policy, [observations[k] for k in idx], actions[idx], old_log_probs[idx],
                advantages[idx], returns[idx], config,
            ))
            norms.append(policy.store.clip_grad_norm(config.max_grad_norm))
            lr = optimizer.step(global_step)

    report = LossReport(
        actor_loss=float(np.mean([s.actor_loss for s in stats])),
        critic_loss=float(np.mean([s.critic_loss for s in stats])),
        entropy=float(np.mean([s.entropy for s in stats])),
        approx_kl=float(np.mean([s.approx_kl for s in stats])),
        clip_fraction=float(np.mean([s.clip_fraction for s in stats])),
        grad_norm=float(np.mean(norms)),
        lr=lr,
    )
    logger.info(
        f"Update at step {global_step}: actor {report.actor_loss:.4f}, critic {report.critic_loss:.4f}, "
        f"entropy {report.entropy:.3f}, kl {report.approx_kl:.4f}, clipped {report.clip_fraction:.2%}"
    )
    return report


def _snapshot(policy: Policy) -> Policy:
    copy = Policy(policy.config, policy.store.dtype)
    copy.store.load_state_dict(policy.store.state_dict())
    return copy


def evaluate_policy(policy: Policy, scenes: Sequence[Scene], run: "RunConfig", num_agent: int) -> float:
    """Mean per-label return of the deterministic policy on held-out scenes"""
    if not scenes:
        return float("nan")
    controller = PolicyController(_snapshot(policy), run.encoder, deterministic=True)
    order: Dict[str, int] = {s.scene_id: k for k, s in enumerate(sorted(scenes, key=lambda s: s.scene_id))}

    def labeled(scene: Scene):
        return choose_labeled(scene, num_agent, np.random.default_rng([run.run.seed, order[scene.scene_id]]))

    worker = EvaluationWorker(controller, run.sim, run.camera, run.reward, run.run.workers, run.run.single_thread)
    results = worker.run(scenes, labeled)
    returns = [r for res in results for r in res.returns.values()]
    return float(np.mean(returns)) if returns else float("nan")


def train(run: "RunConfig", split: DatasetSplit, out_dir: Path,
          progress: Optional[Callable[[int, str], None]] = None) -> TrainResult:
    """
    Collect, estimate advantages, update, repeat until total_steps agent transitions.

    Writes training_log.csv, periodic checkpoints, one checkpoint at each curriculum stage
    boundary and policy_final.ckpt into out_dir.
    """
    ppo: PpoConfig = run.ppo
    schedule = run.curriculum
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if not split.train:
        raise DataError("the training split is empty")

    fingerprint = model_fingerprint(run.settings)
    policy = Policy(run.network)
    optimizer = AdamOptimizer(policy.store, ppo.lr, ppo.total_steps)
    settings = EpisodeSettings(run.sim, run.camera, run.reward, run.encoder, ppo.episode_len, ppo.abort_penalty)
    pool = RolloutPool(split.train, policy, settings, run.run.workers, run.run.seed, run.run.single_thread)
    rng = np.random.default_rng([run.run.seed, 1])
    eval_scenes = sorted(split.test, key=lambda s: s.scene_id)
    if run.run.eval_scenes > 0:
        eval_scenes = eval_scenes[:run.run.eval_scenes]

    result = TrainResult(0, 0, out_dir / "policy_final.ckpt")
    log = TrainingLogWriter(out_dir / "training_log.csv")
    stage = schedule.stage_of(0)
    next_checkpoint = run.run.checkpoint_interval
    global_step = 0
    logger.info(f"Training on {len(split.train)} scenes for {ppo.total_steps} steps "
                f"({policy.store.count()} parameters, {pool.n_workers} workers)")

    while global_step < ppo.total_steps:
        num_agent = advance_curriculum(schedule, global_step)
        new_stage = schedule.stage_of(global_step)
        if new_stage != stage:
            path = out_dir / f"stage_{new_stage}_{global_step:09d}.ckpt"
            save_checkpoint(policy, str(path), fingerprint)
            result.checkpoints.append(path)
            logger.info(f"Curriculum stage {new_stage}: {num_agent} labeled tracks per episode")
            stage = new_stage

        env_steps = max(1, math.ceil(ppo.buffer_size / (num_agent * pool.n_workers)))
        buffer, train_returns = pool.collect(env_steps, num_agent)
        if len(buffer) == 0:
            raise DataError("rollouts produced no transitions")
        compute_gae(buffer, ppo.gamma, ppo.lam)
        report = ppo_update(policy, optimizer, buffer, ppo, rng, global_step)
        global_step += len(buffer)
        result.updates += 1

        test_reward = float("nan")
        if result.updates % run.run.eval_interval == 0 or global_step >= ppo.total_steps:
            test_reward = evaluate_policy(policy, eval_scenes, run, num_agent)
        row = {
            "global_step": global_step,
            "train_reward": float(np.mean(train_returns)) if train_returns else float("nan"),
            "test_reward": test_reward,
            "actor_loss": report.actor_loss,
            "critic_loss": report.critic_loss,
            "entropy": report.entropy,
            "num_agent": num_agent,
            "lr": report.lr,
        }
        log.append(row)
        result.log_rows.append(row)

        if next_checkpoint > 0 and global_step >= next_checkpoint:
            path = out_dir / f"checkpoint_{global_step:09d}.ckpt"
            save_checkpoint(policy, str(path), fingerprint)
            result.checkpoints.append(path)
            while next_checkpoint <= global_step:
                next_checkpoint += run.run.checkpoint_interval
        if progress:
            progress(min(100, int(100 * global_step / ppo.total_steps)), f"{global_step}/{ppo.total_steps} steps")

    save_checkpoint(policy, str(result.final_checkpoint), fingerprint)
    result.global_step = global_step
    logger.info(f"Training finished after {result.updates} updates ({global_step} steps)")
    return result
