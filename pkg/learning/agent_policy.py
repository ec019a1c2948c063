#!/usr/bin/env python3
"""
Agent Policy - Actor and critic networks over encoded observations, plus the value heatmap
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np

from errors import ConfigError, PolicyCorruptionError, ShapeMismatchError
from learning.neural_core import (
    AttentionNetwork,
    ParamStore,
    gaussian_entropy,
    gaussian_head,
    gaussian_log_prob,
    gaussian_sample,
    log_std_pass_mask,
)
from processing.sim_world import Action, WorldState, action_bound, lookahead, with_label_offset
from processing.state_encoder import (
    NEIGHBOR_DIM,
    NEIGHBOR_MIRROR_ODD,
    SELF_DIM,
    SELF_MIRROR_ODD,
    EncodedObservation,
    EncoderConfig,
    encode_observation,
    stack_observations,
)

logger = logging.getLogger(__name__)

ACTION_DIM = 2
HEATMAP_GRID = 30


@dataclass(frozen=True)
class NetworkConfig:
    hidden: int = 128
    score_hidden: int = 64
    activation: str = "relu"
    init_seed: int = 0

    def __post_init__(self):
        if self.hidden <= 0 or self.score_hidden <= 0:
            raise ConfigError(f"network widths must be positive: {self}")


@dataclass(frozen=True, eq=False)
class PolicyDecision:
    action: Action
    log_prob: float
    value: float
    mean: np.ndarray
    std: np.ndarray


@dataclass(eq=False)
class ActionEvaluation:
    """Differentiable quantities for a batch, plus what backward() needs"""
    log_probs: np.ndarray   # (B,)
    values: np.ndarray      # (B,)
    entropies: np.ndarray   # (B,)
    mean: np.ndarray        # (B, 2)
    log_std: np.ndarray     # (B, 2)
    actor_out: np.ndarray
    actor_cache: tuple
    critic_cache: tuple


class Policy:
    """Actor (diagonal Gaussian over 2-D actions) and critic sharing one parameter store"""

    def __init__(self, config: Optional[NetworkConfig] = None, dtype=np.float32):
        self.config = config or NetworkConfig()
        self.store = ParamStore(dtype)
        rng = np.random.default_rng(self.config.init_seed)
        self.actor = AttentionNetwork(
            self.store, "actor", 2 * ACTION_DIM, SELF_DIM, NEIGHBOR_DIM,
            self.config.hidden, self.config.score_hidden, self.config.activation, rng, output_scale=0.01,
        )
        self.critic = AttentionNetwork(
            self.store, "critic", 1, SELF_DIM, NEIGHBOR_DIM,
            self.config.hidden, self.config.score_hidden, self.config.activation, rng, zero_output=True,
        )

    def _forward(self, observations: Sequence[EncodedObservation]):
        self_x, neighbors, mask = stack_observations(observations, self.store.dtype)
        actor_out, actor_cache = self.actor.forward(self_x, neighbors, mask)
        critic_out, critic_cache = self.critic.forward(self_x, neighbors, mask)
        if not (np.all(np.isfinite(actor_out)) and np.all(np.isfinite(critic_out))):
            raise PolicyCorruptionError("policy produced non-finite outputs")
        return actor_out, actor_cache, critic_out, critic_cache

    def act_batch(self, observations: Sequence[EncodedObservation], deterministic: bool = False,
                  rng: Optional[np.random.Generator] = None) -> List[PolicyDecision]:
        if not observations:
            return []
        actor_out, _, critic_out, _ = self._forward(observations)
        mean, log_std = gaussian_head(actor_out)
        actions = gaussian_sample(mean, log_std, rng, deterministic)
        log_probs = gaussian_log_prob(mean, log_std, actions)
        values = critic_out[:, 0].astype(np.float64)
        return [
            PolicyDecision(Action(actions[b]), float(log_probs[b]), float(values[b]), mean[b], np.exp(log_std[b]))
            for b in range(len(observations))
        ]

    def act(self, obs: EncodedObservation, mode: str = "stochastic",
            rng: Optional[np.random.Generator] = None) -> PolicyDecision:
        if mode not in ("stochastic", "deterministic"):
            raise ValueError(f"unknown policy mode {mode!r}")
        return self.act_batch([obs], mode == "deterministic", rng)[0]

    def values(self, observations: Sequence[EncodedObservation]) -> np.ndarray:
        if not observations:
            return np.zeros(0)
        self_x, neighbors, mask = stack_observations(observations, self.store.dtype)
        out, _ = self.critic.forward(self_x, neighbors, mask)
        if not np.all(np.isfinite(out)):
            raise PolicyCorruptionError("critic produced non-finite values")
        return out[:, 0].astype(np.float64)

    def evaluate_actions(self, observations: Sequence[EncodedObservation], actions: np.ndarray) -> ActionEvaluation:
        actions = np.asarray(actions, dtype=np.float64)
        if actions.shape != (len(observations), ACTION_DIM):
            raise ShapeMismatchError(f"expected actions of shape ({len(observations)}, {ACTION_DIM}), got {actions.shape}")
        actor_out, actor_cache, critic_out, critic_cache = self._forward(observations)
        mean, log_std = gaussian_head(actor_out)
        return ActionEvaluation(
            gaussian_log_prob(mean, log_std, actions),
            critic_out[:, 0].astype(np.float64),
            gaussian_entropy(log_std),
            mean, log_std, actor_out, actor_cache, critic_cache,
        )

    def backward(self, evaluation: ActionEvaluation, d_mean: np.ndarray, d_log_std: np.ndarray,
                 d_value: np.ndarray) -> None:
        """Accumulate gradients given d(loss) w.r.t. mean, clamped log_std and value"""
        d_actor = np.concatenate([d_mean, d_log_std * log_std_pass_mask(evaluation.actor_out)], axis=-1)
        self.actor.backward(evaluation.actor_cache, d_actor)
        self.critic.backward(evaluation.critic_cache, np.asarray(d_value, dtype=np.float64)[:, None])

    def mirror_symmetrize(self) -> None:
        """Zero the input weights of features that flip under a left-right mirror of the scene"""
        for net in (self.actor, self.critic):
            net.self_embed.W[list(SELF_MIRROR_ODD), :] = 0.0
            net.neighbor_embed.W[list(NEIGHBOR_MIRROR_ODD), :] = 0.0


def evaluate_actions(policy: Policy, observations: Sequence[EncodedObservation], actions: np.ndarray):
    """(log_probs, values, entropies) of a batch"""
    ev = policy.evaluate_actions(observations, actions)
    return ev.log_probs, ev.values, ev.entropies


def _grid_centers(half: float, grid: int) -> np.ndarray:
    width = 2.0 * half / grid
    return -half + (np.arange(grid) + 0.5) * width


def value_heatmap(policy: Policy, world: WorldState, i: int, grid: int = HEATMAP_GRID,
                  mode: str = "offset", encoder: Optional[EncoderConfig] = None) -> np.ndarray:
    """
    Critic values over a grid of hypothetical placements of label i.

    Rows follow z and columns follow x, both increasing. In "offset" mode the cells are
    plane offsets spanning [-S/2, S/2]^2; in "acceleration" mode they are actions spanning
    the action bound, applied for one step while every other label holds still
    (objects hold their final state on the last step of the scene).
    The input world is never modified.
    """
    observations = []
    if mode == "offset":
        centers = _grid_centers(world.config.half_side, grid)
        for z in centers:
            for x in centers:
                candidate = with_label_offset(world, i, (x, z))
                observations.append(encode_observation(candidate, world.camera, i, encoder))
    elif mode == "acceleration":
        centers = _grid_centers(action_bound(world.config), grid)
        rest: Dict[str, Action] = {world.labels[k].target_id: Action.zero() for k in world.active_label_indices}
        target = world.labels[i].target_id
        for z in centers:
            for x in centers:
                actions = dict(rest)
                actions[target] = Action(np.array([x, z]))
                candidate = lookahead(world, actions)
                observations.append(encode_observation(candidate, world.camera, i, encoder))
    else:
        raise ValueError(f"unknown heatmap mode {mode!r}")
    return policy.values(observations).reshape(grid, grid)
