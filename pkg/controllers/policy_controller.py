#!/usr/bin/env python3
"""
Policy Controller - Decentralized execution of a trained policy, one observation per label
"""
import logging
from typing import Dict, Optional

import numpy as np

from controllers.baselines import none_controller
from errors import ConfigError, ObservationError
from learning.agent_policy import Policy
from processing.sim_world import Action, WorldState
from processing.state_encoder import EncoderConfig, encode_observation

logger = logging.getLogger(__name__)


class PolicyController:
    """Acts with the policy mean by default; stochastic when given an rng and deterministic=False"""
    name = "rl"
    needs_policy = True
    pins_home = False

    def __init__(self, policy: Optional[Policy] = None, encoder: Optional[EncoderConfig] = None,
                 deterministic: bool = True, rng: Optional[np.random.Generator] = None, **kwargs):
        if policy is None:
            raise ConfigError("the rl controller needs a policy (pass --checkpoint)")
        self.policy = policy
        self.encoder = encoder or EncoderConfig()
        self.deterministic = deterministic
        self.rng = rng

    def actions(self, world: WorldState) -> Dict[str, Action]:
        observations = []
        actions: Dict[str, Action] = {}
        for i in world.active_label_indices:
            try:
                observations.append(encode_observation(world, world.camera, i, self.encoder))
            except ObservationError as e:
                logger.warning(f"Step {world.step}: {e}; holding the label still")
                actions[world.labels[i].target_id] = none_controller(world, i)
        for decision, obs in zip(self.policy.act_batch(observations, self.deterministic, self.rng), observations):
            actions[obs.target_id] = decision.action
        return actions
