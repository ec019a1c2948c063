#!/usr/bin/env python3
"""
Rollout Buffer - Per-label transition streams collected between policy updates
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from processing.state_encoder import EncodedObservation


@dataclass(eq=False)
class Transition:
    obs: EncodedObservation
    action: np.ndarray   # (2,) raw sampled action
    log_prob: float
    reward: float
    value: float
    done: bool = False


@dataclass(eq=False)
class LabelStream:
    """Consecutive transitions of one label in one episode"""
    target_id: str
    transitions: List[Transition] = field(default_factory=list)
    bootstrap_value: float = 0.0   # V(s_T) after a time-limit cut, 0 after a terminal end
    terminal: bool = False
    closed: bool = False

    def __len__(self) -> int:
        return len(self.transitions)

    @property
    def episode_return(self) -> float:
        return float(sum(t.reward for t in self.transitions))

    def close(self, bootstrap_value: float, terminal: bool) -> None:
        self.bootstrap_value = 0.0 if terminal else float(bootstrap_value)
        self.terminal = terminal
        self.closed = True
        if self.transitions:
            self.transitions[-1].done = True


@dataclass(eq=False)
class EpisodeBuffer:
    streams: List[LabelStream] = field(default_factory=list)
    advantages: np.ndarray = field(default_factory=lambda: np.zeros(0))
    returns: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __len__(self) -> int:
        return sum(len(s) for s in self.streams)

    def extend(self, other: "EpisodeBuffer") -> None:
        self.streams.extend(other.streams)

    def transitions(self) -> List[Transition]:
        return [t for s in self.streams for t in s.transitions]

    def flatten(self) -> Tuple[List[EncodedObservation], np.ndarray, np.ndarray]:
        """(observations, actions (N, 2), old log-probs (N,)) in stream order"""
        transitions = self.transitions()
        obs = [t.obs for t in transitions]
        actions = np.array([t.action for t in transitions], dtype=np.float64).reshape(len(transitions), 2)
        log_probs = np.array([t.log_prob for t in transitions], dtype=np.float64)
        return obs, actions, log_probs
