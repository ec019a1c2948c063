#!/usr/bin/env python3
"""
Reward Metrics - Per-step label reward and the OCC / INT / DIST evaluation metrics
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

from errors import ConfigError, MetricsError
from processing.sim_world import WorldState, label_displacement, object_displacement
from processing.view_geometry import count_intersections, count_occlusions, project_scene

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RewardConfig:
    occ_coef: float = 0.1
    int_coef: float = 0.1
    acc_bonus: float = 0.001
    move_penalty: float = 0.0   # per meter of offset motion

    def __post_init__(self):
        if min(self.occ_coef, self.int_coef, self.acc_bonus, self.move_penalty) < 0:
            raise ConfigError(f"reward coefficients must be non-negative: {self}")


@dataclass(frozen=True)
class StepCounts:
    n_occ: int = 0
    n_int: int = 0


@dataclass(frozen=True)
class RewardBreakdown:
    r_occ: float
    r_int: float
    r_acc: float
    total: float
    r_move: float = 0.0


def reward(counts: StepCounts, raw_action, max_acc: float, cfg: Optional[RewardConfig] = None,
           offset_step: float = 0.0) -> RewardBreakdown:
    """
    Reward one label for one step.

    Args:
        counts: occlusions and leader-line crossings after the step
        raw_action: requested action before clamping (Action or 2-vector)
        max_acc: per-axis bound of the raw action
        offset_step: distance the label moved on its plane, for the move penalty
    """
    cfg = cfg or RewardConfig()
    a = np.asarray(getattr(raw_action, "a", raw_action), dtype=float)
    r_occ = -cfg.occ_coef * counts.n_occ if counts.n_occ > 0 else cfg.occ_coef
    r_int = -cfg.int_coef * counts.n_int if counts.n_int > 0 else cfg.int_coef
    in_bounds = abs(a[0]) <= max_acc and abs(a[1]) <= max_acc
    r_acc = cfg.acc_bonus if in_bounds else -cfg.acc_bonus
    total = r_occ + r_int + r_acc
    r_move = 0.0
    if cfg.move_penalty > 0:
        r_move = -cfg.move_penalty * offset_step
        total += r_move
    return RewardBreakdown(r_occ, r_int, r_acc, total, r_move)


def step_counts(world: WorldState) -> Dict[str, StepCounts]:
    """Counts for every active label, keyed by target id, from one shared projection"""
    projection = project_scene(world)
    counts = {}
    for i in world.active_label_indices:
        counts[world.labels[i].target_id] = StepCounts(
            count_occlusions(world, None, i, projection),
            count_intersections(world, None, i, projection),
        )
    return counts


@dataclass
class LabelTally:
    occ: int = 0
    int_: int = 0
    label_path: float = 0.0
    object_path: float = 0.0
    steps: int = 0

    def add(self, other: "LabelTally") -> None:
        self.occ += other.occ
        self.int_ += other.int_
        self.label_path += other.label_path
        self.object_path += other.object_path
        self.steps += other.steps


@dataclass(frozen=True)
class EpisodeMetrics:
    occ: float
    inter: float
    dist: float
    labels: int
    label_steps: int


@dataclass
class MetricsAccumulator:
    """Per-label sums keyed by (scene id, target id)"""
    tallies: Dict[Tuple[str, str], LabelTally] = field(default_factory=dict)

    def accumulate(self, before: WorldState, after: WorldState, counts: Dict[str, StepCounts]) -> "MetricsAccumulator":
        for i, label in enumerate(before.labels):
            if not label.active:
                continue
            key = (before.scene.scene_id, label.target_id)
            tally = self.tallies.setdefault(key, LabelTally())
            c = counts.get(label.target_id, StepCounts())
            tally.occ += c.n_occ
            tally.int_ += c.n_int
            tally.label_path += float(np.linalg.norm(label_displacement(before, after, i)))
            tally.object_path += float(np.linalg.norm(object_displacement(before, after, i)))
            tally.steps += 1
        return self

    def merge(self, other: "MetricsAccumulator") -> "MetricsAccumulator":
        for key, tally in other.tallies.items():
            self.tallies.setdefault(key, LabelTally()).add(tally)
        return self

    @property
    def label_steps(self) -> int:
        return sum(t.steps for t in self.tallies.values())


def accumulate(acc: MetricsAccumulator, world_before: WorldState, world_after: WorldState,
               counts: Dict[str, StepCounts]) -> MetricsAccumulator:
    return acc.accumulate(world_before, world_after, counts)


def finalize(acc: MetricsAccumulator) -> EpisodeMetrics:
    """OCC and INT per label per step, DIST per label"""
    label_steps = acc.label_steps
    if label_steps == 0:
        raise MetricsError("no label steps were accumulated")
    tallies = [t for t in acc.tallies.values() if t.steps > 0]
    occ = sum(t.occ for t in tallies) / label_steps
    inter = sum(t.int_ for t in tallies) / label_steps
    dist = sum(t.label_path - t.object_path for t in tallies) / len(tallies)
    return EpisodeMetrics(occ, inter, dist, len(tallies), label_steps)
