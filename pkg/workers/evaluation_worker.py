#!/usr/bin/env python3
"""
Evaluation Worker - Runs controllers over whole scenes and gathers metrics and replay frames
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np

from controllers.base import Controller
from processing.reward_metrics import (
    MetricsAccumulator,
    RewardBreakdown,
    RewardConfig,
    StepCounts,
    reward,
    step_counts,
)
from processing.sim_world import SimConfig, WorldState, action_bound, init_world, pin_home, step
from processing.state_encoder import EncoderConfig, encode_observation, observation_record
from processing.view_geometry import CameraSpec
from trajectory_scenes import Scene

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class SceneEvaluation:
    scene_id: str
    accumulator: MetricsAccumulator
    returns: Dict[str, float] = field(default_factory=dict)
    frames: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def mean_return(self) -> float:
        return float(np.mean(list(self.returns.values()))) if self.returns else 0.0


def _vec(a) -> List[float]:
    return [float(x) for x in a]


def replay_frame(world: WorldState, counts: Dict[str, StepCounts],
                 rewards: Optional[Dict[str, RewardBreakdown]] = None,
                 actions: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """One replay line; the initial frame carries reward None"""
    labels = []
    for lb in world.labels:
        c = counts.get(lb.target_id, StepCounts())
        entry = {
            "target": lb.target_id,
            "active": bool(lb.active),
            "offset": _vec(lb.offset),
            "pos": _vec(lb.world_pos),
            "n_occ": c.n_occ,
            "n_int": c.n_int,
        }
        if actions is not None and lb.target_id in actions:
            entry["action"] = _vec(actions[lb.target_id].a)
        if rewards is not None and lb.target_id in rewards:
            entry["reward"] = rewards[lb.target_id].total
        labels.append(entry)
    return {
        "step": world.step,
        "time": world.time,
        "objects": [{"id": ob.id, "active": bool(ob.active), "pos": _vec(ob.pos)} for ob in world.objects],
        "labels": labels,
        "reward": None if rewards is None else {tid: r.total for tid, r in rewards.items()},
    }


def evaluate_scene(scene: Scene, controller: Controller, sim: SimConfig, camera: CameraSpec,
                   reward_cfg: Optional[RewardConfig] = None, labeled_ids: Optional[Sequence[str]] = None,
                   record: bool = False, observation_sink: Optional[Callable[[dict], None]] = None,
                   encoder: Optional[EncoderConfig] = None) -> SceneEvaluation:
    """
    Run one controller from the first to the last step of a scene.

    Counts and rewards are taken on the world after each step. Controllers that pin labels
    home get their labels reset after every step.
    """
    reward_cfg = reward_cfg or RewardConfig()
    world = init_world(scene, sim, camera, labeled_ids)
    if controller.pins_home:
        world = pin_home(world)
    bound = action_bound(sim)
    result = SceneEvaluation(scene.scene_id, MetricsAccumulator(),
                             {lb.target_id: 0.0 for lb in world.labels})
    if record:
        result.frames.append(replay_frame(world, step_counts(world)))

    while not world.finished:
        if observation_sink is not None:
            for i in world.active_label_indices:
                obs = encode_observation(world, camera, i, encoder)
                observation_sink(observation_record(world.step, obs))
        actions = controller.actions(world)
        after = step(world, actions)
        if controller.pins_home:
            after = pin_home(after)
        counts = step_counts(after)
        result.accumulator.accumulate(world, after, counts)

        rewards: Dict[str, RewardBreakdown] = {}
        for i in world.active_label_indices:
            tid = world.labels[i].target_id
            moved = float(np.linalg.norm(after.labels[i].offset - world.labels[i].offset))
            rewards[tid] = reward(counts.get(tid, StepCounts()), actions[tid], bound, reward_cfg, moved)
            result.returns[tid] += rewards[tid].total
        if record:
            result.frames.append(replay_frame(after, counts, rewards, actions))
        world = after

    logger.debug(f"Evaluated {controller.name} on {scene.scene_id}: {result.accumulator.label_steps} label steps")
    return result


class EvaluationWorker:
    """Evaluates one controller on many scenes; results come back sorted by scene id"""

    def __init__(self, controller: Controller, sim: SimConfig, camera: CameraSpec,
                 reward_cfg: Optional[RewardConfig] = None, n_workers: int = 4, single_thread: bool = False,
                 progress: Optional[Callable[[int, str], None]] = None):
        self.controller = controller
        self.sim = sim
        self.camera = camera
        self.reward_cfg = reward_cfg or RewardConfig()
        self.n_workers = max(1, int(n_workers))
        self.single_thread = single_thread
        self.progress = progress

    def run(self, scenes: Sequence[Scene],
            labeled: Optional[Callable[[Scene], Optional[Sequence[str]]]] = None) -> List[SceneEvaluation]:
        ordered = sorted(scenes, key=lambda s: s.scene_id)
        total = len(ordered)

        def one(scene: Scene) -> SceneEvaluation:
            ids = labeled(scene) if labeled else None
            return evaluate_scene(scene, self.controller, self.sim, self.camera, self.reward_cfg, ids)

        if self.single_thread or self.n_workers == 1:
            results = []
            for k, scene in enumerate(ordered):
                results.append(one(scene))
                self._report(k + 1, total)
        else:
            with ThreadPoolExecutor(max_workers=self.n_workers) as executor:
                results = list(executor.map(one, ordered))
            self._report(total, total)
        return results

    def _report(self, done: int, total: int) -> None:
        if self.progress:
            percent = int(100 * done / total) if total else 100
            self.progress(percent, f"{self.controller.name}: {done}/{total} scenes")


def evaluate_scenes(scenes: Sequence[Scene], controller: Controller, sim: SimConfig, camera: CameraSpec,
                    reward_cfg: Optional[RewardConfig] = None, n_workers: int = 4,
                    single_thread: bool = False) -> List[SceneEvaluation]:
    return EvaluationWorker(controller, sim, camera, reward_cfg, n_workers, single_thread).run(scenes)


def merge_accumulators(results: Sequence[SceneEvaluation]) -> MetricsAccumulator:
    merged = MetricsAccumulator()
    for result in results:
        merged.merge(result.accumulator)
    return merged


def world_at(scene: Scene, controller: Controller, sim: SimConfig, camera: CameraSpec, target_step: int,
             labeled_ids: Optional[Sequence[str]] = None) -> WorldState:
    """World after running the controller from step 0 up to target_step"""
    world = init_world(scene, sim, camera, labeled_ids)
    if controller.pins_home:
        world = pin_home(world)
    while world.step < target_step:
        world = step(world, controller.actions(world))
        if controller.pins_home:
            world = pin_home(world)
    return world
