#!/usr/bin/env python3
"""
Rollout Worker - Collects on-policy experience on training scenes in background threads
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from errors import DataError, ObservationError
from learning.agent_policy import Policy
from learning.rollout_buffer import EpisodeBuffer, LabelStream, Transition
from processing.reward_metrics import RewardConfig, StepCounts, reward, step_counts
from processing.sim_world import SimConfig, WorldState, action_bound, init_world, step
from processing.state_encoder import EncodedObservation, EncoderConfig, encode_observation
from processing.view_geometry import CameraSpec
from trajectory_scenes import Scene

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EpisodeSettings:
    sim: SimConfig
    camera: CameraSpec
    reward: RewardConfig
    encoder: EncoderConfig
    episode_len: int = 150
    abort_penalty: float = 0.5


def choose_labeled(scene: Scene, num_agent: int, rng: np.random.Generator) -> List[str]:
    """Pick num_agent tracks to carry labels, in scene order; all tracks when there are fewer"""
    ids = scene.track_ids
    if num_agent >= len(ids):
        if num_agent > len(ids):
            logger.debug(f"Scene {scene.scene_id} has {len(ids)} tracks, fewer than {num_agent} agents")
        return list(ids)
    picked = set(rng.choice(len(ids), size=num_agent, replace=False).tolist())
    return [tid for k, tid in enumerate(ids) if k in picked]


def _encode_active(world: WorldState, encoder: EncoderConfig) -> List[EncodedObservation]:
    return [encode_observation(world, world.camera, i, encoder) for i in world.active_label_indices]


class RolloutWorker:
    """Runs whole stochastic episodes with its own random stream"""

    def __init__(self, worker_id: int, scenes: Sequence[Scene], policy: Policy,
                 settings: EpisodeSettings, seed: np.random.SeedSequence):
        if not scenes:
            raise DataError("no training scenes to collect rollouts from")
        self.worker_id = worker_id
        self.scenes = list(scenes)
        self.policy = policy
        self.settings = settings
        self.rng = np.random.default_rng(seed)

    def collect(self, n_env_steps: int, num_agent: int) -> Tuple[EpisodeBuffer, List[float]]:
        """
        Run episodes until at least n_env_steps world steps were taken.

        Returns:
            (buffer, per-label episode returns)
        """
        buffer = EpisodeBuffer()
        returns: List[float] = []
        steps = 0
        while steps < n_env_steps:
            streams, taken = self.run_episode(num_agent)
            steps += max(taken, 1)
            for stream in streams:
                if len(stream):
                    buffer.streams.append(stream)
                    returns.append(stream.episode_return)
        return buffer, returns

    def run_episode(self, num_agent: int) -> Tuple[List[LabelStream], int]:
        cfg = self.settings
        scene = self.scenes[int(self.rng.integers(len(self.scenes)))]
        length = min(cfg.episode_len, scene.n_steps)
        start = int(self.rng.integers(scene.n_steps - length + 1))
        labeled = choose_labeled(scene, num_agent, self.rng)
        world = init_world(scene, cfg.sim, cfg.camera, labeled, start_step=start)
        bound = action_bound(cfg.sim)

        streams: Dict[str, LabelStream] = {}
        taken = 0
        for _ in range(length):
            try:
                observations = _encode_active(world, cfg.encoder)
            except ObservationError as e:
                logger.warning(f"Worker {self.worker_id}: aborting episode on {scene.scene_id} at step {world.step}: {e}")
                self._abort(streams)
                return list(streams.values()), taken

            decisions = self.policy.act_batch(observations, False, self.rng)
            actions = {obs.target_id: d.action for obs, d in zip(observations, decisions)}
            after = step(world, actions)
            counts = step_counts(after)
            taken += 1

            for obs, decision in zip(observations, decisions):
                tid = obs.target_id
                stream = streams.setdefault(tid, LabelStream(tid))
                k = world.label_index(tid)
                moved = float(np.linalg.norm(after.labels[k].offset - world.labels[k].offset))
                r = reward(counts.get(tid, StepCounts()), decision.action, bound, cfg.reward, moved)
                stream.transitions.append(
                    Transition(obs, np.asarray(decision.action.a, dtype=np.float64), decision.log_prob,
                               r.total, decision.value)
                )
                if not after.labels[k].active:
                    stream.close(0.0, terminal=True)
            world = after
            if world.finished:
                break

        self._truncate(world, streams)
        return list(streams.values()), taken

    def _abort(self, streams: Dict[str, LabelStream]) -> None:
        for stream in streams.values():
            if stream.closed:
                continue
            if stream.transitions:
                stream.transitions[-1].reward -= self.settings.abort_penalty
            stream.close(0.0, terminal=True)

    def _truncate(self, world: WorldState, streams: Dict[str, LabelStream]) -> None:
        """Time-limit end: bootstrap every open stream with the critic"""
        open_streams = [s for s in streams.values() if not s.closed]
        if not open_streams:
            return
        try:
            observations = [
                encode_observation(world, world.camera, world.label_index(s.target_id), self.settings.encoder)
                for s in open_streams
            ]
        except ObservationError as e:
            logger.warning(f"Worker {self.worker_id}: cannot bootstrap at step {world.step}: {e}")
            self._abort(streams)
            return
        values = self.policy.values(observations)
        for stream, value in zip(open_streams, values):
            stream.close(float(value), terminal=False)


class RolloutPool:
    """Fixed set of workers; results are merged in worker order"""

    def __init__(self, scenes: Sequence[Scene], policy: Policy, settings: EpisodeSettings,
                 n_workers: int = 4, seed: int = 0, single_thread: bool = False,
                 progress: Optional[Callable[[int, str], None]] = None):
        n_workers = max(1, int(n_workers))
        seeds = np.random.SeedSequence(seed).spawn(n_workers)
        self.workers = [RolloutWorker(k, scenes, policy, settings, seeds[k]) for k in range(n_workers)]
        self.single_thread = single_thread
        self.progress = progress

    @property
    def n_workers(self) -> int:
        return len(self.workers)

    def collect(self, n_env_steps: int, num_agent: int) -> Tuple[EpisodeBuffer, List[float]]:
        """Collect n_env_steps world steps per worker"""
        def run(worker: RolloutWorker):
            return worker.collect(n_env_steps, num_agent)

        if self.single_thread or self.n_workers == 1:
            results = [run(w) for w in self.workers]
        else:
            with ThreadPoolExecutor(max_workers=self.n_workers) as executor:
                results = list(executor.map(run, self.workers))

        buffer = EpisodeBuffer()
        returns: List[float] = []
        for part, part_returns in results:
            buffer.extend(part)
            returns.extend(part_returns)
        logger.info(f"Collected {len(buffer)} transitions from {self.n_workers} workers")
        if self.progress:
            self.progress(len(buffer), f"Collected {len(buffer)} transitions")
        return buffer, returns
