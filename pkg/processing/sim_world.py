#!/usr/bin/env python3
"""
Sim World - Objects replay scene trajectories; labels move on a square plane above their targets
"""
from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from errors import ConfigError, EpisodeFinished, MissingActionError
from processing.view_geometry import CameraSpec, billboard_axes
from trajectory_scenes import Scene

logger = logging.getLogger(__name__)

ACTION_MODES = ("acceleration", "velocity", "position")
DEFAULT_NORMAL = np.array([0.0, 0.0, 1.0])


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    max_acc: float = 3.0
    plane_side: float = 3.0
    plane_height: float = 0.5
    label_size: Tuple[float, float] = (1.0, 0.5)
    object_extent: Tuple[float, float, float] = (0.25, 1.0, 0.25)
    action_mode: str = "acceleration"
    max_speed: float = 2.0   # offset speed bound of the velocity action mode

    def __post_init__(self):
        values = [self.dt, self.max_acc, self.plane_side, self.plane_height, self.max_speed,
                  *self.label_size, *self.object_extent]
        if any(v <= 0 for v in values):
            raise ConfigError(f"simulation parameters must be positive: {self}")
        if self.action_mode not in ACTION_MODES:
            raise ConfigError(f"action_mode must be one of {ACTION_MODES} (got {self.action_mode!r})")

    @property
    def object_top(self) -> float:
        return 2.0 * self.object_extent[1]

    @property
    def half_side(self) -> float:
        return self.plane_side / 2.0


def action_bound(config: SimConfig) -> float:
    """Per-axis bound of the raw action in the active action mode"""
    if config.action_mode == "velocity":
        return config.max_speed
    if config.action_mode == "position":
        return config.half_side
    return config.max_acc


@dataclass(frozen=True, eq=False)
class ObjectState:
    id: str
    pos: np.ndarray      # (3,) bottom center on the ground plane
    vel: np.ndarray      # (3,), vel[1] == 0
    normal: np.ndarray   # (3,) unit heading
    active: bool = True


@dataclass(frozen=True, eq=False)
class LabelState:
    target_id: str
    offset: np.ndarray       # (2,) local x, z on the plane
    offset_vel: np.ndarray   # (2,)
    world_pos: np.ndarray    # (3,) billboard center
    world_vel: np.ndarray    # (3,)
    normal: np.ndarray       # (3,) toward the camera eye
    anchor: np.ndarray       # (3,) object top-center, end of the leader line
    active: bool = True


@dataclass(frozen=True, eq=False)
class Action:
    a: np.ndarray   # (2,) raw requested value, before clamping

    @classmethod
    def zero(cls) -> "Action":
        return cls(np.zeros(2))


@dataclass(frozen=True, eq=False)
class WorldState:
    step: int
    time: float
    objects: Tuple[ObjectState, ...]
    labels: Tuple[LabelState, ...]
    camera: CameraSpec
    config: SimConfig
    scene: Scene

    @cached_property
    def object_index(self) -> Dict[str, int]:
        return {ob.id: k for k, ob in enumerate(self.objects)}

    def target_of(self, i: int) -> ObjectState:
        return self.objects[self.object_index[self.labels[i].target_id]]

    def label_index(self, target_id: str) -> int:
        for k, lb in enumerate(self.labels):
            if lb.target_id == target_id:
                return k
        raise KeyError(target_id)

    @property
    def active_label_indices(self) -> List[int]:
        return [k for k, lb in enumerate(self.labels) if lb.active]

    @property
    def finished(self) -> bool:
        return self.step >= self.scene.n_steps


def _heading(vel: np.ndarray, previous: np.ndarray) -> np.ndarray:
    speed = np.linalg.norm(vel)
    if speed < 1e-9:
        return previous
    return vel / speed


def _objects_at(scene: Scene, step: int, previous: Optional[Sequence[ObjectState]] = None) -> Tuple[ObjectState, ...]:
    objects = []
    for k, (track_id, track) in enumerate(scene.tracks.items()):
        x, z = track.positions[step]
        vx, vz = track.velocities[step]
        vel = np.array([vx, 0.0, vz])
        prev_normal = previous[k].normal if previous is not None else DEFAULT_NORMAL
        objects.append(ObjectState(track_id, np.array([x, 0.0, z]), vel,
                                   _heading(vel, prev_normal), track.is_active(step)))
    return tuple(objects)


def _place_label(obj: ObjectState, offset: np.ndarray, offset_vel: np.ndarray,
                 camera: CameraSpec, config: SimConfig, active: bool) -> LabelState:
    world_pos = obj.pos + np.array([offset[0], config.object_top + config.plane_height, offset[1]])
    world_vel = obj.vel + np.array([offset_vel[0], 0.0, offset_vel[1]])
    normal, _, _ = billboard_axes(world_pos, camera)
    anchor = obj.pos + np.array([0.0, config.object_top, 0.0])
    return LabelState(obj.id, offset, offset_vel, world_pos, world_vel, normal, anchor, active)


def init_world(scene: Scene, config: SimConfig, camera: CameraSpec,
               labeled_ids: Optional[Iterable[str]] = None, start_step: int = 0) -> WorldState:
    """
    Build the world at start_step; every labeled object gets a label at its home offset (0, 0).

    Args:
        labeled_ids: track ids that carry labels (all tracks when None)
        start_step: scene step the episode starts from
    """
    ids = list(scene.track_ids if labeled_ids is None else labeled_ids)
    unknown = [tid for tid in ids if tid not in scene.tracks]
    if unknown:
        raise ConfigError(f"labeled ids {unknown} are not tracks of scene {scene.scene_id}")
    if not 0 <= start_step <= scene.n_steps:
        raise ConfigError(f"start step {start_step} outside scene {scene.scene_id} (0..{scene.n_steps})")
    objects = _objects_at(scene, start_step)
    by_id = {ob.id: ob for ob in objects}
    labels = tuple(
        _place_label(by_id[tid], np.zeros(2), np.zeros(2), camera, config, by_id[tid].active)
        for tid in ids
    )
    return WorldState(start_step, start_step * config.dt, objects, labels, camera, config, scene)


def _integrate(label: LabelState, raw: np.ndarray, config: SimConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Semi-implicit Euler on the offset, then per-axis containment in the plane"""
    dt = config.dt
    half = config.half_side
    if config.action_mode == "acceleration":
        applied = np.clip(raw, -config.max_acc, config.max_acc)
        vel = label.offset_vel + applied * dt
        offset = label.offset + vel * dt
    elif config.action_mode == "velocity":
        vel = np.clip(raw, -config.max_speed, config.max_speed)
        offset = label.offset + vel * dt
    else:
        offset = np.clip(raw, -half, half)
        vel = (offset - label.offset) / dt
    # Wall contact stops motion along that axis
    hit = np.abs(offset) >= half
    if hit.any():
        offset = np.where(hit, np.sign(offset) * half, offset)
        vel = np.where(hit, 0.0, vel)
    return offset, vel


def _advance(world: WorldState, actions: Mapping[str, Action], objects: Tuple[ObjectState, ...]) -> Tuple[LabelState, ...]:
    config = world.config
    by_id = {ob.id: ob for ob in objects}
    labels = []
    for label in world.labels:
        offset, offset_vel = label.offset, label.offset_vel
        if label.active:
            action = actions.get(label.target_id)
            if action is None:
                raise MissingActionError(f"no action for label of {label.target_id} at step {world.step}")
            offset, offset_vel = _integrate(label, np.asarray(action.a, dtype=float), config)
        target = by_id[label.target_id]
        if not target.active:
            offset_vel = np.zeros(2)
        labels.append(_place_label(target, offset, offset_vel, world.camera, config, target.active))
    return tuple(labels)


def step(world: WorldState, actions: Mapping[str, Action]) -> WorldState:
    """
    Advance one decision interval.

    Args:
        actions: one Action per active label, keyed by target id

    Raises:
        EpisodeFinished: the world is already at the last step of its scene
        MissingActionError: an active label has no action
    """
    if world.finished:
        raise EpisodeFinished(f"scene {world.scene.scene_id} ended at step {world.step}")
    new_step = world.step + 1
    objects = _objects_at(world.scene, new_step, world.objects)
    labels = _advance(world, actions, objects)
    return WorldState(new_step, new_step * world.config.dt, objects, labels, world.camera, world.config, world.scene)


def lookahead(world: WorldState, actions: Mapping[str, Action]) -> WorldState:
    """
    Hypothetical next state for scoring candidate actions.

    Same as step() while the scene runs. On the last step the objects hold
    their final state and only the labels move; the step index does not change.
    """
    if not world.finished:
        return step(world, actions)
    labels = _advance(world, actions, world.objects)
    return WorldState(world.step, world.time, world.objects, labels, world.camera, world.config, world.scene)


def default_home(label: LabelState) -> np.ndarray:
    """Home offset of every label: directly above its target"""
    return np.zeros(2)


def pin_home(world: WorldState) -> WorldState:
    """Reset every label to its home offset at rest"""
    labels = tuple(
        _place_label(world.objects[world.object_index[lb.target_id]], default_home(lb), np.zeros(2),
                     world.camera, world.config, lb.active)
        for lb in world.labels
    )
    return replace(world, labels=labels)


def with_label_offset(world: WorldState, i: int, offset, offset_vel=None) -> WorldState:
    """Copy of the world with label i moved to a hypothetical offset"""
    label = world.labels[i]
    target = world.target_of(i)
    vel = np.zeros(2) if offset_vel is None else np.asarray(offset_vel, dtype=float)
    moved = _place_label(target, np.asarray(offset, dtype=float), vel, world.camera, world.config, label.active)
    labels = list(world.labels)
    labels[i] = moved
    return replace(world, labels=tuple(labels))


def label_displacement(before: WorldState, after: WorldState, i: int) -> np.ndarray:
    """World displacement of label i, composed as object displacement plus offset displacement"""
    obj_before = before.target_of(i)
    obj_after = after.target_of(i)
    d_offset = after.labels[i].offset - before.labels[i].offset
    return (obj_after.pos - obj_before.pos) + np.array([d_offset[0], 0.0, d_offset[1]])


def object_displacement(before: WorldState, after: WorldState, i: int) -> np.ndarray:
    return after.target_of(i).pos - before.target_of(i).pos


def world_hash(world: WorldState) -> str:
    """SHA-256 over the step index and every entity state"""
    digest = hashlib.sha256()
    digest.update(str(world.step).encode())
    for ob in world.objects:
        digest.update(ob.id.encode())
        for arr in (ob.pos, ob.vel, ob.normal):
            digest.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        digest.update(b"1" if ob.active else b"0")
    for lb in world.labels:
        digest.update(lb.target_id.encode())
        for arr in (lb.offset, lb.offset_vel, lb.world_pos, lb.world_vel, lb.normal, lb.anchor):
            digest.update(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
        digest.update(b"1" if lb.active else b"0")
    return digest.hexdigest()
