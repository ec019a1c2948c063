#!/usr/bin/env python3
"""
Baselines - No view management and a reactive screen-space force controller
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from errors import ConfigError
from processing.sim_world import Action, SimConfig, WorldState
from processing.view_geometry import CameraSpec, object_center, projector_for

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ForceConfig:
    k_repel: float = 0.02
    repel_radius: float = 0.15   # normalized screen distance
    k_spring: float = 4.0 / 60.0  # gain * k_spring = 4 1/s^2
    damping: float = 4.0 / 60.0   # gain * damping = 4 1/s
    gain: float = 60.0            # screen force units -> m/s^2, applied to the whole force

    def __post_init__(self):
        if min(self.k_repel, self.repel_radius, self.k_spring, self.damping, self.gain) < 0:
            raise ConfigError(f"force parameters must be non-negative: {self}")


def _as_mode_action(accel: np.ndarray, world: WorldState, i: int) -> Action:
    """Express a desired offset acceleration in the world's action mode"""
    config: SimConfig = world.config
    label = world.labels[i]
    if config.action_mode == "velocity":
        return Action(label.offset_vel + accel * config.dt)
    if config.action_mode == "position":
        return Action(label.offset + (label.offset_vel + accel * config.dt) * config.dt)
    return Action(np.clip(accel, -config.max_acc, config.max_acc))


def none_controller(world: WorldState, i: int) -> Action:
    """Keep label i at rest on its home offset"""
    config = world.config
    label = world.labels[i]
    if config.action_mode == "position":
        return Action(np.zeros(2))
    if config.action_mode == "velocity":
        return Action(np.clip(-label.offset / config.dt, -config.max_speed, config.max_speed))
    return Action(np.clip(-label.offset_vel / config.dt, -config.max_acc, config.max_acc))


def screen_repulsion(world: WorldState, camera: CameraSpec, i: int, cfg: ForceConfig) -> np.ndarray:
    """Sum of inverse-distance pushes (u, v) away from every other entity's projected center"""
    proj = projector_for(camera)
    label = world.labels[i]
    centers = []
    for ob in world.objects:
        if ob.active and ob.id != label.target_id:
            centers.append(object_center(ob.pos, world.config.object_extent))
    for j, other in enumerate(world.labels):
        if other.active and j != i:
            centers.append(other.world_pos)
    force = np.zeros(2)
    if not centers:
        return force
    uv, w = proj.project(np.vstack([label.world_pos, *centers]))
    if w[0] < proj.near:
        return force
    here = uv[0]
    for other_uv, other_w in zip(uv[1:], w[1:]):
        if other_w < proj.near:
            continue
        delta = here - other_uv
        d = float(np.linalg.norm(delta))
        if d >= cfg.repel_radius:
            continue
        direction = delta / d if d > 1e-12 else np.array([1.0, 0.0])
        force += cfg.k_repel * (1.0 / max(d, 1e-3) - 1.0 / cfg.repel_radius) * direction
    return force


def _plane_axes(camera: CameraSpec):
    """Plane directions that move a label right and up on screen"""
    proj = projector_for(camera)
    right = proj.right[[0, 2]]
    away = proj.forward[[0, 2]]
    right = right / np.linalg.norm(right)
    n_away = np.linalg.norm(away)
    if n_away < 1e-9:
        away = np.array([-right[1], right[0]])
    else:
        away = away / n_away
    return right, away


def force_acceleration(world: WorldState, camera: Optional[CameraSpec], i: int,
                       cfg: Optional[ForceConfig] = None) -> np.ndarray:
    """Unclamped plane acceleration: gain * (repulsion - k_spring * offset - damping * offset_vel)"""
    camera = camera or world.camera
    cfg = cfg or ForceConfig()
    label = world.labels[i]
    push = screen_repulsion(world, camera, i, cfg)
    right, away = _plane_axes(camera)
    plane_push = push[0] * right + push[1] * away
    return cfg.gain * (plane_push - cfg.k_spring * label.offset - cfg.damping * label.offset_vel)


def force_controller(world: WorldState, camera: Optional[CameraSpec], i: int,
                     cfg: Optional[ForceConfig] = None) -> Action:
    return _as_mode_action(force_acceleration(world, camera, i, cfg), world, i)


class NoneController:
    """Labels stay fixed on top of their targets"""
    name = "none"
    pins_home = True

    def __init__(self, **kwargs):
        pass

    def actions(self, world: WorldState) -> Dict[str, Action]:
        return {world.labels[i].target_id: none_controller(world, i) for i in world.active_label_indices}


class ForceController:
    """Labels pushed apart in screen space and pulled home by a damped spring"""
    name = "force"
    pins_home = False

    def __init__(self, force: Optional[ForceConfig] = None, **kwargs):
        self.config = force or ForceConfig()

    def actions(self, world: WorldState) -> Dict[str, Action]:
        return {
            world.labels[i].target_id: force_controller(world, world.camera, i, self.config)
            for i in world.active_label_indices
        }
