#!/usr/bin/env python3
"""
State Encoder - Per-label observations: self features plus variable-length neighbor features
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from errors import ConfigError, ObservationError
from processing.sim_world import WorldState
from processing.view_geometry import CameraSpec, object_center, to_ray_space

logger = logging.getLogger(__name__)

SELF_DIM = 22
NEIGHBOR_DIM = 13

# Slots whose sign flips (or, for absolute u, reflects about 0.5) when the scene is
# mirrored across the screen's vertical axis
SELF_MIRROR_ODD = (0, 3, 6, 9, 12, 15, 18)
NEIGHBOR_MIRROR_ODD = (0, 3, 6, 9)


@dataclass(frozen=True)
class EncoderConfig:
    ref_speed: float = 5.0   # m/s, velocity divisor

    def __post_init__(self):
        if self.ref_speed <= 0:
            raise ConfigError(f"ref_speed must be positive (got {self.ref_speed})")


@dataclass(eq=False)
class EncodedObservation:
    target_id: str
    self_feature: np.ndarray                 # (SELF_DIM,)
    neighbors: np.ndarray                    # (k, NEIGHBOR_DIM)
    neighbor_keys: List[Tuple[str, str]] = field(default_factory=list)   # (kind, id)

    @property
    def neighbor_count(self) -> int:
        return len(self.neighbors)


def _ray(point, camera: CameraSpec, what: str) -> np.ndarray:
    rp = to_ray_space(point, camera)
    if not rp.in_front:
        raise ObservationError(f"{what} is behind the camera")
    return np.array([rp.u, rp.v, rp.z_cam / camera.far])


def encode_self(world: WorldState, camera: Optional[CameraSpec], i: int,
                cfg: Optional[EncoderConfig] = None) -> np.ndarray:
    """
    Label i's own state (12 slots) followed by its target object's state (10 slots).

    Positions are in ray space (u, v, z_cam / far); velocities stay in world units,
    divided by the reference speed.
    """
    camera = camera or world.camera
    cfg = cfg or EncoderConfig()
    label = world.labels[i]
    obj = world.target_of(i)
    what = f"label of {label.target_id}"
    p_l = _ray(label.world_pos, camera, what)
    p_anchor = _ray(label.anchor, camera, what)
    p_o = _ray(object_center(obj.pos, world.config.object_extent), camera, f"object {obj.id}")
    v_l = label.world_vel / cfg.ref_speed
    v_o = obj.vel / cfg.ref_speed
    return np.concatenate([
        p_l, v_l, label.normal, p_anchor - p_l,
        p_o - p_l, v_o - v_l, obj.normal, [1.0],
    ])


def encode_neighbor(world: WorldState, camera: Optional[CameraSpec], i: int, j: int, kind: str,
                    cfg: Optional[EncoderConfig] = None) -> np.ndarray:
    """
    Neighbor j relative to label i: ray position, velocity, normal, leader offset, w.

    j indexes world.objects for kind "object" and world.labels for kind "label".
    """
    camera = camera or world.camera
    cfg = cfg or EncoderConfig()
    label = world.labels[i]
    p_l = _ray(label.world_pos, camera, f"label of {label.target_id}")
    return _neighbor_feature(world, camera, p_l, label.world_vel / cfg.ref_speed, j, kind, cfg)


def _neighbor_feature(world: WorldState, camera: CameraSpec, p_l: np.ndarray, v_l: np.ndarray,
                      j: int, kind: str, cfg: EncoderConfig) -> np.ndarray:
    if kind == "object":
        obj = world.objects[j]
        p_j = _ray(object_center(obj.pos, world.config.object_extent), camera, f"object {obj.id}")
        return np.concatenate([p_j - p_l, obj.vel / cfg.ref_speed - v_l, obj.normal, np.zeros(3), [1.0]])
    if kind == "label":
        other = world.labels[j]
        what = f"label of {other.target_id}"
        p_j = _ray(other.world_pos, camera, what)
        p_anchor = _ray(other.anchor, camera, what)
        return np.concatenate([p_j - p_l, other.world_vel / cfg.ref_speed - v_l, other.normal,
                               p_anchor - p_l, [0.0]])
    raise ValueError(f"unknown neighbor kind {kind!r}")


def encode_observation(world: WorldState, camera: Optional[CameraSpec], i: int,
                       cfg: Optional[EncoderConfig] = None) -> EncodedObservation:
    """Self feature plus every active object and label except label i and its target"""
    camera = camera or world.camera
    cfg = cfg or EncoderConfig()
    label = world.labels[i]
    own = label.target_id
    self_feature = encode_self(world, camera, i, cfg)
    p_l = self_feature[0:3]
    v_l = self_feature[3:6]
    rows = []
    keys = []
    for j, obj in enumerate(world.objects):
        if obj.active and obj.id != own:
            rows.append(_neighbor_feature(world, camera, p_l, v_l, j, "object", cfg))
            keys.append(("object", obj.id))
    for j, other in enumerate(world.labels):
        if other.active and j != i:
            rows.append(_neighbor_feature(world, camera, p_l, v_l, j, "label", cfg))
            keys.append(("label", other.target_id))
    neighbors = np.array(rows) if rows else np.zeros((0, NEIGHBOR_DIM))
    return EncodedObservation(own, self_feature, neighbors, keys)


def stack_observations(observations: Sequence[EncodedObservation],
                       dtype=np.float64) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Batch observations for the networks, padding neighbors with zeros.

    Returns:
        (self_x (B, SELF_DIM), neighbors (B, K, NEIGHBOR_DIM), mask (B, K))
    """
    batch = len(observations)
    k_max = max((obs.neighbor_count for obs in observations), default=0)
    self_x = np.zeros((batch, SELF_DIM), dtype=dtype)
    neighbors = np.zeros((batch, k_max, NEIGHBOR_DIM), dtype=dtype)
    mask = np.zeros((batch, k_max), dtype=bool)
    for b, obs in enumerate(observations):
        self_x[b] = obs.self_feature
        k = obs.neighbor_count
        if k:
            neighbors[b, :k] = obs.neighbors
            mask[b, :k] = True
    return self_x, neighbors, mask


def observation_record(step: int, obs: EncodedObservation) -> dict:
    """One line of the observation dump"""
    return {
        "step": step,
        "label": obs.target_id,
        "self": obs.self_feature.tolist(),
        "neighbors": [
            {"kind": kind, "id": nid, "feature": row.tolist()}
            for (kind, nid), row in zip(obs.neighbor_keys, obs.neighbors)
        ],
    }
