#!/usr/bin/env python3
"""
View Geometry - Camera projection, ray space, screen-space occlusion and leader-line crossings
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, List, Optional, Sequence, Tuple

import numpy as np

from errors import GeometryError

if TYPE_CHECKING:
    from processing.sim_world import LabelState, ObjectState, WorldState

logger = logging.getLogger(__name__)

# Minimum overlap area (normalized screen units) that counts as an occlusion
EPS_OCC = 1e-6

Vec3 = Tuple[float, float, float]


@dataclass(frozen=True)
class CameraSpec:
    eye: Vec3 = (0.0, 6.0, 14.0)
    target: Vec3 = (0.0, 0.0, 0.0)
    up: Vec3 = (0.0, 1.0, 0.0)
    vertical_fov: float = 60.0
    aspect: float = 16.0 / 9.0
    near: float = 0.1
    far: float = 100.0

    def __post_init__(self):
        if self.near <= 0 or self.far <= self.near:
            raise GeometryError(f"need 0 < near < far (got near={self.near}, far={self.far})")
        if not 0 < self.vertical_fov < 180:
            raise GeometryError(f"vertical_fov must lie in (0, 180) degrees (got {self.vertical_fov})")
        if self.aspect <= 0:
            raise GeometryError(f"aspect must be positive (got {self.aspect})")
        if np.allclose(self.eye, self.target):
            raise GeometryError("camera eye and target coincide")


@dataclass(frozen=True, eq=False)
class ProjMatrix:
    """Combined view-projection matrix plus the camera basis it was built from"""
    m: np.ndarray        # (4, 4)
    eye: np.ndarray      # (3,)
    right: np.ndarray    # camera s axis
    up: np.ndarray       # camera u axis
    forward: np.ndarray  # camera f axis
    near: float

    def clip(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        homogeneous = np.hstack([pts, np.ones((len(pts), 1))])
        return homogeneous @ self.m.T

    def project(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Project world points to normalized screen coordinates.

        Returns:
            (uv, w): uv (n, 2) with origin bottom-left, w (n,) the clip-space depth;
            points with w < near lie behind the camera and carry meaningless uv
        """
        c = self.clip(points)
        w = c[:, 3]
        safe = np.where(np.abs(w) > 1e-12, w, 1e-12)
        uv = np.column_stack([(c[:, 0] / safe + 1.0) * 0.5, (c[:, 1] / safe + 1.0) * 0.5])
        return uv, w


@dataclass(frozen=True)
class RayPoint:
    u: float
    v: float
    z_cam: float
    in_front: bool = True

    def as_array(self) -> np.ndarray:
        return np.array([self.u, self.v, self.z_cam])


@dataclass(frozen=True)
class ScreenRect:
    u_min: float
    u_max: float
    v_min: float
    v_max: float
    depth: float

    @property
    def center(self) -> Tuple[float, float]:
        return (0.5 * (self.u_min + self.u_max), 0.5 * (self.v_min + self.v_max))

    @property
    def area(self) -> float:
        return (self.u_max - self.u_min) * (self.v_max - self.v_min)


@dataclass(frozen=True)
class Segment2:
    a: Tuple[float, float]
    b: Tuple[float, float]


def _normalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n < 1e-12:
        raise GeometryError(f"cannot normalize near-zero vector {v}")
    return v / n


def build_projection(camera: CameraSpec) -> ProjMatrix:
    """Right-handed look-at view composed with an OpenGL-style perspective projection"""
    eye = np.asarray(camera.eye, dtype=float)
    forward = _normalize(np.asarray(camera.target, dtype=float) - eye)
    side = np.cross(forward, np.asarray(camera.up, dtype=float))
    if np.linalg.norm(side) < 1e-9:
        raise GeometryError(f"camera up {camera.up} is parallel to the viewing direction")
    right = _normalize(side)
    up = np.cross(right, forward)

    view = np.eye(4)
    view[0, :3], view[0, 3] = right, -right @ eye
    view[1, :3], view[1, 3] = up, -up @ eye
    view[2, :3], view[2, 3] = -forward, forward @ eye

    f = 1.0 / math.tan(math.radians(camera.vertical_fov) / 2.0)
    n, fa = camera.near, camera.far
    proj = np.zeros((4, 4))
    proj[0, 0] = f / camera.aspect
    proj[1, 1] = f
    proj[2, 2] = (fa + n) / (n - fa)
    proj[2, 3] = 2.0 * fa * n / (n - fa)
    proj[3, 2] = -1.0
    return ProjMatrix(proj @ view, eye, right, up, forward, n)


@lru_cache(maxsize=32)
def projector_for(camera: CameraSpec) -> ProjMatrix:
    return build_projection(camera)


def to_ray_space(p_world, camera: CameraSpec) -> RayPoint:
    """(u, v) from the projection and z_cam = distance from the eye; in_front is False behind the near plane"""
    proj = projector_for(camera)
    p = np.asarray(p_world, dtype=float)
    uv, w = proj.project(p)
    z_cam = float(np.linalg.norm(p - proj.eye))
    in_front = bool(w[0] >= proj.near) and z_cam > 0
    return RayPoint(float(uv[0, 0]), float(uv[0, 1]), z_cam, in_front)


def rays(points: np.ndarray, camera: CameraSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized ray-space transform: (n, 3) array of (u, v, z_cam) and an in-front mask"""
    proj = projector_for(camera)
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    uv, w = proj.project(pts)
    z_cam = np.linalg.norm(pts - proj.eye, axis=1)
    return np.column_stack([uv, z_cam]), (w >= proj.near) & (z_cam > 0)


def billboard_axes(center, camera: CameraSpec) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Normal toward the eye plus the billboard's right and up axes"""
    proj = projector_for(camera)
    normal = _normalize(proj.eye - np.asarray(center, dtype=float))
    side = np.cross(np.asarray(camera.up, dtype=float), normal)
    if np.linalg.norm(side) < 1e-9:
        side = proj.right
    right = _normalize(side)
    return normal, right, np.cross(normal, right)


def label_corners(center, camera: CameraSpec, size: Tuple[float, float]) -> np.ndarray:
    _, right, up = billboard_axes(center, camera)
    c = np.asarray(center, dtype=float)
    hw, hh = size[0] / 2.0, size[1] / 2.0
    return np.array([c - right * hw - up * hh, c + right * hw - up * hh,
                     c + right * hw + up * hh, c - right * hw + up * hh])


def label_bottom_center(center, camera: CameraSpec, height: float) -> np.ndarray:
    _, _, up = billboard_axes(center, camera)
    return np.asarray(center, dtype=float) - up * (height / 2.0)


def object_center(pos, extent: Sequence[float]) -> np.ndarray:
    """Cube center of an object standing on the ground at pos"""
    return np.asarray(pos, dtype=float) + np.array([0.0, extent[1], 0.0])


def object_corners(pos, extent: Sequence[float]) -> np.ndarray:
    center = object_center(pos, extent)
    signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
    return center + signs * np.asarray(extent, dtype=float)


def _rect_from_corners(corners: np.ndarray, center: np.ndarray, camera: CameraSpec) -> Optional[ScreenRect]:
    proj = projector_for(camera)
    uv, w = proj.project(corners)
    if np.any(w < proj.near):
        return None
    return ScreenRect(
        float(uv[:, 0].min()), float(uv[:, 0].max()),
        float(uv[:, 1].min()), float(uv[:, 1].max()),
        float(np.linalg.norm(center - proj.eye)),
    )


def project_label(label: "LabelState", camera: CameraSpec,
                  size: Tuple[float, float] = (1.0, 0.5)) -> Optional[ScreenRect]:
    """Bounding rectangle of the label billboard; None when a corner is behind the camera"""
    center = np.asarray(label.world_pos, dtype=float)
    rect = _rect_from_corners(label_corners(center, camera, size), center, camera)
    if rect is None:
        logger.warning(f"Label of {label.target_id} is behind the camera; excluded from counts")
    return rect


def project_object(obj: "ObjectState", camera: CameraSpec,
                   extent: Sequence[float] = (0.25, 1.0, 0.25)) -> Optional[ScreenRect]:
    """Bounding rectangle of the object's 8 cube corners; None when a corner is behind the camera"""
    rect = _rect_from_corners(object_corners(obj.pos, extent), object_center(obj.pos, extent), camera)
    if rect is None:
        logger.warning(f"Object {obj.id} is behind the camera; excluded from counts")
    return rect


def overlap_area(a: ScreenRect, b: ScreenRect) -> float:
    du = min(a.u_max, b.u_max) - max(a.u_min, b.u_min)
    dv = min(a.v_max, b.v_max) - max(a.v_min, b.v_min)
    if du <= 0 or dv <= 0:
        return 0.0
    return du * dv


def occludes(a: ScreenRect, b: ScreenRect) -> bool:
    """a occludes b: their rectangles overlap by more than EPS_OCC and a is nearer"""
    return overlap_area(a, b) > EPS_OCC and a.depth < b.depth


def leader_segment(label: "LabelState", camera: CameraSpec, label_height: float = 0.5) -> Optional[Segment2]:
    """Projected leader line from the label's bottom-center to its anchor on the object"""
    proj = projector_for(camera)
    bottom = label_bottom_center(label.world_pos, camera, label_height)
    uv, w = proj.project(np.vstack([bottom, np.asarray(label.anchor, dtype=float)]))
    if np.any(w < proj.near):
        logger.warning(f"Leader line of {label.target_id} is behind the camera; excluded from counts")
        return None
    return Segment2((float(uv[0, 0]), float(uv[0, 1])), (float(uv[1, 0]), float(uv[1, 1])))


def _orient(p, q, r) -> float:
    return (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0])


def segments_intersect(s1: Segment2, s2: Segment2) -> bool:
    """Proper crossing in the open interior of both segments"""
    o1 = _orient(s1.a, s1.b, s2.a)
    o2 = _orient(s1.a, s1.b, s2.b)
    o3 = _orient(s2.a, s2.b, s1.a)
    o4 = _orient(s2.a, s2.b, s1.b)
    return o1 * o2 < 0 and o3 * o4 < 0


@dataclass
class SceneProjection:
    """Screen footprints of every active entity of one world, computed once per step"""
    label_rects: List[Optional[ScreenRect]]
    object_rects: List[Optional[ScreenRect]]
    segments: List[Optional[Segment2]]


def project_scene(world: "WorldState", camera: Optional[CameraSpec] = None) -> SceneProjection:
    camera = camera or world.camera
    cfg = world.config
    label_rects = [
        project_label(lb, camera, cfg.label_size) if lb.active else None for lb in world.labels
    ]
    object_rects = [
        project_object(ob, camera, cfg.object_extent) if ob.active else None for ob in world.objects
    ]
    segments = [
        leader_segment(lb, camera, cfg.label_size[1]) if lb.active else None for lb in world.labels
    ]
    return SceneProjection(label_rects, object_rects, segments)


def count_occlusions(world: "WorldState", camera: Optional[CameraSpec], i: int,
                     projection: Optional[SceneProjection] = None) -> int:
    """Objects (its own target included) and other labels that label i occludes"""
    projection = projection or project_scene(world, camera)
    rect = projection.label_rects[i]
    if rect is None:
        return 0
    count = sum(1 for other in projection.object_rects if other is not None and occludes(rect, other))
    count += sum(
        1 for j, other in enumerate(projection.label_rects)
        if j != i and other is not None and occludes(rect, other)
    )
    return count


def count_intersections(world: "WorldState", camera: Optional[CameraSpec], i: int,
                        projection: Optional[SceneProjection] = None) -> int:
    """Other labels' leader lines properly crossed by label i's leader line"""
    projection = projection or project_scene(world, camera)
    seg = projection.segments[i]
    if seg is None:
        return 0
    return sum(
        1 for j, other in enumerate(projection.segments)
        if j != i and other is not None and segments_intersect(seg, other)
    )
