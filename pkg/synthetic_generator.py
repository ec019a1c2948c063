#!/usr/bin/env python3
"""
Synthetic Generator - Stand-in trajectory scenarios (crossing pair, roundabout, lanes, random walk)
"""
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from errors import ParameterError
from trajectory_importer import RawTrack
from trajectory_scenes import Scene, scene_from_positions, step_count

logger = logging.getLogger(__name__)

SCENARIO_KINDS = ("crossing_pair", "roundabout", "lane_drill", "random_walk")


@dataclass(frozen=True)
class SynthParams:
    count: int = 2
    speed_range: Tuple[float, float] = (1.2, 2.0)
    bounds: Tuple[float, float, float, float] = (-15.0, 15.0, -8.0, 8.0)  # xmin, xmax, zmin, zmax
    radius: float = 3.0
    center: Tuple[float, float] = (0.0, 0.0)
    turn_std: float = 0.8   # heading noise of the random walk, rad / sqrt(s)

    @classmethod
    def from_dict(cls, values: Dict) -> "SynthParams":
        known = {k: v for k, v in values.items() if k in cls.__dataclass_fields__}
        for key in ("speed_range", "bounds", "center"):
            if key in known:
                known[key] = tuple(float(v) for v in known[key])
        return cls(**known)


def _validate(kind: str, params: SynthParams) -> None:
    if kind not in SCENARIO_KINDS:
        raise ParameterError(f"unknown scenario kind {kind!r}; expected one of {', '.join(SCENARIO_KINDS)}")
    if params.count <= 0:
        raise ParameterError(f"object count must be positive (got {params.count})")
    lo, hi = params.speed_range
    if lo < 0 or hi < lo:
        raise ParameterError(f"invalid speed range {params.speed_range}")
    if kind != "random_walk" and lo <= 0:
        raise ParameterError(f"{kind} needs positive speeds (got {params.speed_range})")
    xmin, xmax, zmin, zmax = params.bounds
    if xmax <= xmin or zmax <= zmin:
        raise ParameterError(f"empty arena bounds {params.bounds}")


def _fold(values: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """Reflect values into [lo, hi] as a triangle wave"""
    length = hi - lo
    unfolded = np.mod(values - lo, 2 * length)
    return lo + np.where(unfolded <= length, unfolded, 2 * length - unfolded)


def _fold_into(points: np.ndarray, bounds: Tuple[float, float, float, float]) -> np.ndarray:
    xmin, xmax, zmin, zmax = bounds
    return np.column_stack([_fold(points[:, 0], xmin, xmax), _fold(points[:, 1], zmin, zmax)])


def _crossing_pair(params: SynthParams, times: np.ndarray, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    """Two objects on converging lines that meet at mid-scene; the rear one is faster"""
    if params.count != 2:
        raise ParameterError(f"crossing_pair generates exactly 2 objects (got count={params.count})")
    slow, fast = params.speed_range
    xmin, xmax, zmin, zmax = params.bounds
    t_mid = 0.5 * (times[0] + times[-1])
    theta = math.radians(rng.uniform(10.0, 25.0))
    heading = rng.choice([-1.0, 1.0])
    side = rng.choice([-1.0, 1.0])
    reach = fast * (t_mid - times[0])
    # Keep the whole crossing inside the arena when it fits, otherwise paths fold at the walls
    half_x = min(reach * math.cos(theta), 0.5 * (xmax - xmin))
    half_z = min(reach * math.sin(theta), 0.5 * (zmax - zmin))
    center = np.array([rng.uniform(xmin + half_x, xmax - half_x), rng.uniform(zmin + half_z, zmax - half_z)])
    dir_fast = np.array([heading * math.cos(theta), side * math.sin(theta)])
    dir_slow = np.array([heading * math.cos(theta), -side * math.sin(theta)])
    lag = (times - t_mid)[:, None]
    return {
        "p0": _fold_into(center + dir_fast * fast * lag, params.bounds),
        "p1": _fold_into(center + dir_slow * slow * lag, params.bounds),
    }


def _roundabout(params: SynthParams, times: np.ndarray, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    """Objects evenly spaced on a circle, sharing one angular speed"""
    if params.radius <= 0:
        raise ParameterError(f"roundabout radius must be positive (got {params.radius})")
    xmin, xmax, zmin, zmax = params.bounds
    cx, cz = params.center
    r = params.radius
    if cx - r < xmin or cx + r > xmax or cz - r < zmin or cz + r > zmax:
        raise ParameterError(f"circle of radius {r} around {params.center} leaves the arena {params.bounds}")
    speed = rng.uniform(*params.speed_range)
    omega = rng.choice([-1.0, 1.0]) * speed / r
    phase0 = rng.uniform(0.0, 2 * math.pi)
    tracks = {}
    for k in range(params.count):
        angle = phase0 + 2 * math.pi * k / params.count + omega * (times - times[0])
        tracks[f"r{k}"] = np.column_stack([cx + r * np.cos(angle), cz + r * np.sin(angle)])
    return tracks


def _lane_drill(params: SynthParams, times: np.ndarray, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    """One object per lane along x, bouncing between the arena's x bounds"""
    xmin, xmax, zmin, zmax = params.bounds
    length = xmax - xmin
    lane_width = (zmax - zmin) / params.count
    tracks = {}
    for k in range(params.count):
        speed = rng.uniform(*params.speed_range)
        sign = rng.choice([-1.0, 1.0])
        start = rng.uniform(0.0, length)
        x = _fold(xmin + start + sign * speed * (times - times[0]), xmin, xmax)
        z = np.full_like(x, zmin + (k + 0.5) * lane_width)
        tracks[f"l{k}"] = np.column_stack([x, z])
    return tracks


def _reflect(value: float, lo: float, hi: float) -> Tuple[float, bool]:
    if value < lo:
        return 2 * lo - value, True
    if value > hi:
        return 2 * hi - value, True
    return value, False


def _random_walk(params: SynthParams, times: np.ndarray, rng: np.random.Generator) -> Dict[str, np.ndarray]:
    """Constant-speed walkers with Brownian heading, reflected at the arena walls"""
    xmin, xmax, zmin, zmax = params.bounds
    tracks = {}
    for k in range(params.count):
        speed = rng.uniform(*params.speed_range)
        heading = rng.uniform(0.0, 2 * math.pi)
        x, z = rng.uniform(xmin, xmax), rng.uniform(zmin, zmax)
        out = np.empty((len(times), 2))
        out[0] = (x, z)
        for i in range(1, len(times)):
            step = times[i] - times[i - 1]
            heading += rng.normal(0.0, params.turn_std * math.sqrt(step))
            x += speed * step * math.cos(heading)
            z += speed * step * math.sin(heading)
            x, flip_x = _reflect(x, xmin, xmax)
            z, flip_z = _reflect(z, zmin, zmax)
            if flip_x:
                heading = math.pi - heading
            if flip_z:
                heading = -heading
            out[i] = (x, z)
        tracks[f"w{k}"] = out
    return tracks


_GENERATORS: Dict[str, Callable[[SynthParams, np.ndarray, np.random.Generator], Dict[str, np.ndarray]]] = {
    "crossing_pair": _crossing_pair,
    "roundabout": _roundabout,
    "lane_drill": _lane_drill,
    "random_walk": _random_walk,
}


def synth_generate(kind: str, params: SynthParams, seed: int, scene_len: float = 15.0,
                   dt: float = 0.1, scene_id: Optional[str] = None) -> Scene:
    """
    Generate one synthetic scene sampled directly on the decision grid.

    Args:
        kind: one of SCENARIO_KINDS
        params: object count, speed range, arena bounds and shape parameters
        seed: generator seed
        scene_len: scene length in seconds
        dt: decision interval in seconds

    Returns:
        Scene: fully populated scene of scene_len / dt steps
    """
    _validate(kind, params)
    n_steps = step_count(scene_len, dt)
    rng = np.random.default_rng(seed)
    times = np.arange(n_steps + 1) * dt
    positions = _GENERATORS[kind](params, times, rng)
    return scene_from_positions(scene_id or f"{kind}-s{seed}", positions, dt)


def synth_scenes(kind: str, params: SynthParams, n_scenes: int, seed: int,
                 scene_len: float = 15.0, dt: float = 0.1) -> List[Scene]:
    """n_scenes independent scenes, seeded seed, seed + 1, ..."""
    return [
        synth_generate(kind, params, seed + i, scene_len, dt, scene_id=f"{kind}-{i:03d}")
        for i in range(n_scenes)
    ]


def synth_corpus(kind: str, params: SynthParams, duration: float, seed: int,
                 interval: float = 0.04) -> List[RawTrack]:
    """Raw tracks at the data sampling interval, as a recorded corpus would provide them"""
    _validate(kind, params)
    n_samples = int(round(duration / interval)) + 1
    rng = np.random.default_rng(seed)
    times = np.arange(n_samples) * interval
    positions = _GENERATORS[kind](params, times, rng)
    logger.info(f"Generated {kind} corpus: {len(positions)} tracks, {n_samples} samples each")
    return [RawTrack(track_id, times.copy(), pos) for track_id, pos in positions.items()]
