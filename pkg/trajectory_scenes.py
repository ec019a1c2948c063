#!/usr/bin/env python3
"""
Trajectory Scenes - Split raw tracks into fixed-length scenes sampled at the decision rate
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.utils import shuffle

from errors import DataError, OutOfRangeError, ParameterError
from trajectory_importer import RawTrack

logger = logging.getLogger(__name__)

# Slack for comparing accumulated floating-point timestamps
TIME_TOL = 1e-9


@dataclass
class SceneTrack:
    """One entity resampled on the scene's decision grid"""
    id: str
    positions: np.ndarray    # (n_steps + 1, 2)
    velocities: np.ndarray   # (n_steps + 1, 2)
    entry_step: int
    exit_step: int

    def is_active(self, step: int) -> bool:
        return self.entry_step <= step <= self.exit_step


@dataclass
class Scene:
    scene_id: str
    dt: float
    n_steps: int
    tracks: Dict[str, SceneTrack] = field(default_factory=dict)
    t0: float = 0.0

    @property
    def duration(self) -> float:
        return self.n_steps * self.dt

    @property
    def track_ids(self) -> List[str]:
        return list(self.tracks.keys())

    def active_ids(self, step: int) -> List[str]:
        return [tid for tid, tr in self.tracks.items() if tr.is_active(step)]


@dataclass
class DatasetSplit:
    train: List[Scene]
    test: List[Scene]
    seed: int


@dataclass(frozen=True)
class SceneStats:
    """The per-scene columns of the dataset statistics table"""
    max_objects: int
    mean_speed: float
    mean_distance: float


def step_count(scene_len: float, dt: float) -> int:
    """Number of decision steps in a window; dt must divide scene_len"""
    if scene_len <= 0 or dt <= 0:
        raise ParameterError(f"scene_len and dt must be positive (got {scene_len}, {dt})")
    n = int(round(scene_len / dt))
    if n < 1 or abs(n * dt - scene_len) > 1e-9 * max(1.0, scene_len):
        raise ParameterError(f"dt={dt} does not divide scene_len={scene_len}")
    return n


def interpolate(track: RawTrack, times: Sequence[float]) -> np.ndarray:
    """Linearly interpolated positions at the query times"""
    query = np.asarray(times, dtype=float)
    if query.size and (query.min() < track.t_start - TIME_TOL or query.max() > track.t_end + TIME_TOL):
        raise OutOfRangeError(
            f"track {track.id!r} covers [{track.t_start}, {track.t_end}], "
            f"query spans [{query.min()}, {query.max()}]"
        )
    query = np.clip(query, track.t_start, track.t_end)
    return np.column_stack([
        np.interp(query, track.times, track.positions[:, 0]),
        np.interp(query, track.times, track.positions[:, 1]),
    ])


def finite_difference(positions: np.ndarray, dt: float) -> np.ndarray:
    """Backward differences; step 0 copies step 1"""
    velocities = np.zeros_like(positions)
    if len(positions) > 1:
        velocities[1:] = (positions[1:] - positions[:-1]) / dt
        velocities[0] = velocities[1]
    return velocities


def resample(track: RawTrack, dt: float, t0: Optional[float] = None,
             n_steps: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """
    Resample a track on the grid t0 + k*dt, k = 0..n_steps.

    Returns:
        (positions, velocities), each (n_steps + 1, 2)
    """
    if dt <= 0:
        raise ParameterError(f"dt must be positive (got {dt})")
    if t0 is None:
        t0 = track.t_start
    if n_steps is None:
        n_steps = int(math.floor((track.t_end - t0) / dt + TIME_TOL))
    times = t0 + np.arange(n_steps + 1) * dt
    positions = interpolate(track, times)
    return positions, finite_difference(positions, dt)


def _covers(track: RawTrack, t0: float, t1: float) -> bool:
    return track.t_start <= t0 + TIME_TOL and track.t_end >= t1 - TIME_TOL


def _overlaps(track: RawTrack, t0: float, t1: float) -> bool:
    return track.t_start < t1 - TIME_TOL and track.t_end > t0 + TIME_TOL


def _partial_track(track: RawTrack, t0: float, t1: float, dt: float, n_steps: int) -> Optional[SceneTrack]:
    """Resample a track that may enter or leave inside the window"""
    entry = max(0, int(math.ceil((max(track.t_start, t0) - t0) / dt - TIME_TOL)))
    exit_ = min(n_steps, int(math.floor((min(track.t_end, t1) - t0) / dt + TIME_TOL)))
    if exit_ - entry < 1:
        return None
    active = interpolate(track, t0 + np.arange(entry, exit_ + 1) * dt)
    positions = np.empty((n_steps + 1, 2))
    positions[entry:exit_ + 1] = active
    positions[:entry] = active[0]
    positions[exit_ + 1:] = active[-1]
    velocities = np.zeros_like(positions)
    velocities[entry:exit_ + 1] = finite_difference(active, dt)
    return SceneTrack(track.id, positions, velocities, entry, exit_)


def split_scenes(tracks: Sequence[RawTrack], scene_len: float, dt: float,
                 dynamic_population: bool = False, exclude: Iterable[str] = (),
                 prefix: str = "scene") -> List[Scene]:
    """
    Cut a corpus into consecutive, non-overlapping windows of scene_len seconds.

    Windows are numbered from the earliest sample. With a fixed roster every track
    that overlaps a window must cover it completely, otherwise the window is
    dropped. With a dynamic population, partially covering tracks enter and exit
    inside the window. Scene ids listed in ``exclude`` are dropped as well.
    """
    if not tracks:
        return []
    n_steps = step_count(scene_len, dt)
    excluded = set(exclude)
    t_min = min(tr.t_start for tr in tracks)
    t_max = max(tr.t_end for tr in tracks)
    n_windows = int(math.floor((t_max - t_min) / scene_len + TIME_TOL))

    scenes = []
    for w in range(n_windows):
        scene_id = f"{prefix}-{w:03d}"
        if scene_id in excluded:
            logger.info(f"Excluding {scene_id} by request")
            continue
        t0 = t_min + w * scene_len
        t1 = t0 + scene_len
        overlapping = [tr for tr in tracks if _overlaps(tr, t0, t1)]
        if not overlapping:
            continue

        scene = Scene(scene_id, dt, n_steps, t0=t0)
        if dynamic_population:
            for tr in overlapping:
                scene_track = _partial_track(tr, t0, t1, dt, n_steps)
                if scene_track is not None:
                    scene.tracks[tr.id] = scene_track
            if not scene.tracks:
                continue
        else:
            if not all(_covers(tr, t0, t1) for tr in overlapping):
                logger.debug(f"Dropping {scene_id}: a track covers less than {scene_len} s")
                continue
            for tr in overlapping:
                positions, velocities = resample(tr, dt, t0, n_steps)
                scene.tracks[tr.id] = SceneTrack(tr.id, positions, velocities, 0, n_steps)
        scenes.append(scene)

    logger.info(f"Split {len(tracks)} tracks into {len(scenes)} scenes of {n_steps} steps")
    return scenes


def train_test_split(scenes: Sequence[Scene], ratio: float, seed: int) -> DatasetSplit:
    """
    Seeded shuffle, then max(1, floor(ratio * n)) training scenes and the rest for testing.
    """
    if not 0 < ratio < 1:
        raise ParameterError(f"ratio must lie in (0, 1) (got {ratio})")
    n = len(scenes)
    if n == 0:
        raise DataError("cannot split an empty scene list")
    n_train = max(1, int(math.floor(ratio * n + TIME_TOL)))
    shuffled = shuffle(list(scenes), random_state=seed)
    return DatasetSplit(list(shuffled[:n_train]), list(shuffled[n_train:]), seed)


def scene_from_positions(scene_id: str, positions: Dict[str, np.ndarray], dt: float) -> Scene:
    """Wrap per-step positions (n_steps + 1, 2) into a fully populated scene"""
    n_steps = None
    scene = None
    for track_id, pos in positions.items():
        pos = np.asarray(pos, dtype=float)
        if n_steps is None:
            n_steps = len(pos) - 1
            scene = Scene(scene_id, dt, n_steps)
        elif len(pos) - 1 != n_steps:
            raise ParameterError(f"track {track_id!r} has {len(pos) - 1} steps, expected {n_steps}")
        scene.tracks[track_id] = SceneTrack(track_id, pos, finite_difference(pos, dt), 0, n_steps)
    if scene is None:
        raise ParameterError("scene needs at least one track")
    return scene


def scene_stats(scene: Scene) -> SceneStats:
    """Max concurrent objects, mean speed (m/s) and mean moving distance (m) per object"""
    active_counts = [len(scene.active_ids(k)) for k in range(scene.n_steps + 1)]
    speeds = []
    distances = []
    for tr in scene.tracks.values():
        window = slice(tr.entry_step, tr.exit_step + 1)
        speeds.append(np.linalg.norm(tr.velocities[window], axis=1))
        steps = np.diff(tr.positions[window], axis=0)
        distances.append(float(np.linalg.norm(steps, axis=1).sum()))
    all_speeds = np.concatenate(speeds) if speeds else np.zeros(0)
    return SceneStats(
        max_objects=max(active_counts) if active_counts else 0,
        mean_speed=float(all_speeds.mean()) if all_speeds.size else 0.0,
        mean_distance=float(np.mean(distances)) if distances else 0.0,
    )
