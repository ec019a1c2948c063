#!/usr/bin/env python3
"""
Scene Storage - Manages persistent storage of scenes and the scene manifest
"""
import fnmatch
import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional

import numpy as np

from errors import SceneError
from trajectory_scenes import Scene, SceneStats, SceneTrack, scene_stats

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
SCENE_DIR = "scenes"


def scene_to_dict(scene: Scene) -> Dict[str, Any]:
    return {
        "scene_id": scene.scene_id,
        "dt": scene.dt,
        "n_steps": scene.n_steps,
        "t0": scene.t0,
        "tracks": [
            {
                "id": tr.id,
                "entry_step": tr.entry_step,
                "exit_step": tr.exit_step,
                "positions": tr.positions.tolist(),
                "velocities": tr.velocities.tolist(),
            }
            for tr in scene.tracks.values()
        ],
    }


def scene_from_dict(data: Dict[str, Any]) -> Scene:
    try:
        scene = Scene(data["scene_id"], float(data["dt"]), int(data["n_steps"]), t0=float(data.get("t0", 0.0)))
        for item in data["tracks"]:
            positions = np.asarray(item["positions"], dtype=float)
            velocities = np.asarray(item["velocities"], dtype=float)
            if positions.shape != (scene.n_steps + 1, 2) or velocities.shape != positions.shape:
                raise SceneError(f"track {item['id']!r} of {scene.scene_id} has shape {positions.shape}")
            scene.tracks[item["id"]] = SceneTrack(
                item["id"], positions, velocities,
                int(item.get("entry_step", 0)), int(item.get("exit_step", scene.n_steps)),
            )
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, SceneError):
            raise
        raise SceneError(f"malformed scene record: {e}") from e
    return scene


def _stats_dict(stats: SceneStats) -> Dict[str, float]:
    return {
        "max_objects": stats.max_objects,
        "mean_speed": stats.mean_speed,
        "mean_distance": stats.mean_distance,
    }


class SceneStorage:
    """Scene files under ``<root>/scenes`` plus a manifest at ``<root>/manifest.json``"""

    def __init__(self, root: Path):
        self.root = Path(root)
        self.scenes: List[Scene] = []
        self.manifest: Dict[str, Any] = {}

    @property
    def manifest_path(self) -> Path:
        return self.root / MANIFEST_NAME

    def build_manifest(self, source: Optional[str] = None) -> Dict[str, Any]:
        """Scene ids, step counts, track ids and per-scene statistics with their averages"""
        entries = []
        for scene in self.scenes:
            entries.append({
                "scene_id": scene.scene_id,
                "file": f"{SCENE_DIR}/{scene.scene_id}.json",
                "n_steps": scene.n_steps,
                "dt": scene.dt,
                "track_ids": scene.track_ids,
                "stats": _stats_dict(scene_stats(scene)),
            })
        averages = {
            key: float(np.mean([e["stats"][key] for e in entries])) if entries else 0.0
            for key in ("max_objects", "mean_speed", "mean_distance")
        }
        return {
            "source": source,
            "scene_count": len(entries),
            "scenes": entries,
            "averages": averages,
        }

    def save(self, source: Optional[str] = None) -> bool:
        """Write every scene file and the manifest"""
        try:
            scene_dir = self.root / SCENE_DIR
            scene_dir.mkdir(parents=True, exist_ok=True)
            for scene in self.scenes:
                with open(scene_dir / f"{scene.scene_id}.json", "w", encoding="utf-8") as f:
                    json.dump(scene_to_dict(scene), f)
            self.manifest = self.build_manifest(source)
            with open(self.manifest_path, "w", encoding="utf-8") as f:
                json.dump(self.manifest, f, indent=2, ensure_ascii=False)
            logger.info(f"Saved {len(self.scenes)} scenes to {self.root}")
            return True
        except Exception as e:
            logger.error(f"Failed to save scenes to {self.root}: {e}")
            return False

    def load(self, pattern: str = "*") -> bool:
        """Load the scenes listed in the manifest whose id matches the glob pattern"""
        try:
            if not self.manifest_path.exists():
                logger.error(f"Scene manifest {self.manifest_path} does not exist")
                return False
            with open(self.manifest_path, "r", encoding="utf-8") as f:
                self.manifest = json.load(f)

            self.scenes = []
            for entry in self.manifest.get("scenes", []):
                if not fnmatch.fnmatch(entry["scene_id"], pattern):
                    continue
                with open(self.root / entry["file"], "r", encoding="utf-8") as f:
                    self.scenes.append(scene_from_dict(json.load(f)))

            logger.info(f"Loaded {len(self.scenes)} scenes from {self.root}")
            return True
        except Exception as e:
            logger.error(f"Failed to load scenes from {self.root}: {e}")
            return False

    def get_all(self) -> List[Scene]:
        return list(self.scenes)

    def get_scene(self, scene_id: str) -> Optional[Scene]:
        for scene in self.scenes:
            if scene.scene_id == scene_id:
                return scene
        return None

    def add_scenes(self, scenes: List[Scene]) -> None:
        self.scenes.extend(scenes)
