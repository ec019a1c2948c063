#!/usr/bin/env python3
"""
Settings Manager - Resolves run settings from defaults, a TOML file and command-line overrides
"""
import copy
import hashlib
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import Any, Dict, Optional

from errors import ConfigError

logger = logging.getLogger(__name__)

RESOLVED_NAME = "resolved_config.json"


def fingerprint(settings: Dict[str, Any]) -> str:
    """SHA-256 of the canonical JSON form of a settings dictionary"""
    canonical = json.dumps(settings, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class SettingsManager:
    """Manages run settings storage and retrieval"""

    def __init__(self, settings_path: Optional[Path] = None):
        self.settings_path = Path(settings_path) if settings_path is not None else None
        self.settings: Dict[str, Any] = self._get_default_settings()

    def load(self) -> bool:
        """Merge the TOML file over the defaults; unknown sections and keys are ignored with a warning"""
        self.settings = self._get_default_settings()
        if self.settings_path is None:
            logger.info("No configuration file given, using defaults")
            return True
        try:
            with open(self.settings_path, "rb") as f:
                loaded = tomllib.load(f)
        except (OSError, tomllib.TOMLDecodeError) as e:
            logger.error(f"Failed to load settings from {self.settings_path}: {e}")
            return False
        self._merge(self.settings, loaded, "")
        logger.info(f"Loaded settings from {self.settings_path}")
        return True

    def _merge(self, target: Dict[str, Any], updates: Dict[str, Any], prefix: str) -> None:
        for key, value in updates.items():
            name = f"{prefix}{key}"
            if key not in target:
                logger.warning(f"Unknown setting {name!r} ignored")
                continue
            if isinstance(target[key], dict):
                if not isinstance(value, dict):
                    raise ConfigError(f"setting {name!r} must be a table")
                self._merge(target[key], value, f"{name}.")
            else:
                target[key] = value

    def save(self, out_dir: Path) -> bool:
        """Write the resolved settings as resolved_config.json into out_dir"""
        try:
            path = Path(out_dir) / RESOLVED_NAME
            path.parent.mkdir(parents=True, exist_ok=True)
            with open(path, "w", encoding="utf-8") as f:
                json.dump(self.settings, f, indent=2, ensure_ascii=False)
            logger.info(f"Saved resolved settings to {path} ({self.fingerprint()[:12]})")
            return True
        except OSError as e:
            logger.error(f"Failed to save settings: {e}")
            return False

    def get(self, section: str, key: Optional[str] = None, default: Any = None) -> Any:
        """Get a section, or one value of it"""
        values = self.settings.get(section, default if key is None else {})
        if key is None:
            return values
        return values.get(key, default)

    def set(self, section: str, key: str, value: Any) -> None:
        """Override one value; the key must exist"""
        if section not in self.settings or key not in self.settings[section]:
            raise ConfigError(f"unknown setting {section}.{key}")
        self.settings[section][key] = value

    def get_all(self) -> Dict[str, Any]:
        return copy.deepcopy(self.settings)

    def update(self, updates: Dict[str, Dict[str, Any]]) -> None:
        """Apply overrides given as {section: {key: value}}"""
        for section, values in updates.items():
            for key, value in values.items():
                self.set(section, key, value)

    def fingerprint(self) -> str:
        return fingerprint(self.settings)

    def _get_default_settings(self) -> Dict[str, Any]:
        """Desk-scale defaults"""
        return {
            "sim": {
                "dt": 0.1,
                "max_acc": 3.0,
                "plane_side": 3.0,
                "plane_height": 0.5,
                "label_size": [1.0, 0.5],
                "object_extent": [0.25, 1.0, 0.25],
                "action_mode": "acceleration",
                "max_speed": 2.0,
            },
            "reward": {
                "occ_coef": 0.1,
                "int_coef": 0.1,
                "acc_bonus": 0.001,
                "move_penalty": 0.0,
            },
            "ppo": {
                "gamma": 0.99,
                "lambda": 0.95,
                "clip": 0.2,
                "entropy_coef": 0.005,
                "value_coef": 0.5,
                "epochs": 3,
                "buffer_size": 8192,
                "batch_size": 256,
                "lr": 3e-4,
                "total_steps": 300_000,
                "episode_len": 150,
                "max_grad_norm": 0.5,
                "abort_penalty": 0.5,
            },
            "curriculum": {
                "start": 2,
                "end": 2,
                "step_size": 2,
            },
            "data": {
                "profile": "desk",
                "scene_len": 15.0,
                "train_ratio": 0.8,
                "dynamic_population": False,
                "exclude": [],
                "synth_kind": "crossing_pair",
                "synth_duration": 400.0,
                "synth_interval": 0.04,
                "synth_scenes": 60,
                "synth": {
                    "count": 2,
                    "speed_range": [1.2, 2.0],
                    "bounds": [-15.0, 15.0, -8.0, 8.0],
                    "radius": 3.0,
                    "center": [0.0, 0.0],
                    "turn_std": 0.8,
                },
            },
            "camera": {
                "eye": [0.0, 6.0, 14.0],
                "target": [0.0, 0.0, 0.0],
                "up": [0.0, 1.0, 0.0],
                "vertical_fov": 60.0,
                "aspect": 16.0 / 9.0,
                "near": 0.1,
                "far": 100.0,
            },
            "force": {
                "k_repel": 0.02,
                "repel_radius": 0.15,
                "k_spring": 4.0 / 60.0,
                "damping": 4.0 / 60.0,
                "gain": 60.0,
            },
            "encoder": {
                "ref_speed": 5.0,
            },
            "network": {
                "hidden": 128,
                "score_hidden": 64,
                "activation": "relu",
                "init_seed": 0,
            },
            "run": {
                "seed": 0,
                "workers": 4,
                "single_thread": False,
                "eval_interval": 1,
                "eval_scenes": 0,
                "checkpoint_interval": 50_000,
            },
        }
