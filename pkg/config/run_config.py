#!/usr/bin/env python3
"""
Run Configuration - Typed, validated view of the resolved settings
"""
import logging
from dataclasses import dataclass
from typing import Any, Dict, Tuple

from controllers.baselines import ForceConfig
from errors import ConfigError, GeometryError
from learning.agent_policy import NetworkConfig
from learning.curriculum import CurriculumSchedule
from learning.neural_core import ACTIVATIONS
from learning.ppo_trainer import PpoConfig
from processing.reward_metrics import RewardConfig
from processing.sim_world import SimConfig
from processing.state_encoder import EncoderConfig
from processing.view_geometry import CameraSpec
from settings_manager import SettingsManager, fingerprint
from synthetic_generator import SCENARIO_KINDS, SynthParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DataConfig:
    profile: str = "desk"
    scene_len: float = 15.0
    train_ratio: float = 0.8
    dynamic_population: bool = False
    exclude: Tuple[str, ...] = ()
    synth_kind: str = "crossing_pair"
    synth_duration: float = 400.0
    synth_interval: float = 0.04
    synth_scenes: int = 60         # 0 splits one synth_duration corpus instead
    synth: SynthParams = SynthParams()

    def __post_init__(self):
        if self.scene_len <= 0 or self.synth_duration <= 0 or self.synth_interval <= 0:
            raise ConfigError(f"data durations must be positive: {self}")
        if self.synth_scenes < 0:
            raise ConfigError(f"synth_scenes must be non-negative (got {self.synth_scenes})")
        if not 0 < self.train_ratio < 1:
            raise ConfigError(f"train_ratio must be in (0, 1) (got {self.train_ratio})")
        if self.synth_kind not in SCENARIO_KINDS:
            raise ConfigError(f"unknown synth_kind {self.synth_kind!r}; expected one of {', '.join(SCENARIO_KINDS)}")


@dataclass(frozen=True)
class RunSettings:
    seed: int = 0
    workers: int = 4
    single_thread: bool = False
    eval_interval: int = 1        # updates between held-out evaluations
    eval_scenes: int = 0          # 0 evaluates every test scene
    checkpoint_interval: int = 50_000

    def __post_init__(self):
        if self.workers <= 0 or self.eval_interval <= 0:
            raise ConfigError(f"workers and eval_interval must be positive: {self}")
        if self.eval_scenes < 0 or self.checkpoint_interval < 0:
            raise ConfigError(f"eval_scenes and checkpoint_interval must be non-negative: {self}")


@dataclass(frozen=True)
class RunConfig:
    sim: SimConfig
    reward: RewardConfig
    ppo: PpoConfig
    curriculum: CurriculumSchedule
    data: DataConfig
    camera: CameraSpec
    force: ForceConfig
    encoder: EncoderConfig
    network: NetworkConfig
    run: RunSettings
    settings: Dict[str, Any]
    fingerprint: str


def _tuple(values) -> Tuple[float, ...]:
    return tuple(float(v) for v in values)


def build_run_config(settings: Dict[str, Any]) -> RunConfig:
    """
    Build the typed configuration from a resolved settings dictionary.

    Raises:
        ConfigError: a value has the wrong type or violates an invariant
    """
    try:
        sim = dict(settings["sim"])
        sim["label_size"] = _tuple(sim["label_size"])
        sim["object_extent"] = _tuple(sim["object_extent"])
        ppo = dict(settings["ppo"])
        ppo["lam"] = ppo.pop("lambda")
        camera = dict(settings["camera"])
        for key in ("eye", "target", "up"):
            camera[key] = _tuple(camera[key])
        data = dict(settings["data"])
        data["exclude"] = tuple(data["exclude"])
        data["synth"] = SynthParams.from_dict(data["synth"])
        network = NetworkConfig(**settings["network"])
        if network.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {network.activation!r}; expected one of {', '.join(ACTIVATIONS)}")
        ppo_config = PpoConfig(**ppo)
        return RunConfig(
            sim=SimConfig(**sim),
            reward=RewardConfig(**settings["reward"]),
            ppo=ppo_config,
            curriculum=CurriculumSchedule(total_steps=ppo_config.total_steps, **settings["curriculum"]),
            data=DataConfig(**data),
            camera=CameraSpec(**camera),
            force=ForceConfig(**settings["force"]),
            encoder=EncoderConfig(**settings["encoder"]),
            network=network,
            run=RunSettings(**settings["run"]),
            settings=settings,
            fingerprint=fingerprint(settings),
        )
    except GeometryError as e:
        raise ConfigError(f"invalid camera: {e}") from e
    except (KeyError, TypeError) as e:
        raise ConfigError(f"malformed settings: {e}") from e


def load_run_config(path=None, overrides: Dict[str, Dict[str, Any]] = None) -> Tuple[SettingsManager, RunConfig]:
    """Defaults, then the TOML file, then overrides"""
    manager = SettingsManager(path)
    if not manager.load():
        raise ConfigError(f"cannot read configuration {path}")
    if overrides:
        manager.update(overrides)
    return manager, build_run_config(manager.get_all())
