"""
Shared fixtures for the label view manager tests
"""
import numpy as np
import pytest

from learning.agent_policy import NetworkConfig, Policy
from processing.sim_world import SimConfig
from processing.view_geometry import CameraSpec
from synthetic_generator import SynthParams, synth_generate
from trajectory_scenes import scene_from_positions


@pytest.fixture
def camera():
    return CameraSpec()


@pytest.fixture
def sim():
    return SimConfig()


def straight_scene(scene_id="line", n_steps=20, dt=0.1, tracks=None):
    """Objects moving at constant velocity; tracks maps id -> (start xz, velocity xz)"""
    tracks = tracks or {"a": ((-4.0, 0.0), (1.0, 0.0)), "b": ((4.0, 0.0), (-1.0, 0.0))}
    steps = np.arange(n_steps + 1)[:, None] * dt
    positions = {tid: np.asarray(start) + np.asarray(vel) * steps for tid, (start, vel) in tracks.items()}
    return scene_from_positions(scene_id, positions, dt)


@pytest.fixture
def line_scene():
    return straight_scene()


@pytest.fixture
def crossing_scene():
    return synth_generate("crossing_pair", SynthParams(), seed=0)


@pytest.fixture
def tiny_network():
    return NetworkConfig(hidden=16, score_hidden=8, activation="tanh", init_seed=3)


@pytest.fixture
def tiny_policy(tiny_network):
    return Policy(tiny_network, dtype=np.float64)
