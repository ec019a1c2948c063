import io
import struct

import numpy as np
import pytest

from errors import CheckpointError, CheckpointVersionError, CorruptCheckpointError, IncompatibleCheckpointError
from learning.agent_policy import NetworkConfig, Policy
from learning.checkpoint import (
    FORMAT_VERSION,
    MAGIC,
    load_checkpoint,
    model_fingerprint,
    read_tensors,
    save_checkpoint,
    write_tensors,
)
from processing.sim_world import init_world
from processing.state_encoder import encode_observation
from tests.conftest import straight_scene

SETTINGS = {"network": {"hidden": 16, "score_hidden": 8, "activation": "tanh", "init_seed": 3},
            "encoder": {"ref_speed": 5.0}, "ppo": {"lr": 3e-4}}


@pytest.fixture
def trained_policy(tiny_network):
    policy = Policy(tiny_network)
    rng = np.random.default_rng(0)
    for name in policy.store.names():
        policy.store.params[name][...] = rng.normal(size=policy.store.params[name].shape)
    return policy


def test_reloaded_policy_acts_identically(tmp_path, trained_policy, tiny_network, sim, camera):
    path = tmp_path / "policy.ckpt"
    fp = model_fingerprint(SETTINGS)
    save_checkpoint(trained_policy, str(path), fp)
    loaded = load_checkpoint(str(path), tiny_network, fp)
    for name in trained_policy.store.names():
        np.testing.assert_array_equal(loaded.store.params[name], trained_policy.store.params[name])
    obs = encode_observation(init_world(straight_scene(), sim, camera), None, 0)
    a = trained_policy.act(obs, mode="deterministic")
    b = loaded.act(obs, mode="deterministic")
    np.testing.assert_array_equal(a.action.a, b.action.a)
    assert a.value == b.value


def test_fingerprint_covers_only_model_sections():
    changed_lr = dict(SETTINGS, ppo={"lr": 1e-3})
    changed_width = dict(SETTINGS, network=dict(SETTINGS["network"], hidden=32))
    assert model_fingerprint(changed_lr) == model_fingerprint(SETTINGS)
    assert model_fingerprint(changed_width) != model_fingerprint(SETTINGS)


def test_fingerprint_mismatch_is_incompatible(tmp_path, trained_policy, tiny_network):
    path = tmp_path / "policy.ckpt"
    save_checkpoint(trained_policy, str(path), "a" * 64)
    with pytest.raises(IncompatibleCheckpointError):
        load_checkpoint(str(path), tiny_network, "b" * 64)


def test_shape_mismatch_is_incompatible(tmp_path, trained_policy):
    path = tmp_path / "policy.ckpt"
    save_checkpoint(trained_policy, str(path), "a" * 64)
    with pytest.raises(IncompatibleCheckpointError):
        load_checkpoint(str(path), NetworkConfig(hidden=8, score_hidden=8, activation="tanh"))


def test_bad_magic(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"not a checkpoint at all")
    with pytest.raises(CorruptCheckpointError):
        load_checkpoint(str(path))


def test_truncated_file():
    buffer = io.BytesIO()
    write_tensors(buffer, {"w": np.ones((2, 3))}, "f" * 64)
    with pytest.raises(CorruptCheckpointError):
        read_tensors(io.BytesIO(buffer.getvalue()[:-4]))


def test_future_version_needs_migration():
    buffer = io.BytesIO()
    buffer.write(MAGIC)
    buffer.write(struct.pack("<IH", FORMAT_VERSION + 1, 0))
    buffer.seek(0)
    with pytest.raises(CheckpointVersionError):
        read_tensors(buffer)


def test_missing_file(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(str(tmp_path / "missing.ckpt"))


def test_tensors_round_trip_bit_exact():
    tensors = {"b": np.array([1.5, -2.25], dtype=np.float32), "a/W": np.arange(6, dtype=np.float32).reshape(2, 3)}
    buffer = io.BytesIO()
    write_tensors(buffer, tensors, "c" * 64)
    buffer.seek(0)
    back, fp = read_tensors(buffer)
    assert fp == "c" * 64
    assert sorted(back) == ["a/W", "b"]
    for name, value in tensors.items():
        np.testing.assert_array_equal(back[name], value)
