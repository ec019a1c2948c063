import numpy as np
import pytest

from controllers.baselines import (
    ForceConfig,
    ForceController,
    NoneController,
    force_acceleration,
    force_controller,
    none_controller,
    screen_repulsion,
)
from controllers.policy_controller import PolicyController
from controllers.registry import get_controller_by_name, list_controller_names, needs_checkpoint
from errors import ConfigError
from processing.sim_world import SimConfig, init_world, step, with_label_offset
from tests.conftest import straight_scene


def still(positions):
    return {tid: (xz, (0.0, 0.0)) for tid, xz in positions.items()}


def test_registry():
    assert list_controller_names() == ["none", "force", "rl"]
    assert isinstance(get_controller_by_name("none"), NoneController)
    assert isinstance(get_controller_by_name("force", force=ForceConfig(gain=1.0)), ForceController)
    assert get_controller_by_name("hedgehog") is None
    assert needs_checkpoint("rl") and not needs_checkpoint("force")
    with pytest.raises(ConfigError):
        get_controller_by_name("rl")


def test_isolated_label_at_home_stays_put(sim, camera):
    world = init_world(straight_scene(tracks=still({"a": (0.0, 0.0)})), sim, camera)
    np.testing.assert_array_equal(force_controller(world, camera, 0).a, [0.0, 0.0])


def test_spring_pulls_a_displaced_label_home(sim, camera):
    world = init_world(straight_scene(tracks=still({"a": (0.0, 0.0)})), sim, camera)
    world = with_label_offset(world, 0, (1.0, 0.0))
    accel = force_acceleration(world, camera, 0, ForceConfig(k_spring=2.0, damping=0.0, gain=1.0))
    np.testing.assert_allclose(accel, [-2.0, 0.0])


def test_damped_spring_without_neighbors(sim, camera):
    world = init_world(straight_scene(tracks=still({"a": (0.0, 0.0)})), sim, camera)
    world = with_label_offset(world, 0, (0.3, -0.2), offset_vel=(0.1, 0.5))
    cfg = ForceConfig()
    expected = cfg.gain * (-cfg.k_spring * np.array([0.3, -0.2]) - cfg.damping * np.array([0.1, 0.5]))
    np.testing.assert_allclose(force_acceleration(world, camera, 0, cfg), expected, atol=1e-12)


def test_gain_scales_the_spring_into_saturation(sim, camera):
    world = init_world(straight_scene(tracks=still({"a": (0.0, 0.0)})), sim, camera)
    world = with_label_offset(world, 0, (1.0, 0.0))
    accel = force_acceleration(world, camera, 0)
    assert accel[0] == pytest.approx(-4.0)
    action = force_controller(world, camera, 0)
    np.testing.assert_allclose(action.a, [-sim.max_acc, 0.0], atol=1e-12)


def test_neighbor_on_the_left_pushes_right(sim, camera):
    world = init_world(straight_scene(tracks=still({"a": (0.0, 0.0), "b": (-0.3, 0.0)})), sim, camera)
    assert screen_repulsion(world, camera, 0, ForceConfig())[0] > 0
    assert force_controller(world, camera, 0).a[0] > 0


def test_action_is_clamped(sim, camera):
    world = init_world(straight_scene(tracks=still({"a": (0.0, 0.0), "b": (-0.05, 0.0)})), sim, camera)
    action = force_controller(world, camera, 0, ForceConfig(gain=1e6))
    assert np.all(np.abs(action.a) <= sim.max_acc)


def test_mirrored_scene_mirrors_the_action(sim, camera):
    left = {"a": (0.4, -0.5), "b": (-0.2, 0.0), "c": (1.0, 0.6)}
    right = {tid: (-x, z) for tid, (x, z) in left.items()}
    a = init_world(straight_scene(tracks=still(left)), sim, camera)
    b = init_world(straight_scene(tracks=still(right)), sim, camera)
    accel_a = force_acceleration(a, camera, 0)
    accel_b = force_acceleration(b, camera, 0)
    assert accel_a[0] == pytest.approx(-accel_b[0], abs=1e-9)
    assert accel_a[1] == pytest.approx(accel_b[1], abs=1e-9)


def test_none_controller_keeps_labels_home(line_scene, sim, camera):
    controller = NoneController()
    world = init_world(line_scene, sim, camera)
    while not world.finished:
        world = step(world, controller.actions(world))
        for label in world.labels:
            np.testing.assert_array_equal(label.offset, [0.0, 0.0])


def test_none_controller_brings_a_moving_label_to_rest(line_scene, sim, camera):
    world = with_label_offset(init_world(line_scene, sim, camera), 0, (0.5, 0.0), offset_vel=(0.2, 0.0))
    after = step(world, {"a": none_controller(world, 0), "b": none_controller(world, 1)})
    np.testing.assert_allclose(after.labels[0].offset_vel, [0.0, 0.0], atol=1e-12)


@pytest.mark.parametrize("mode", ["velocity", "position"])
def test_controllers_in_other_action_modes(line_scene, camera, mode):
    sim = SimConfig(action_mode=mode)
    world = with_label_offset(init_world(line_scene, sim, camera), 0, (0.1, 0.0))
    after = step(world, NoneController().actions(world))
    np.testing.assert_allclose(after.labels[0].offset, [0.0, 0.0], atol=1e-12)
    assert set(ForceController().actions(world)) == {"a", "b"}


def test_policy_controller_acts_for_every_active_label(tiny_policy, line_scene, sim, camera):
    controller = PolicyController(tiny_policy)
    actions = controller.actions(init_world(line_scene, sim, camera))
    assert set(actions) == {"a", "b"}
