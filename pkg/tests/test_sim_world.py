import numpy as np
import pytest

from errors import ConfigError, EpisodeFinished, MissingActionError
from processing.sim_world import (
    Action,
    SimConfig,
    action_bound,
    init_world,
    label_displacement,
    lookahead,
    object_displacement,
    pin_home,
    step,
    with_label_offset,
    world_hash,
)
from trajectory_scenes import Scene, SceneTrack


def zero_actions(world):
    return {world.labels[i].target_id: Action.zero() for i in world.active_label_indices}


def push(world, target_id, a):
    actions = zero_actions(world)
    actions[target_id] = Action(np.asarray(a, dtype=float))
    return step(world, actions)


def test_labels_start_home_above_their_objects(line_scene, sim, camera):
    world = init_world(line_scene, sim, camera)
    assert [lb.target_id for lb in world.labels] == ["a", "b"]
    label = world.labels[0]
    np.testing.assert_allclose(label.offset, [0.0, 0.0])
    np.testing.assert_allclose(label.world_pos, [-4.0, 2.5, 0.0])
    np.testing.assert_allclose(label.anchor, [-4.0, 2.0, 0.0])


def test_only_requested_objects_get_labels(line_scene, sim, camera):
    world = init_world(line_scene, sim, camera, labeled_ids=["b"])
    assert [lb.target_id for lb in world.labels] == ["b"]
    assert len(world.objects) == 2
    with pytest.raises(ConfigError):
        init_world(line_scene, sim, camera, labeled_ids=["ghost"])


def test_start_step(line_scene, sim, camera):
    world = init_world(line_scene, sim, camera, start_step=5)
    assert world.step == 5
    assert world.time == pytest.approx(0.5)
    np.testing.assert_allclose(world.objects[0].pos, [-3.5, 0.0, 0.0])
    with pytest.raises(ConfigError):
        init_world(line_scene, sim, camera, start_step=21)


def test_objects_follow_the_scene(line_scene, sim, camera):
    world = step(init_world(line_scene, sim, camera), {"a": Action.zero(), "b": Action.zero()})
    np.testing.assert_allclose(world.objects[0].pos, [-3.9, 0.0, 0.0])
    np.testing.assert_allclose(world.objects[1].normal, [-1.0, 0.0, 0.0])
    np.testing.assert_allclose(world.labels[0].world_pos, [-3.9, 2.5, 0.0])


def test_semi_implicit_euler(line_scene, sim, camera):
    world = push(init_world(line_scene, sim, camera), "a", (1.0, -2.0))
    np.testing.assert_allclose(world.labels[0].offset_vel, [0.1, -0.2])
    np.testing.assert_allclose(world.labels[0].offset, [0.01, -0.02])
    np.testing.assert_allclose(world.labels[1].offset, [0.0, 0.0])


def test_acceleration_is_clamped(line_scene, sim, camera):
    start = init_world(line_scene, sim, camera)
    clamped = push(start, "a", (10.0, -10.0))
    bounded = push(start, "a", (3.0, -3.0))
    np.testing.assert_allclose(clamped.labels[0].offset, bounded.labels[0].offset)


def test_plane_walls_stop_the_label(line_scene, sim, camera):
    world = init_world(line_scene, sim, camera)
    while not world.finished:
        world = push(world, "a", (3.0, 0.0))
        assert abs(world.labels[0].offset[0]) <= sim.half_side + 1e-12
    assert world.labels[0].offset[0] == pytest.approx(sim.half_side)
    assert world.labels[0].offset_vel[0] == 0.0


def test_missing_action_raises(line_scene, sim, camera):
    world = init_world(line_scene, sim, camera)
    with pytest.raises(MissingActionError):
        step(world, {"a": Action.zero()})


def test_stepping_past_the_end_raises(line_scene, sim, camera):
    world = init_world(line_scene, sim, camera, start_step=line_scene.n_steps)
    assert world.finished
    with pytest.raises(EpisodeFinished):
        step(world, zero_actions(world))


def test_lookahead_matches_step_while_the_scene_runs(line_scene, sim, camera):
    world = init_world(line_scene, sim, camera)
    actions = zero_actions(world)
    actions["a"] = Action(np.array([1.0, -2.0]))
    assert world_hash(lookahead(world, actions)) == world_hash(step(world, actions))


def test_lookahead_on_the_last_step_moves_only_labels(line_scene, sim, camera):
    world = init_world(line_scene, sim, camera, start_step=line_scene.n_steps)
    actions = zero_actions(world)
    actions["a"] = Action(np.array([1.0, -2.0]))
    after = lookahead(world, actions)
    assert after.step == world.step
    np.testing.assert_allclose(after.objects[0].pos, world.objects[0].pos)
    np.testing.assert_allclose(after.labels[0].offset_vel, [0.1, -0.2])
    np.testing.assert_allclose(after.labels[0].offset, [0.01, -0.02])
    np.testing.assert_allclose(after.labels[1].offset, [0.0, 0.0])


def test_inactive_labels_need_no_action(sim, camera):
    positions = np.column_stack([np.linspace(0, 1, 11), np.zeros(11)])
    scene = Scene("enter", 0.1, 10, {
        "a": SceneTrack("a", positions, np.zeros((11, 2)), 0, 10),
        "late": SceneTrack("late", positions + 2.0, np.zeros((11, 2)), 3, 10),
    })
    world = init_world(scene, sim, camera)
    assert world.active_label_indices == [0]
    world = step(world, {"a": Action.zero()})
    assert not world.labels[1].active
    world = step(step(world, {"a": Action.zero()}), {"a": Action.zero()})
    assert world.labels[1].active
    assert world.active_label_indices == [0, 1]


def test_velocity_and_position_modes(line_scene, camera):
    velocity = SimConfig(action_mode="velocity", max_speed=2.0)
    world = push(init_world(line_scene, velocity, camera), "a", (5.0, 1.0))
    np.testing.assert_allclose(world.labels[0].offset, [0.2, 0.1])
    assert action_bound(velocity) == 2.0

    position = SimConfig(action_mode="position")
    world = push(init_world(line_scene, position, camera), "a", (0.5, -9.0))
    np.testing.assert_allclose(world.labels[0].offset, [0.5, -1.5])
    assert action_bound(position) == 1.5
    assert action_bound(SimConfig()) == 3.0


def test_invalid_config():
    with pytest.raises(ConfigError):
        SimConfig(dt=0.0)
    with pytest.raises(ConfigError):
        SimConfig(action_mode="teleport")


def test_label_displacement_composes_object_and_offset(line_scene, sim, camera):
    before = init_world(line_scene, sim, camera)
    after = push(before, "a", (2.0, 0.0))
    expected = object_displacement(before, after, 0) + np.array([0.02, 0.0, 0.0])
    np.testing.assert_allclose(label_displacement(before, after, 0), expected)
    np.testing.assert_allclose(
        label_displacement(before, after, 0),
        after.labels[0].world_pos - before.labels[0].world_pos,
    )


def test_pin_home_resets_offsets(line_scene, sim, camera):
    world = push(init_world(line_scene, sim, camera), "a", (3.0, 3.0))
    pinned = pin_home(world)
    np.testing.assert_allclose(pinned.labels[0].offset, [0.0, 0.0])
    np.testing.assert_allclose(pinned.labels[0].offset_vel, [0.0, 0.0])
    assert world.labels[0].offset[0] > 0


def test_world_hash_tracks_state_without_mutation(line_scene, sim, camera):
    world = init_world(line_scene, sim, camera)
    before = world_hash(world)
    moved = with_label_offset(world, 0, (0.5, 0.5))
    assert world_hash(world) == before
    assert world_hash(moved) != before
    assert world_hash(init_world(line_scene, sim, camera)) == before
