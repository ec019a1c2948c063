import numpy as np
import pytest

from errors import ParameterError
from synthetic_generator import SCENARIO_KINDS, SynthParams, synth_corpus, synth_generate, synth_scenes


def params_for(kind):
    if kind == "crossing_pair":
        return SynthParams()
    return SynthParams(count=4, speed_range=(0.5, 1.5))


@pytest.mark.parametrize("kind", SCENARIO_KINDS)
def test_speeds_and_bounds(kind):
    params = params_for(kind)
    scene = synth_generate(kind, params, seed=11)
    assert scene.n_steps == 150
    xmin, xmax, zmin, zmax = params.bounds
    for track in scene.tracks.values():
        speeds = np.linalg.norm(track.velocities, axis=1)
        assert speeds.max() <= params.speed_range[1] + 1e-9
        assert track.positions[:, 0].min() >= xmin - 1e-9
        assert track.positions[:, 0].max() <= xmax + 1e-9
        assert track.positions[:, 1].min() >= zmin - 1e-9
        assert track.positions[:, 1].max() <= zmax + 1e-9


@pytest.mark.parametrize("kind", SCENARIO_KINDS)
def test_same_seed_same_scene(kind):
    a = synth_generate(kind, params_for(kind), seed=5)
    b = synth_generate(kind, params_for(kind), seed=5)
    for tid in a.track_ids:
        np.testing.assert_array_equal(a.tracks[tid].positions, b.tracks[tid].positions)


def test_crossing_pair_meets_at_mid_scene():
    scene = synth_generate("crossing_pair", SynthParams(), seed=3)
    assert scene.track_ids == ["p0", "p1"]
    mid = scene.n_steps // 2
    gap = np.linalg.norm(scene.tracks["p0"].positions[mid] - scene.tracks["p1"].positions[mid])
    assert gap < 1e-9
    speed_fast = np.linalg.norm(scene.tracks["p0"].velocities[1])
    speed_slow = np.linalg.norm(scene.tracks["p1"].velocities[1])
    assert speed_fast > speed_slow


def test_crossing_pair_needs_two_objects():
    with pytest.raises(ParameterError):
        synth_generate("crossing_pair", SynthParams(count=3), seed=0)


def test_roundabout_keeps_radius():
    params = SynthParams(count=3, radius=2.5)
    scene = synth_generate("roundabout", params, seed=0)
    for track in scene.tracks.values():
        np.testing.assert_allclose(np.linalg.norm(track.positions, axis=1), 2.5)


def test_roundabout_must_fit_the_arena():
    with pytest.raises(ParameterError):
        synth_generate("roundabout", SynthParams(radius=20.0), seed=0)


def test_unknown_kind_rejected():
    with pytest.raises(ParameterError):
        synth_generate("stampede", SynthParams(), seed=0)


def test_synth_scenes_ids():
    scenes = synth_scenes("lane_drill", SynthParams(count=3), 4, seed=2)
    assert [s.scene_id for s in scenes] == [f"lane_drill-{i:03d}" for i in range(4)]


def test_long_crossing_corpus_stays_in_the_arena():
    params = SynthParams()
    tracks = synth_corpus("crossing_pair", params, 400.0, seed=1)
    assert [tr.id for tr in tracks] == ["p0", "p1"]
    xmin, xmax, zmin, zmax = params.bounds
    for track in tracks:
        assert track.t_end == pytest.approx(400.0)
        assert track.positions[:, 0].min() >= xmin - 1e-9
        assert track.positions[:, 0].max() <= xmax + 1e-9
        assert track.positions[:, 1].min() >= zmin - 1e-9
        assert track.positions[:, 1].max() <= zmax + 1e-9
