import numpy as np
import pytest

from errors import GeometryError
from processing.sim_world import SimConfig, init_world, with_label_offset
from processing.view_geometry import (
    EPS_OCC,
    CameraSpec,
    ScreenRect,
    Segment2,
    billboard_axes,
    count_intersections,
    count_occlusions,
    occludes,
    overlap_area,
    project_scene,
    rays,
    segments_intersect,
    to_ray_space,
)
from tests.conftest import straight_scene


def standing_world(positions, camera):
    """Objects at rest; positions maps id -> (x, z)"""
    scene = straight_scene("still", n_steps=2, tracks={tid: (xz, (0.0, 0.0)) for tid, xz in positions.items()})
    return init_world(scene, SimConfig(), camera)


def test_camera_validation():
    with pytest.raises(GeometryError):
        CameraSpec(near=0.0)
    with pytest.raises(GeometryError):
        CameraSpec(vertical_fov=180.0)
    with pytest.raises(GeometryError):
        CameraSpec(eye=(0.0, 0.0, 0.0))


def test_target_projects_to_screen_center(camera):
    ray = to_ray_space((0.0, 0.0, 0.0), camera)
    assert ray.u == pytest.approx(0.5)
    assert ray.v == pytest.approx(0.5)
    assert ray.z_cam == pytest.approx(np.hypot(6.0, 14.0))
    assert ray.in_front


def test_screen_axes_follow_world_axes(camera):
    right = to_ray_space((1.0, 0.0, 0.0), camera)
    above = to_ray_space((0.0, 1.0, 0.0), camera)
    assert right.u > 0.5
    assert above.v > 0.5


def test_point_behind_camera(camera):
    assert not to_ray_space((0.0, 6.0, 30.0), camera).in_front


def test_vectorized_rays_match_single_points(camera):
    points = np.array([[1.0, 0.5, -2.0], [-3.0, 2.0, 1.0], [0.0, 6.0, 30.0]])
    values, in_front = rays(points, camera)
    for p, row, front in zip(points, values, in_front):
        single = to_ray_space(p, camera)
        np.testing.assert_allclose(row, single.as_array())
        assert front == single.in_front


def test_billboard_faces_the_eye(camera):
    normal, right, up = billboard_axes((0.0, 2.5, 0.0), camera)
    np.testing.assert_allclose(right, [1.0, 0.0, 0.0], atol=1e-12)
    assert normal @ (np.array(camera.eye) - np.array([0.0, 2.5, 0.0])) > 0
    assert abs(normal @ up) < 1e-12
    assert up[1] > 0


def monte_carlo_overlap(a, b, rng, n=200_000):
    lo = np.array([min(a.u_min, b.u_min), min(a.v_min, b.v_min)])
    hi = np.array([max(a.u_max, b.u_max), max(a.v_max, b.v_max)])
    pts = rng.uniform(lo, hi, size=(n, 2))

    def inside(r):
        return (pts[:, 0] >= r.u_min) & (pts[:, 0] <= r.u_max) & (pts[:, 1] >= r.v_min) & (pts[:, 1] <= r.v_max)

    return float(np.mean(inside(a) & inside(b)) * np.prod(hi - lo))


def random_rect(rng, depth=1.0):
    u = np.sort(rng.uniform(0.0, 1.0, 2))
    v = np.sort(rng.uniform(0.0, 1.0, 2))
    return ScreenRect(u[0], u[1], v[0], v[1], depth)


def test_overlap_area_matches_monte_carlo():
    rng = np.random.default_rng(0)
    for _ in range(100):
        a, b = random_rect(rng), random_rect(rng)
        assert overlap_area(a, b) == pytest.approx(monte_carlo_overlap(a, b, rng), abs=5e-3)


def rect_polygon(r):
    return [(r.u_min, r.v_min), (r.u_max, r.v_min), (r.u_max, r.v_max), (r.u_min, r.v_max)]


def clip_polygon(subject, clip):
    """Sutherland-Hodgman clipping of a polygon against a counter-clockwise convex polygon"""
    def inside(p, a, b):
        return (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]) >= 0

    def crossing(p, q, a, b):
        d1 = (q[0] - p[0], q[1] - p[1])
        d2 = (b[0] - a[0], b[1] - a[1])
        t = ((a[0] - p[0]) * d2[1] - (a[1] - p[1]) * d2[0]) / (d1[0] * d2[1] - d1[1] * d2[0])
        return (p[0] + t * d1[0], p[1] + t * d1[1])

    output = list(subject)
    for k in range(len(clip)):
        a, b = clip[k], clip[(k + 1) % len(clip)]
        points, output = output, []
        for j, q in enumerate(points):
            p = points[j - 1]
            if inside(q, a, b):
                if not inside(p, a, b):
                    output.append(crossing(p, q, a, b))
                output.append(q)
            elif inside(p, a, b):
                output.append(crossing(p, q, a, b))
        if not output:
            break
    return output


def shoelace_area(polygon):
    if len(polygon) < 3:
        return 0.0
    xy = np.asarray(polygon)
    x, y = xy[:, 0], xy[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def test_occludes_matches_exact_polygon_overlap():
    rng = np.random.default_rng(2)
    checked = 0
    for _ in range(1000):
        a = random_rect(rng, depth=rng.uniform(1.0, 10.0))
        b = random_rect(rng, depth=rng.uniform(1.0, 10.0))
        exact = shoelace_area(clip_polygon(rect_polygon(a), rect_polygon(b)))
        assert overlap_area(a, b) == pytest.approx(exact, abs=1e-12)
        if exact > 1e-12 and abs(exact - EPS_OCC) < 1e-4:
            continue
        assert occludes(a, b) == (exact > EPS_OCC and a.depth < b.depth)
        assert occludes(b, a) == (exact > EPS_OCC and b.depth < a.depth)
        checked += 1
    assert checked > 900


def test_overlap_is_symmetric_and_disjoint_is_zero():
    a = ScreenRect(0.0, 0.4, 0.0, 0.4, 1.0)
    b = ScreenRect(0.2, 0.6, 0.1, 0.3, 2.0)
    c = ScreenRect(0.5, 0.9, 0.5, 0.9, 1.0)
    assert overlap_area(a, b) == pytest.approx(0.2 * 0.2)
    assert overlap_area(a, b) == overlap_area(b, a)
    assert overlap_area(a, c) == 0.0


def test_only_the_nearer_rectangle_occludes():
    near = ScreenRect(0.0, 0.4, 0.0, 0.4, 1.0)
    far = ScreenRect(0.2, 0.6, 0.1, 0.3, 2.0)
    assert occludes(near, far)
    assert not occludes(far, near)
    assert not occludes(near, ScreenRect(0.0, 0.4, 0.0, 0.4, 1.0))


def test_tiny_overlap_is_ignored():
    a = ScreenRect(0.0, 0.5, 0.0, 0.5, 1.0)
    b = ScreenRect(0.4999, 0.9, 0.4999, 0.9, 2.0)
    assert not occludes(a, b)


def parametric_crossing(s1, s2):
    """2x2 solve of a + t(b - a) = c + s(d - c); None when degenerate or too close to an endpoint"""
    a, b, c, d = (np.asarray(p) for p in (s1.a, s1.b, s2.a, s2.b))
    m = np.column_stack([b - a, c - d])
    if abs(np.linalg.det(m)) < 1e-9:
        return None
    t, s = np.linalg.solve(m, c - a)
    if min(abs(t), abs(t - 1), abs(s), abs(s - 1)) < 1e-6:
        return None
    return 0 < t < 1 and 0 < s < 1


def test_segments_intersect_matches_parametric_solver():
    rng = np.random.default_rng(1)
    checked = 0
    for _ in range(1000):
        p = rng.uniform(0.0, 1.0, (4, 2))
        s1, s2 = Segment2(tuple(p[0]), tuple(p[1])), Segment2(tuple(p[2]), tuple(p[3]))
        expected = parametric_crossing(s1, s2)
        if expected is None:
            continue
        assert segments_intersect(s1, s2) == expected
        checked += 1
    assert checked > 900


def test_touching_and_parallel_segments_do_not_cross():
    x = Segment2((0.0, 0.0), (1.0, 1.0))
    assert segments_intersect(x, Segment2((0.0, 1.0), (1.0, 0.0)))
    assert not segments_intersect(x, Segment2((1.0, 1.0), (2.0, 0.0)))
    assert not segments_intersect(x, Segment2((0.0, 0.5), (1.0, 1.5)))
    assert not segments_intersect(x, Segment2((0.5, 0.5), (0.5, 2.0)))


def test_far_apart_labels_have_no_conflicts(camera):
    world = standing_world({"a": (-8.0, 0.0), "b": (8.0, 0.0)}, camera)
    projection = project_scene(world)
    for i in range(2):
        assert count_occlusions(world, camera, i, projection) == 0
        assert count_intersections(world, camera, i, projection) == 0


def test_nearer_label_occludes_the_one_behind(camera):
    world = standing_world({"front": (0.0, 0.3), "back": (0.0, 0.0)}, camera)
    projection = project_scene(world)
    front, back = projection.label_rects
    assert occludes(front, back)
    assert not occludes(back, front)
    assert count_occlusions(world, camera, 0, projection) >= 1


def test_swapped_labels_cross_leader_lines(camera):
    world = standing_world({"a": (-1.0, 0.0), "b": (1.0, 0.0)}, camera)
    world = with_label_offset(world, 0, (1.5, 0.0))
    world = with_label_offset(world, 1, (-1.5, 0.0))
    assert count_intersections(world, camera, 0) == 1
    assert count_intersections(world, camera, 1) == 1


def test_project_scene_covers_every_entity(camera):
    world = standing_world({"a": (0.0, 0.0), "b": (3.0, 0.0)}, camera)
    projection = project_scene(world)
    assert all(r is not None for r in projection.label_rects + projection.object_rects)
    assert len(projection.segments) == 2
