import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from navstack.geometry import Pose
from navstack.scenario import SUDDEN_OBSTACLE, sudden_obstacle_scenario
from navstack.world import Region, SonarRing, WallFace, WorldModel, box_faces, cast_lrf_ray

AHEAD = Pose(0.0, 0.0, math.pi / 2)


def test_wall_straight_ahead():
    world = WorldModel([WallFace((-2, 3), (2, 3), 0.0, 2.0)])
    assert cast_lrf_ray(world, AHEAD, 0.0, 90.0) == pytest.approx(3.0)


def test_ray_passes_under_girder():
    girder = WallFace((-2, 2), (2, 2), 1.0, 1.3)
    back = WallFace((-2, 5), (2, 5), 0.0, 2.0)
    world = WorldModel([girder, back])
    # horizontal ray at the mount height 0.4 misses the girder
    assert cast_lrf_ray(world, AHEAD, 0.0, 90.0) == pytest.approx(5.0)
    # pitched up enough to meet the girder at 2 m: z = 0.4 + 2 tan(a) in [1.0, 1.3]
    a = math.degrees(math.atan(0.75 / 2.0))
    assert cast_lrf_ray(world, AHEAD, a, 90.0) == pytest.approx(2.0 / math.cos(math.radians(a)))


def test_floor_hit_range():
    world = WorldModel([WallFace((50, 50), (51, 50))])
    r = cast_lrf_ray(world, AHEAD, -5.0, 90.0)
    assert r == pytest.approx(0.4 / math.sin(math.radians(5.0)))
    assert r == pytest.approx(4.588, abs=0.01)


def test_miss_beyond_max_range():
    world = WorldModel([WallFace((-2, 40), (2, 40))])
    assert cast_lrf_ray(world, AHEAD, 0.0, 90.0) == math.inf


def test_face_validation():
    with pytest.raises(ValueError):
        WallFace((0, 0), (0, 0))
    with pytest.raises(ValueError):
        WallFace((0, 0), (1, 0), 1.0, 0.5)


def test_box_faces_closed():
    faces = box_faces(0, 0, 1.0, 0.5)
    assert len(faces) == 4
    pts = {f.p0 for f in faces}
    assert pts == {f.p1 for f in faces}


# sonar


def test_sonar_sees_wall_ahead():
    world = WorldModel([WallFace((-3, 2), (3, 2))])
    ring = SonarRing()
    r = world.cast_sonar(AHEAD, 0.0, ring)
    assert r.status == "ok"
    assert r.range_m == pytest.approx(2.0 - ring.mount_radius)


def test_sonar_cone_catches_off_axis_corner():
    ring = SonarRing()
    # post 10 deg off the beam axis, inside the 12.5 deg half-angle
    a = math.radians(90 - 10)
    p = (2 * math.cos(a), 2 * math.sin(a))
    world = WorldModel([WallFace(p, (p[0] + 0.5, p[1]))])
    r = world.cast_sonar(AHEAD, 0.0, ring)
    assert r.status == "ok"
    # 15 deg off is outside the cone
    a = math.radians(90 - 15)
    p = (2 * math.cos(a), 2 * math.sin(a))
    assert WorldModel([WallFace(p, (p[0] + 0.5, p[1]))]).cast_sonar(AHEAD, 0.0, ring).status == "miss"


def test_sonar_limits():
    ring = SonarRing()
    near = WorldModel([WallFace((-3, 0.6), (3, 0.6))])
    assert near.cast_sonar(AHEAD, 0.0, ring).status == "too_close"
    far = WorldModel([WallFace((-3, 6), (3, 6))])
    r = far.cast_sonar(AHEAD, 0.0, ring)
    assert r.status == "miss" and r.range_m == math.inf


def test_sonar_ignores_faces_above_its_height():
    world = WorldModel([WallFace((-3, 2), (3, 2), 1.0, 1.3)])
    assert world.cast_sonar(AHEAD, 0.0, SonarRing()).status == "miss"


def test_ring_needs_eight():
    with pytest.raises(ValueError):
        SonarRing(bearings_deg=(0.0, 90.0))


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(-math.pi, math.pi))
def test_static_readings_repeat(x, y, th):
    world = sudden_obstacle_scenario().world_at(10.0)
    p = Pose(x, y, th)
    assert world.sonar_scan(p, SonarRing()) == world.sonar_scan(p, SonarRing())


# clearance


def test_clearance_and_swept_capsule():
    world = WorldModel([WallFace((1.0, -1), (1.0, 1))])
    assert world.clearance((0, 0), 0.4, 1.2) == pytest.approx(0.6)
    # a single step that jumps over the wall is still caught
    assert world.swept_clearance((0, 0), (2, 0), 0.4, 1.2) < 0


def test_overhead_face_does_not_block_a_short_robot():
    world = WorldModel([WallFace((-1, 1), (1, 1), 1.0, 1.3)])
    assert world.clearance((0, 0.9), 0.4, 0.9) == math.inf
    assert world.clearance((0, 0.9), 0.4, 1.2) < 0


@given(st.floats(-4, 4), st.floats(-4, 4), st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_swept_never_exceeds_endpoint_clearance(x, y, dx, dy):
    world = sudden_obstacle_scenario().world_at(10.0)
    a, b = (x, y), (x + dx, y + dy)
    s = world.swept_clearance(a, b, 0.4, 1.2)
    assert s <= world.clearance(a, 0.4, 1.2) + 1e-12
    assert s <= world.clearance(b, 0.4, 1.2) + 1e-12


# events


def test_event_obstacle_absent_before_insertion():
    sc = sudden_obstacle_scenario()
    t_ins = sc.events[0].t
    before = sc.world_at(t_ins - 0.05)
    after = sc.world_at(t_ins)
    assert len(after.faces) == len(before.faces) + 4
    assert before.faces == sc.world.faces
    # a robot parked next to the obstacle site hears nothing of it before insertion
    p = Pose(SUDDEN_OBSTACLE[0], SUDDEN_OBSTACLE[1] - 1.2, math.pi / 2)
    assert before.sonar_scan(p, sc.sonar) == sc.world.sonar_scan(p, sc.sonar)
    assert after.cast_sonar(p, 0.0, sc.sonar).status == "ok"


def test_region_geometry():
    r = Region("g", 0, 0, 1, 1)
    assert r.contains(0.5, 0.5)
    assert r.distance_to_segment((2, 0.5), (3, 0.5)) == pytest.approx(1.0)
    assert r.distance_to_segment((-1, 0.5), (2, 0.5)) == 0.0
