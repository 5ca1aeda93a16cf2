import io
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from navstack.geometry import Pose
from navstack.scan_geometry import (
    Cloud3D,
    SweepConfig,
    cartesian_to_polar,
    mount_pose,
    polar_to_cartesian,
    sensor_to_world,
    sweep,
)
from navstack.scenario import enclosed_room_world
from navstack.world import WallFace, WorldModel


def test_default_lattice():
    cfg = SweepConfig()
    assert cfg.frame_count == 94
    assert cfg.rays_per_frame == 101
    assert cfg.frame_count * cfg.rays_per_frame == 9494
    # last frame stops just short of +20 deg
    assert cfg.pitch(93) == pytest.approx(-5.0 + 93 * 0.266)
    assert cfg.pitch(93) < 20.0


def test_config_rejects_bad_steps():
    with pytest.raises(ValueError):
        SweepConfig(pitch_step=0.0)
    with pytest.raises(ValueError):
        SweepConfig(scan_min=140.0, scan_max=40.0)


@pytest.mark.parametrize("alpha,beta,r,expected", [
    (0.0, 0.0, 1.0, (1.0, 0.0, 0.0)),
    (0.0, 90.0, 2.0, (0.0, 2.0, 0.0)),
])
def test_polar_to_cartesian_examples(alpha, beta, r, expected):
    assert polar_to_cartesian(alpha, beta, r) == pytest.approx(expected, abs=1e-12)


def test_floor_hit_example():
    r = 0.4 / math.sin(math.radians(5.0))
    # exact value is 4.5895; the published 4.588 is inside the 1 cm tolerance
    assert r == pytest.approx(4.588, abs=0.01)
    _, _, z = polar_to_cartesian(-5.0, 90.0, r)
    assert z == pytest.approx(-0.4, abs=1e-12)


@pytest.mark.parametrize("pt,pose,expected", [
    ((1, 0, 0), Pose.deg(0, 0, 0), (1, 0, 0.4)),
    ((1, 0, 0), Pose.deg(0, 0, 90), (0, 1, 0.4)),
    ((1, 1, 0), Pose.deg(2, 3, 180), (1, 2, 0.4)),
])
def test_sensor_to_world_examples(pt, pose, expected):
    assert sensor_to_world(pt, pose, 0.4) == pytest.approx(expected, abs=1e-12)


@given(st.floats(-89.0, 89.0), st.floats(-179.0, 179.0), st.floats(0.01, 50.0))
def test_polar_round_trip(alpha, beta, r):
    back = cartesian_to_polar(*polar_to_cartesian(alpha, beta, r))
    assert back[2] == pytest.approx(r, rel=1e-9)
    assert back[0] == pytest.approx(alpha, rel=1e-9, abs=1e-9)
    assert back[1] == pytest.approx(beta, rel=1e-9, abs=1e-9)


def test_mount_looks_along_heading():
    pose = Pose.deg(1.0, 2.0, 30.0)
    x, y, _ = sensor_to_world(polar_to_cartesian(0.0, 90.0, 1.0), mount_pose(pose), 0.0)
    assert (x, y) == pytest.approx((1.0 + math.cos(math.radians(30)), 2.0 + math.sin(math.radians(30))))


def test_enclosed_room_has_every_ray():
    cloud = sweep(enclosed_room_world(), Pose(0, 0, math.pi / 2), SweepConfig())
    assert len(cloud) == 9494


def test_open_floor_only_hits_floor():
    # no walls: only downward pitches hit anything
    cloud = sweep(WorldModel([WallFace((100, 100), (101, 100))]), Pose(0, 0, 0), SweepConfig())
    assert len(cloud) > 0
    assert np.all(cloud.alpha < 0)
    assert np.allclose(cloud.xyz[:, 2], 0.0, atol=1e-9)
    # flat-floor law r = h / sin(-alpha)
    expected = 0.4 / np.sin(np.radians(-cloud.alpha))
    np.testing.assert_allclose(cloud.rng, expected, rtol=1e-9)


def test_wall_height_increases_with_frame():
    world = WorldModel([WallFace((-10, 3), (10, 3), 0.0, 20.0)])
    cloud = sweep(world, Pose(0, 0, math.pi / 2), SweepConfig())
    sel = (cloud.k == 50) & (cloud.xyz[:, 2] > 1e-6)
    z = cloud.xyz[sel, 2][np.argsort(cloud.j[sel])]
    assert len(z) > 10
    assert np.all(np.diff(z) > 0)


def test_sweep_is_deterministic():
    a = sweep(enclosed_room_world(), Pose(0.3, -0.2, 0.4))
    b = sweep(enclosed_room_world(), Pose(0.3, -0.2, 0.4))
    assert a.dumps() == b.dumps()


def test_cloud_text_round_trip():
    world = WorldModel([WallFace((-2, 2), (2, 2), 0.0, 1.0), WallFace((2, -2), (2, 2), 0.5, 1.5)])
    cloud = sweep(world, Pose(0.1, 0.2, 1.2), SweepConfig(pitch_step=1.0, scan_step=2.0))
    text = cloud.dumps()
    back = Cloud3D.read(io.StringIO(text))
    assert back.dumps() == text
    np.testing.assert_allclose(back.rng, cloud.rng, rtol=1e-8)
    assert back.cfg == cloud.cfg


def test_empty_cloud_round_trip():
    c = Cloud3D.empty(SweepConfig(), Pose(0, 0, 0))
    assert len(Cloud3D.loads(c.dumps())) == 0
