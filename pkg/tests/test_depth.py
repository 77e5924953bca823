import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from phystrack.core import Detection, InvalidInputError, KinematicState, Vec3
from phystrack.depth import (
    MAX_VALID_DEPTH,
    MIN_VALID_DEPTH,
    CameraIntrinsics,
    CameraPose,
    InvalidDepthError,
    deproject,
    is_valid_depth,
    project,
    resolve_detection,
    resolve_position,
    sample_depth,
    world_to_pixel,
)
from phystrack.kinematics import predict_position

INTR = CameraIntrinsics(fx=900.0, fy=910.0, cx=640.0, cy=360.0, width=1280, height=720)
G = Vec3(0.0, -9.81, 0.0)
G0 = Vec3(0.0, 0.0, 0.0)


def test_intrinsics_invariants():
    with pytest.raises(InvalidInputError):
        CameraIntrinsics(0.0, 1.0, 1.0, 1.0, 10, 10)
    with pytest.raises(InvalidInputError):
        CameraIntrinsics(1.0, 1.0, 10.0, 1.0, 10, 10)


def test_deproject_examples():
    assert deproject(INTR.cx, INTR.cy, 4.0, INTR) == Vec3(0.0, 0.0, 4.0)
    assert deproject(INTR.cx + INTR.fx, INTR.cy, 2.0, INTR) == Vec3(2.0, 0.0, 2.0)
    for bad in (math.nan, math.inf, 0.0, -1.0):
        with pytest.raises(InvalidDepthError):
            deproject(1.0, 1.0, bad, INTR)


@given(st.floats(0.0, 1279.0), st.floats(0.0, 719.0), st.floats(0.1, 50.0))
def test_project_inverts_deproject(u, v, d):
    uu, vv = project(deproject(u, v, d, INTR), INTR)
    assert abs(uu - u) < 1e-9 and abs(vv - v) < 1e-9


def test_valid_depth_range():
    assert is_valid_depth(MIN_VALID_DEPTH) and is_valid_depth(MAX_VALID_DEPTH)
    for d in (None, math.nan, math.inf, -math.inf, 0.05, 50.5):
        assert not is_valid_depth(d)


def test_resolve_examples():
    prior = KinematicState(Vec3(0.0, 0.0, 3.0), Vec3(0.0, 0.0, -1.0), 0.0)
    det = Detection(1, 0.1, pixel_center=(INTR.cx, INTR.cy), depth=2.5)
    assert resolve_position(det, prior, G0, INTR)[2] == 2.5
    hole = Detection(1, 0.1, pixel_center=(INTR.cx, INTR.cy), depth=math.nan)
    assert resolve_position(hole, prior, G0, INTR)[2] == pytest.approx(2.9, abs=1e-12)
    inf = Detection(1, 0.1, pixel_center=(INTR.cx, INTR.cy), depth=math.inf)
    assert resolve_position(inf, None, G0, INTR) is None
    world = Detection(1, 0.1, world_position=Vec3(1, 2, 3))
    assert resolve_detection(world, None, G0, None) == (Vec3(1.0, 2.0, 3.0), False)
    assert resolve_detection(hole, prior, G0, INTR)[1] is True
    assert resolve_position(det, None, G0, None) is None  # pixels without intrinsics


prior_st = st.builds(
    KinematicState,
    st.builds(Vec3, st.floats(-2, 2), st.floats(-2, 2), st.floats(1, 20)),
    st.builds(Vec3, st.floats(-10, 10), st.floats(-10, 10), st.floats(-10, 10)),
    st.just(0.0),
)


@given(prior_st, st.floats(0.0, 1279.0), st.floats(0.0, 719.0), st.floats(0.1, 50.0), st.floats(0.001, 0.2))
def test_valid_depth_ignores_prior(prior, u, v, d, t):
    det = Detection(1, t, pixel_center=(u, v), depth=d)
    assert resolve_position(det, prior, G, INTR) == resolve_position(det, None, G, INTR)


@given(prior_st, st.floats(0.0, 1279.0), st.floats(0.0, 719.0), st.floats(0.001, 0.2))
def test_fallback_uses_kinematic_depth(prior, u, v, t):
    det = Detection(1, t, pixel_center=(u, v), depth=math.nan)
    predicted_z = predict_position(prior, t, G)[2]
    out = resolve_position(det, prior, G, INTR)
    if predicted_z <= 0:
        assert out is None
    else:
        assert abs(out[2] - predicted_z) <= 1e-12 * max(1.0, abs(predicted_z))


def test_depth_jump_treated_as_invalid():
    prior = KinematicState(Vec3(0.0, 0.0, 5.0), Vec3(0.0, 0.0, 0.0), 0.0)
    det = Detection(1, 0.01, pixel_center=(INTR.cx, INTR.cy), depth=7.0)
    z, replaced = resolve_detection(det, prior, G0, INTR, max_depth_jump=0.5)
    assert replaced and z[2] == 5.0
    z, replaced = resolve_detection(det, prior, G0, INTR, max_depth_jump=3.0)
    assert not replaced and z[2] == 7.0


def test_pose_round_trip_and_world_pixel():
    pose = CameraPose(((-1.0, 0.0, 0.0), (0.0, -1.0, 0.0), (0.0, 0.0, 1.0)), Vec3(3.0, 2.0, -0.5))
    p = Vec3(1.0, 1.5, 6.0)
    assert np.allclose(pose.to_world(pose.to_camera(p)), p, atol=1e-12)
    (u, v), depth = world_to_pixel(p, INTR, pose)
    assert depth == pytest.approx(6.5)
    det = Detection(0, 0.0, pixel_center=(u, v), depth=depth)
    assert np.allclose(resolve_position(det, None, G, INTR, pose), p, atol=1e-12)
    with pytest.raises(InvalidInputError):
        CameraPose(((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, -1.0)))
    assert CameraPose().is_identity


def test_sample_depth():
    grid = np.arange(25, dtype=float).reshape(5, 5)
    grid[2, 2] = math.nan
    assert sample_depth(grid, 1.2, 3.4) == 16.0
    assert math.isnan(sample_depth(grid, 2.0, 2.0))
    assert sample_depth(grid, 2.0, 2.0, median=True) == pytest.approx(np.median([6, 7, 8, 11, 13, 16, 17, 18]))
    assert math.isnan(sample_depth(grid, 10.0, 0.0))
