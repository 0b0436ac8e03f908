import math

import cv2
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from socialcue.camera import project, undistort_points
from socialcue.errors import ValidationError
from socialcue.headpose import (
    INTERIOR,
    NOSE_TIP,
    LandmarkObservation,
    YawBin,
    bearing_of,
    classify_yaw,
    euler_from_rotation,
    load_face_model,
    pose_points,
    relative_yaw,
    rotation_from_euler,
    solve_pose,
    wrap_degrees,
    yaw_bin_of_delta,
)
from socialcue.simulator.synth import nose_position


def observe(model, cam, yaw, pitch=0.0, roll=0.0, bearing=0.0, distance=1000.0, noise=0.0, rng=None):
    pts = project(pose_points(model, yaw, pitch, roll, nose_position(bearing, distance)), cam)
    if noise:
        pts = pts + rng.normal(0, noise, pts.shape)
    return LandmarkObservation.from_points(1, pts, 0)


def test_face_model_file_is_mirror_symmetric(model):
    pts = model.points
    assert pts.shape == (68, 3)
    assert pts[NOSE_TIP] == pytest.approx([0, 0, 0])
    # outer eye corners mirror each other
    assert pts[36] == pytest.approx(pts[45] * [-1, 1, 1])
    assert len(INTERIOR) == 51


def test_load_face_model_rejects_short_file(tmp_path):
    f = tmp_path / "m.txt"
    f.write_text("0 1 2 3\n")
    with pytest.raises(ValidationError):
        load_face_model(f)


def test_euler_round_trip():
    for yaw, pitch, roll in [(0, 0, 0), (30, -10, 5), (-75, 20, -15)]:
        got = euler_from_rotation(rotation_from_euler(yaw, pitch, roll))
        assert got == pytest.approx((yaw, pitch, roll), abs=1e-9)


def test_identity_pose_recovered(model, cam):
    pose = solve_pose(observe(model, cam, 0), model, cam)
    assert (pose.yaw, pose.pitch, pose.roll) == pytest.approx((0, 0, 0), abs=0.1)
    assert pose.translation == pytest.approx([0, 0, 1000], abs=1.0)
    assert pose.rms_reprojection < 1e-3


def test_yaw_30_at_bearing_20(model, cam):
    pose = solve_pose(observe(model, cam, 30, bearing=20), model, cam)
    assert pose.yaw == pytest.approx(30, abs=0.5)


def test_matches_opencv_pnp_on_undistorted_rays(model, cam):
    # independent solver: OpenCV's iterative PnP on the rays as a pinhole view
    obs = observe(model, cam, 25, pitch=-8, roll=4, bearing=15, distance=1400)
    rays = undistort_points(obs.points[INTERIOR], cam)
    img = rays[:, :2] / rays[:, 2:3]
    X = model.points[INTERIOR]
    ok, rvec, tvec = cv2.solvePnP(X, img, np.eye(3), None, flags=cv2.SOLVEPNP_ITERATIVE)
    assert ok
    R_ref, _ = cv2.Rodrigues(rvec)
    pose = solve_pose(obs, model, cam)
    np.testing.assert_allclose(pose.rotation, R_ref, atol=1e-6)
    np.testing.assert_allclose(pose.translation, tvec.ravel(), atol=1e-3)


def test_noisy_yaw_45_within_5_degrees_at_95th_percentile(model, cam, rng):
    errs = []
    for _ in range(100):
        pose = solve_pose(observe(model, cam, 45, bearing=0, distance=1000, noise=1.0, rng=rng), model, cam)
        errs.append(abs(pose.yaw - 45))
    assert np.percentile(errs, 95) <= 5.0


@settings(max_examples=40, deadline=None)
@given(
    st.floats(-60, 60), st.floats(-60, 60), st.floats(-20, 20), st.floats(600, 3000), st.floats(-40, 40)
)
def test_noise_free_round_trip(yaw, pitch, roll, distance, bearing):
    from socialcue.camera import CameraIntrinsics
    from socialcue.headpose import default_face_model
    from socialcue.simulator.synth import in_view

    model, cam = default_face_model(), CameraIntrinsics()
    pts3 = pose_points(model, yaw, pitch, roll, nose_position(bearing, distance))
    if not in_view(pts3, cam):
        return
    pose = solve_pose(LandmarkObservation.from_points(1, project(pts3, cam), 0), model, cam)
    assert (pose.yaw, pose.pitch, pose.roll) == pytest.approx((yaw, pitch, roll), abs=0.5)


def test_bearing_examples(model, cam):
    def bearing_with_nose_at(px):
        pts = np.tile(px, (68, 1)) + np.random.default_rng(0).normal(0, 3, (68, 2))
        pts[NOSE_TIP] = px
        return bearing_of(LandmarkObservation.from_points(1, pts, 0), cam)

    assert bearing_with_nose_at(cam.center) == pytest.approx(0)
    assert bearing_with_nose_at(cam.center + [cam.focal * math.radians(30), 0]) == pytest.approx(30, abs=0.1)
    assert bearing_with_nose_at(cam.center + [cam.width / 2 - 1e-9, 0]) == pytest.approx(85, abs=1e-6)


def test_bearing_antisymmetric_under_mirror(model, cam):
    obs = observe(model, cam, 10, bearing=37, distance=1300)
    mirrored = obs.points.copy()
    mirrored[:, 0] = cam.width - mirrored[:, 0]
    b = bearing_of(obs, cam)
    assert bearing_of(LandmarkObservation.from_points(1, mirrored, 0), cam) == pytest.approx(-b, abs=1e-12)


def test_face_turned_to_camera_is_at_wearer(model, cam):
    obs = observe(model, cam, 20, bearing=20, distance=1200)
    pose = solve_pose(obs, model, cam)
    assert classify_yaw(pose, bearing_of(obs, cam)) is YawBin.AT_WEARER


@pytest.mark.parametrize(
    "delta,expected",
    [
        (0, YawBin.AT_WEARER),
        (22.5, YawBin.AT_WEARER),
        (-22.5, YawBin.AT_WEARER),
        (22.6, YawBin.RIGHT),
        (-40, YawBin.LEFT),
        (67.5, YawBin.RIGHT),
        (67.6, YawBin.FAR_RIGHT),
        (-100, YawBin.FAR_LEFT),
    ],
)
def test_bin_boundaries(delta, expected):
    assert yaw_bin_of_delta(delta) is expected


def test_wrap_and_relative_yaw():
    assert wrap_degrees(190) == pytest.approx(-170)
    assert relative_yaw(-170, 170) == pytest.approx(20)


def test_observation_validation():
    pts = np.zeros((67, 2))
    with pytest.raises(ValidationError):
        LandmarkObservation.from_points(1, pts, 0)
    pts = np.zeros((68, 2))
    pts[0, 0] = np.nan
    with pytest.raises(ValidationError):
        LandmarkObservation.from_points(1, pts, 0)
    with pytest.raises(ValidationError):
        LandmarkObservation(1, np.ones((68, 2)) * 500, (0, 0, 10, 10), 0)
