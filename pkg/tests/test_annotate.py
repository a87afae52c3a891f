from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from widepose.angles import GIMBAL_LOCK_TOL, EulerPose, awe, euler_to_matrix, normalize_pose, rot_x, rot_y, rot_z
from widepose.annotate import (
    HelmetConfig,
    annotate_frame,
    annotate_frames,
    build_virtual_extrinsics,
    camera_relative_pose,
    fibonacci_sphere,
    helmet_bbox,
)
from widepose.camera import CameraIntrinsics
from widepose.records import FaceFrame
from widepose.rigid import RigidTransform
from widepose.synth import dome_calibration, dome_camera, pose_subject, random_scene
from widepose.template import default_template, reference_camera

TEMPLATE = default_template()
REF = reference_camera()
AXIS_INTR = CameraIntrinsics(np.array([[1000.0, 0, 500], [0, 1000.0, 500], [0, 0, 1]]), (1000, 1000))


# yaw within this many degrees of +/-90 is snapped onto the lock
LOCK_BAND = math.degrees(math.acos(1 - GIMBAL_LOCK_TOL))


def close_pose(a: EulerPose, b, tol=1e-6):
    b = np.asarray(b, dtype=float)
    if abs(abs(b[1]) - 90) <= LOCK_BAND:
        # only pitch - roll is defined at the lock; compare rotations, with
        # the snap distance as tolerance
        R = euler_to_matrix(EulerPose(*b))
        return np.max(np.abs(euler_to_matrix(a) - R)) < math.radians(max(tol, LOCK_BAND))
    return np.max(awe(a.as_array(), b)) < tol


def test_virtual_equals_reference_at_rest():
    e, rms = build_virtual_extrinsics(TEMPLATE, REF, TEMPLATE.landmarks)
    assert np.allclose(e.rotation, REF.rotation, atol=1e-12)
    assert np.allclose(e.translation, REF.translation, atol=1e-12)
    assert rms < 1e-12


def test_virtual_after_turn():
    e, _ = build_virtual_extrinsics(TEMPLATE, REF, pose_subject(TEMPLATE, rot_y(30)))
    expect = REF @ RigidTransform(rot_y(30)).inverse()
    assert np.linalg.norm(e.rotation - expect.rotation) < 1e-9
    assert np.linalg.norm(e.translation - expect.translation) < 1e-9


def test_virtual_after_translation():
    shift = np.array([5.0, -3.0, 20.0])
    e, _ = build_virtual_extrinsics(TEMPLATE, REF, TEMPLATE.landmarks + shift)
    assert np.allclose(e.rotation, REF.rotation, atol=1e-12)
    assert np.allclose(e.translation, REF.translation - shift, atol=1e-9)


def test_wrong_landmark_count():
    with pytest.raises(ValueError):
        build_virtual_extrinsics(TEMPLATE, REF, TEMPLATE.landmarks[:10])


def test_relative_pose_examples():
    e_virt = REF @ RigidTransform(rot_y(25)).inverse()
    assert close_pose(camera_relative_pose(e_virt, e_virt), (0, 0, 0), 1e-9)
    quarter = camera_relative_pose(RigidTransform(rot_y(-90)) @ e_virt, e_virt)
    assert abs(abs(quarter.yaw) - 90) < 1e-9
    assert quarter.yaw == pytest.approx(90, abs=1e-9)  # mirrored sign
    back = camera_relative_pose(RigidTransform(rot_y(180)) @ e_virt, e_virt)
    assert abs(abs(back.yaw) - 180) < 1e-9


def test_helmet_on_axis_analytic():
    cfg = HelmetConfig(21.0, 4096, 0.0)
    box = helmet_bbox([0, 0, 200], cfg, AXIS_INTR, RigidTransform())
    half = 1000 * 21 / math.sqrt(200**2 - 21**2)
    assert half == pytest.approx(105.6, abs=0.05)
    assert np.allclose(box, (500 - half, 500 - half, 500 + half, 500 + half), rtol=0.01)


def test_helmet_behind_camera():
    assert helmet_bbox([0, 0, -50], HelmetConfig(), AXIS_INTR, RigidTransform()) is None
    assert helmet_bbox([0, 0, 10], HelmetConfig(), AXIS_INTR, RigidTransform()) is None


def test_helmet_margin():
    raw = helmet_bbox([0, 0, 300], HelmetConfig(21, 256, 0.0), AXIS_INTR, RigidTransform())
    wide = helmet_bbox([0, 0, 300], HelmetConfig(21, 256, 0.5), AXIS_INTR, RigidTransform())
    side_raw = max(raw[2] - raw[0], raw[3] - raw[1])
    assert wide[2] - wide[0] == pytest.approx(1.5 * side_raw, rel=1e-12)
    assert wide[3] - wide[1] == pytest.approx(1.5 * side_raw, rel=1e-12)


def test_helmet_clamped_to_image():
    box = helmet_bbox([60, 0, 100], HelmetConfig(), AXIS_INTR, RigidTransform())
    assert box is not None and box[2] == 1000.0 and box[0] >= 0


@given(st.floats(30, 2000), st.floats(1, 500))
def test_helmet_area_shrinks_with_depth(d, step):
    cfg = HelmetConfig(21, 256, 0.5)

    def area(z):
        b = helmet_bbox([0, 0, z], cfg, AXIS_INTR, RigidTransform())
        return 0.0 if b is None else (b[2] - b[0]) * (b[3] - b[1])

    assert area(d + step) <= area(d) + 1e-9


def test_fibonacci_unit_and_balanced():
    s = fibonacci_sphere(256)
    assert np.allclose(np.linalg.norm(s, axis=1), 1)
    assert np.all(np.abs(s.mean(axis=0)) < 0.01)


def test_single_camera_at_reference():
    cam = dome_camera("ref", 0.0, radius=150.0)
    assert np.allclose(cam.extrinsics.rotation, REF.rotation, atol=1e-12)
    recs = annotate_frame(FaceFrame(0, ((0, TEMPLATE.landmarks),)), [cam], TEMPLATE, REF)
    assert len(recs) == 1
    assert close_pose(recs[0].pose, (0, 0, 0), 1e-9)


def test_four_camera_dome():
    calib = dome_calibration([0, 90, 180, 270])
    recs = annotate_frame(FaceFrame(0, ((0, TEMPLATE.landmarks),)), calib.cameras, TEMPLATE, REF)
    got = {r.camera_id: r.pose for r in recs}
    for name, yaw in zip(["00_00", "00_01", "00_02", "00_03"], [0, -90, 180, 90]):
        assert close_pose(got[name], (0, yaw, 0))
    assert got["00_02"].yaw == 180.0 or abs(got["00_02"].yaw) > 180 - 1e-6
    assert all(r.near_gimbal == (abs(abs(r.pose.yaw) - 90) < 1) for r in recs)


def test_degenerate_subject_skipped():
    line = np.outer(np.linspace(-5, 5, 70), [1.0, 0.5, 0.2])
    skips = []
    recs = annotate_frame(FaceFrame(3, ((1, line),)), dome_calibration([0, 90]).cameras, TEMPLATE, REF, skips=skips)
    assert recs == [] and len(skips) == 1


@settings(max_examples=60)
@given(st.floats(-180, 180), st.floats(-30, 30), st.sampled_from([0.0, 45.0, 90.0, 135.0, 180.0, 225.0, 270.0, 315.0]))
def test_labels_match_composed_truth(yaw, roll, az):
    # oracle: a camera with rotation Ry(az) sees subject Ry(yaw)Rz(roll) as
    # Ry(az + yaw)Rz(roll), so the mirrored label is (0, -(az + yaw), -roll)
    pts = pose_subject(TEMPLATE, rot_y(yaw) @ rot_z(roll), [3.0, -2.0, 5.0])
    cam = dome_camera("c", az)
    (rec,) = annotate_frame(FaceFrame(0, ((0, pts),)), [cam], TEMPLATE, REF)
    expect = normalize_pose(EulerPose(0.0, -(az + yaw), -roll))
    assert close_pose(rec.pose, expect.as_array())


@settings(max_examples=60)
@given(st.floats(-80, 80), st.floats(-180, 180), st.floats(-60, 60))
def test_labels_with_pitch_frontal_camera(pitch, yaw, roll):
    if abs(math.cos(math.radians(yaw))) < 1e-3:
        return
    R = rot_x(pitch) @ rot_y(yaw) @ rot_z(roll)
    cam = dome_camera("c", 0.0)
    (rec,) = annotate_frame(FaceFrame(0, ((0, pose_subject(TEMPLATE, R)),)), [cam], TEMPLATE, REF)
    assert close_pose(rec.pose, normalize_pose(EulerPose(pitch, -yaw, -roll)).as_array())


@given(st.floats(-180, 180))
def test_spin_shifts_yaw(delta):
    calib = dome_calibration([0, 60, 150, 240, 300])
    base = pose_subject(TEMPLATE, rot_z(7.0))
    spun = pose_subject(TEMPLATE, rot_y(delta) @ rot_z(7.0))
    a = annotate_frame(FaceFrame(0, ((0, base),)), calib.cameras, TEMPLATE, REF)
    b = annotate_frame(FaceFrame(0, ((0, spun),)), calib.cameras, TEMPLATE, REF)
    for ra, rb in zip(a, b):
        expect = EulerPose(ra.pose.pitch, ra.pose.yaw - delta, ra.pose.roll)
        assert close_pose(rb.pose, expect.as_array())
        if abs(abs(rb.pose.yaw) - 90) > LOCK_BAND:
            assert abs(rb.pose.pitch - ra.pose.pitch) < 1e-6


def test_reference_distance_invariance():
    calib, frames, _ = random_scene(TEMPLATE, 3, n_cameras=12, seed=5)
    a = list(annotate_frames(frames, calib.cameras, TEMPLATE, reference_camera(150)))
    b = list(annotate_frames(frames, calib.cameras, TEMPLATE, reference_camera(400)))
    assert len(a) == len(b)
    for ra, rb in zip(a, b):
        assert close_pose(ra.pose, rb.pose.as_array(), 1e-9)


def test_records_normalized_and_boxed():
    calib, frames, _ = random_scene(TEMPLATE, 4, n_subjects=2, seed=9, noise=0.2)
    recs = list(annotate_frames(frames, calib.cameras, TEMPLATE, REF))
    assert recs and [r.key for r in recs] == sorted(r.key for r in recs)
    for r in recs:
        assert normalize_pose(r.pose) == r.pose
        x0, y0, x1, y1 = r.crop_box
        assert 0 <= x0 < x1 <= 1920 and 0 <= y0 < y1 <= 1080
        assert r.fit_rms > 0
