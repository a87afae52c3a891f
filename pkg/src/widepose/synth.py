"""Synthetic camera domes and posed faces, for demos and pipeline checks.

World frame: origin at the dome center, -y is up. A camera at azimuth phi
on the equator sits at radius * (sin phi, 0, -cos phi) looking at the
center, so its rotation is exactly Ry(phi).
"""

from __future__ import annotations

import math

import numpy as np

from .angles import rot_y, rot_z
from .camera import Camera, CameraIntrinsics, look_at
from .records import CalibrationSet, FaceFrame
from .template import ReferenceTemplate


def dome_camera(
    name: str,
    azimuth: float,
    elevation: float = 0.0,
    radius: float = 300.0,
    focal: float = 1400.0,
    resolution: tuple[int, int] = (1920, 1080),
    target=(0.0, 0.0, 0.0),
) -> Camera:
    az, el = math.radians(azimuth), math.radians(elevation)
    pos = np.array(
        [radius * math.cos(el) * math.sin(az), -radius * math.sin(el), -radius * math.cos(el) * math.cos(az)]
    ) + np.asarray(target, dtype=float)
    w, h = resolution
    K = np.array([[focal, 0.0, w / 2.0], [0.0, focal, h / 2.0], [0.0, 0.0, 1.0]])
    return Camera(name, CameraIntrinsics(K, resolution), look_at(pos, target), "hd")


def dome_calibration(azimuths, elevations=(0.0,), **kwargs) -> CalibrationSet:
    calib = CalibrationSet()
    for j, el in enumerate(elevations):
        for i, az in enumerate(azimuths):
            cam = dome_camera(f"{j:02d}_{i:02d}", az, el, **kwargs)
            calib.cameras[cam.name] = cam
    return calib


def pose_subject(template: ReferenceTemplate, rotation, position=(0.0, 0.0, 0.0)) -> np.ndarray:
    """Template landmarks rotated by ``rotation`` and moved to ``position``."""
    R = np.asarray(rotation, dtype=float)
    return template.landmarks @ R.T + np.asarray(position, dtype=float)


def random_scene(
    template: ReferenceTemplate,
    n_frames: int,
    n_subjects: int = 1,
    n_cameras: int = 31,
    seed: int = 42,
    noise: float = 0.0,
):
    """A dome with ``n_cameras`` on two rings and frames of upright subjects
    turning about the vertical axis. Returns (calibration, frames, truth)
    where truth maps (frame_id, subject_id) to the world rotation."""
    rng = np.random.default_rng(seed)
    lower = n_cameras // 2
    calib = CalibrationSet()
    for i in range(n_cameras):
        ring = 0 if i < lower else 1
        k = i if ring == 0 else i - lower
        count = lower if ring == 0 else n_cameras - lower
        cam = dome_camera(f"{ring:02d}_{k:02d}", 360.0 * k / count, 25.0 * ring)
        calib.cameras[cam.name] = cam

    frames, truth = [], {}
    for f in range(n_frames):
        subjects = []
        for s in range(n_subjects):
            R = rot_y(rng.uniform(-180.0, 180.0)) @ rot_z(rng.uniform(-20.0, 20.0))
            pos = np.array([rng.uniform(-40, 40), rng.uniform(-20, 20), rng.uniform(-40, 40)])
            pts = pose_subject(template, R, pos)
            if noise > 0:
                pts = pts + rng.normal(0.0, noise, pts.shape)
            subjects.append((s, pts))
            truth[(f, s)] = R
        frames.append(FaceFrame(f, tuple(subjects)))
    return calib, frames, truth
