"""Pinhole camera model for calibrated multi-camera rigs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rigid import RigidTransform

# World-to-camera map: p_cam = R @ p_world + t (centimeters).
CameraExtrinsics = RigidTransform


@dataclass(frozen=True)
class CameraIntrinsics:
    K: np.ndarray
    resolution: tuple[int, int]  # (width, height) px
    distortion: np.ndarray = field(default_factory=lambda: np.zeros(5))

    def __post_init__(self):
        K = np.array(self.K, dtype=float).reshape(3, 3)
        dist = np.array(self.distortion, dtype=float).reshape(-1)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "distortion", dist)
        object.__setattr__(self, "resolution", (int(self.resolution[0]), int(self.resolution[1])))

    def validate(self) -> None:
        K = self.K
        w, h = self.resolution
        if not np.all(np.isfinite(K)):
            raise ValueError("K has non-finite entries")
        if abs(np.linalg.det(K)) < 1e-12:
            raise ValueError("K is not invertible")
        if K[0, 0] <= 0 or K[1, 1] <= 0:
            raise ValueError("focal lengths must be positive")
        if w <= 0 or h <= 0:
            raise ValueError(f"bad resolution {self.resolution}")
        cx, cy = K[0, 2], K[1, 2]
        if not (-0.5 * w <= cx <= 1.5 * w and -0.5 * h <= cy <= 1.5 * h):
            raise ValueError(f"principal point ({cx}, {cy}) far outside the image")


@dataclass(frozen=True)
class Camera:
    name: str
    intrinsics: CameraIntrinsics
    extrinsics: CameraExtrinsics
    type: str = "hd"
    # set when the loader had to re-orthonormalize R
    reorthonormalized: bool = False


def project(intr: CameraIntrinsics, extr: CameraExtrinsics, pts_world) -> tuple[np.ndarray, np.ndarray]:
    """Pinhole projection. Returns (uv pixels, camera-frame depth).

    Distortion coefficients are ignored.
    """
    pc = np.asarray(pts_world, dtype=float) @ extr.rotation.T + extr.translation
    z = pc[:, 2]
    uvw = pc @ intr.K.T
    with np.errstate(divide="ignore", invalid="ignore"):
        uv = uvw[:, :2] / uvw[:, 2:3]
    return uv, z


def look_at(position, target, up=(0.0, -1.0, 0.0)) -> CameraExtrinsics:
    """Extrinsics of a camera at ``position`` whose +z axis points at ``target``.

    Camera axes follow the image convention: x right, y down. ``up`` is the
    world direction that should appear upward in the image.
    """
    c = np.asarray(position, dtype=float)
    z = np.asarray(target, dtype=float) - c
    z = z / np.linalg.norm(z)
    down = -np.asarray(up, dtype=float)
    x = np.cross(down, z)
    if np.linalg.norm(x) < 1e-12:
        raise ValueError("up direction is parallel to the viewing direction")
    x = x / np.linalg.norm(x)
    y = np.cross(z, x)
    R = np.stack([x, y, z])
    return RigidTransform(R, -R @ c)
