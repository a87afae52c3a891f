"""Euler angles, rotation matrices and wrapped angular errors.

Poses are (pitch, yaw, roll) in degrees. The rotation is composed as

    R = Rx(pitch) @ Ry(yaw) @ Rz(roll)

(intrinsic x-y-z), right handed. Yaw is the middle angle, so the
decomposition degenerates at yaw = +/-90 deg. Extraction always picks the
branch with |pitch| <= 90 so that yaw can cover the full circle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

CONVENTION = "intrinsic x-y-z: R = Rx(pitch) Ry(yaw) Rz(roll), degrees"

# |sin(yaw)| above this is treated as gimbal lock
GIMBAL_LOCK_TOL = 1e-7


@dataclass(frozen=True)
class EulerPose:
    pitch: float
    yaw: float
    roll: float

    convention = CONVENTION

    def as_array(self) -> np.ndarray:
        return np.array([self.pitch, self.yaw, self.roll], dtype=float)

    def normalized(self) -> "EulerPose":
        return normalize_pose(self)

    def is_finite(self) -> bool:
        return all(math.isfinite(v) for v in (self.pitch, self.yaw, self.roll))


def wrap_angle(theta):
    """Wrap degrees into (-180, 180]. Works on scalars and arrays."""
    arr = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"cannot wrap non-finite angle: {theta!r}")
    r = np.fmod(arr, 360.0)
    r = np.where(r > 180.0, r - 360.0, r)
    r = np.where(r <= -180.0, r + 360.0, r)
    if r.ndim == 0:
        return float(r)
    return r


def normalize_pose(pose: EulerPose) -> EulerPose:
    """Canonical form of a pose: |pitch| <= 90, every angle in (-180, 180].

    Poses with |pitch| > 90 are replaced by the equivalent triple
    (pitch + 180, 180 - yaw, roll + 180), which is the same rotation.
    """
    if not pose.is_finite():
        raise ValueError(f"non-finite pose: {pose}")
    pitch = wrap_angle(pose.pitch)
    yaw = wrap_angle(pose.yaw)
    roll = wrap_angle(pose.roll)
    if abs(pitch) > 90.0:
        pitch = wrap_angle(pitch + 180.0)
        yaw = wrap_angle(180.0 - yaw)
        roll = wrap_angle(roll + 180.0)
    return EulerPose(pitch, yaw, roll)


def rot_x(deg: float) -> np.ndarray:
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(deg: float) -> np.ndarray:
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(deg: float) -> np.ndarray:
    a = math.radians(deg)
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def euler_to_matrix(pose: EulerPose) -> np.ndarray:
    if not pose.is_finite():
        raise ValueError(f"non-finite pose: {pose}")
    return rot_x(pose.pitch) @ rot_y(pose.yaw) @ rot_z(pose.roll)


def orthonormality_error(R: np.ndarray) -> float:
    R = np.asarray(R, dtype=float)
    return float(np.max(np.abs(R.T @ R - np.eye(3))))


def is_gimbal_locked(R: np.ndarray, tol: float = GIMBAL_LOCK_TOL) -> bool:
    return abs(float(R[0, 2])) > 1.0 - tol


def matrix_to_euler(R: np.ndarray, tol: float = 1e-6) -> EulerPose:
    """Decompose a rotation matrix into (pitch, yaw, roll) degrees.

    At gimbal lock (|R[0, 2]| within 1e-7 of 1) roll is set to 0 and the
    remaining rotation about x is reported as pitch.
    """
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3) or not np.all(np.isfinite(R)):
        raise ValueError("expected a finite 3x3 rotation matrix")
    if orthonormality_error(R) > tol or np.linalg.det(R) < 0.0:
        raise ValueError(
            f"matrix is not a proper rotation (orthonormality error "
            f"{orthonormality_error(R):.3g}, det {np.linalg.det(R):.6f})"
        )

    s = min(1.0, max(-1.0, float(R[0, 2])))
    if abs(s) > 1.0 - GIMBAL_LOCK_TOL:
        yaw = math.copysign(90.0, s)
        pitch = math.degrees(math.atan2(s * R[1, 0], R[1, 1]))
        return normalize_pose(EulerPose(pitch, yaw, 0.0))

    pitch_rad = math.atan2(-R[1, 2], R[2, 2])
    if abs(pitch_rad) > math.pi / 2:
        # other branch: cos(yaw) < 0
        pitch_rad = math.atan2(R[1, 2], -R[2, 2])
    ca, sa = math.cos(pitch_rad), math.sin(pitch_rad)
    cos_yaw = ca * R[2, 2] - sa * R[1, 2]
    yaw_rad = math.atan2(s, cos_yaw)
    if cos_yaw >= 0.0:
        roll_rad = math.atan2(-R[0, 1], R[0, 0])
    else:
        roll_rad = math.atan2(R[0, 1], -R[0, 0])
    return EulerPose(
        wrap_angle(math.degrees(pitch_rad)),
        wrap_angle(math.degrees(yaw_rad)),
        wrap_angle(math.degrees(roll_rad)),
    )


def awe(pred, true):
    """Absolute wrapped error in degrees, in [0, 180]."""
    p = np.asarray(pred, dtype=float)
    t = np.asarray(true, dtype=float)
    if not (np.all(np.isfinite(p)) and np.all(np.isfinite(t))):
        raise ValueError("awe needs finite angles")
    d = np.abs(p - t) % 360.0
    err = np.minimum(d, 360.0 - d)
    if err.ndim == 0:
        return float(err)
    return err


def exact_mean(values) -> float:
    """Correctly rounded arithmetic mean (independent of summation order).

    Every finite float is n / 2^k, so the sum is an exact integer over a
    common power-of-two denominator; int / int rounds once.
    """
    ratios = [float(v).as_integer_ratio() for v in np.asarray(values, dtype=float).ravel()]
    if not ratios:
        raise ValueError("mean of an empty sequence")
    den = max(d for _, d in ratios)
    total = sum(n * (den // d) for n, d in ratios)
    return total / (den * len(ratios))


def mawe(preds, trues) -> float:
    """Mean absolute wrapped error."""
    p = np.asarray(preds, dtype=float).ravel()
    t = np.asarray(trues, dtype=float).ravel()
    if p.size == 0 or p.size != t.size:
        raise ValueError(f"mawe needs equal nonzero lengths, got {p.size} and {t.size}")
    return exact_mean(awe(p, t))


def euler_matrices(pitch, yaw, roll) -> np.ndarray:
    """Vectorized euler_to_matrix: arrays of degrees -> (n, 3, 3)."""
    a, b, c = (np.radians(np.asarray(v, dtype=float)).ravel() for v in (pitch, yaw, roll))
    ca, sa, cb, sb, cc, sc = np.cos(a), np.sin(a), np.cos(b), np.sin(b), np.cos(c), np.sin(c)
    R = np.empty((a.size, 3, 3))
    R[:, 0, 0] = cb * cc
    R[:, 0, 1] = -cb * sc
    R[:, 0, 2] = sb
    R[:, 1, 0] = ca * sc + sa * sb * cc
    R[:, 1, 1] = ca * cc - sa * sb * sc
    R[:, 1, 2] = -sa * cb
    R[:, 2, 0] = sa * sc - ca * sb * cc
    R[:, 2, 1] = sa * cc + ca * sb * sc
    R[:, 2, 2] = ca * cb
    return R
