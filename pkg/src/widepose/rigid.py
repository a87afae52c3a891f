"""Closed-form least-squares rigid alignment of corresponding 3D points."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DegenerateFitError(ValueError):
    """Point sets too small, mismatched or colinear to fix a rotation."""


@dataclass(frozen=True)
class RigidTransform:
    """x -> rotation @ x + translation."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float).reshape(3, 3)
        t = np.array(self.translation, dtype=float).reshape(3)
        R.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)

    @classmethod
    def from_matrix(cls, M) -> "RigidTransform":
        M = np.asarray(M, dtype=float)
        return cls(M[:3, :3], M[:3, 3])

    def matrix(self) -> np.ndarray:
        M = np.eye(4)
        M[:3, :3] = self.rotation
        M[:3, 3] = self.translation
        return M

    def inverse(self) -> "RigidTransform":
        Rt = self.rotation.T
        return RigidTransform(Rt, -Rt @ self.translation)

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        """Composition: (self @ other)(x) == self(other(x))."""
        return RigidTransform(
            self.rotation @ other.rotation,
            self.rotation @ other.translation + self.translation,
        )

    def apply(self, pts) -> np.ndarray:
        return apply_rigid(self, pts)


def _points(pts) -> np.ndarray:
    P = np.asarray(pts, dtype=float)
    if P.ndim != 2 or P.shape[1] != 3:
        raise ValueError(f"expected an (M, 3) point array, got shape {P.shape}")
    if not np.all(np.isfinite(P)):
        raise ValueError("point coordinates must be finite")
    return P


def fit_rigid(source, target) -> RigidTransform:
    """Rotation + translation minimizing sum ||T(source_k) - target_k||^2.

    Kabsch/Umeyama without scale. The sign of the smallest singular
    direction is flipped when needed so the result is never a reflection.
    """
    P = _points(source)
    Q = _points(target)
    if P.shape != Q.shape:
        raise DegenerateFitError(f"mismatched point counts {len(P)} and {len(Q)}")
    if len(P) < 3:
        raise DegenerateFitError(f"need at least 3 points, got {len(P)}")

    cp = P.mean(axis=0)
    cq = Q.mean(axis=0)
    Pc = P - cp
    Qc = Q - cq

    for name, X in (("source", Pc), ("target", Qc)):
        sv = np.linalg.svd(X, compute_uv=False)
        if sv[0] == 0.0 or sv[1] <= 1e-9 * sv[0]:
            raise DegenerateFitError(f"{name} points are colinear or coincident")

    H = Pc.T @ Qc
    U, _, Vt = np.linalg.svd(H)
    d = 1.0 if np.linalg.det(Vt.T @ U.T) >= 0.0 else -1.0
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    return RigidTransform(R, cq - R @ cp)


def apply_rigid(t: RigidTransform, pts) -> np.ndarray:
    P = _points(pts)
    return P @ t.rotation.T + t.translation


def residual_rms(t: RigidTransform, source, target) -> float:
    """Root mean square of the per-point residual distances."""
    P = _points(source)
    Q = _points(target)
    if P.shape != Q.shape:
        raise ValueError(f"mismatched point counts {len(P)} and {len(Q)}")
    r = apply_rigid(t, P) - Q
    return float(np.sqrt(np.mean(np.sum(r * r, axis=1))))
