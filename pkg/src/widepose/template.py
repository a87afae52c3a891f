"""Reference face template for the 70-point dome face layout.

Indices follow the 68-point layout plus two pupils:
0-16 jaw contour, 17-26 brows, 27-35 nose, 36-47 eyes, 48-67 lips,
68-69 pupils. The default geometry is a generic adult face in centimeters,
centered on the centroid of the retained landmarks. The face looks along
-z; +x is image right and +y is down for a camera on the -z side.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .rigid import RigidTransform

FACE70_COUNT = 70
JAWLINE = frozenset(range(17))


@dataclass(frozen=True)
class ReferenceTemplate:
    landmarks: np.ndarray
    excluded_indices: frozenset = field(default_factory=lambda: JAWLINE)

    def __post_init__(self):
        pts = np.array(self.landmarks, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"template landmarks must be (M, 3), got {pts.shape}")
        pts.setflags(write=False)
        object.__setattr__(self, "landmarks", pts)
        object.__setattr__(self, "excluded_indices", frozenset(int(i) for i in self.excluded_indices))
        if len(self.retained_indices) < 3:
            raise ValueError("template keeps fewer than 3 landmarks")

    @property
    def count(self) -> int:
        return len(self.landmarks)

    @property
    def retained_indices(self) -> np.ndarray:
        return np.array([i for i in range(self.count) if i not in self.excluded_indices], dtype=int)

    @property
    def retained(self) -> np.ndarray:
        return self.landmarks[self.retained_indices]


def _ellipse(center, rx, ry, n, z0, dz):
    t = np.linspace(0.0, 2 * np.pi, n, endpoint=False)
    x = center[0] - rx * np.cos(t)
    y = center[1] - ry * np.sin(t)
    z = z0 - dz * np.cos(t) ** 2
    return np.stack([x, y, z], axis=1)


def _default_landmarks() -> np.ndarray:
    t = np.linspace(-1.0, 1.0, 17) * (np.pi / 2) * 0.95
    jaw = np.stack([7.0 * np.sin(t), -1.0 + 9.0 * np.cos(t), 4.0 - 5.0 * np.cos(t)], axis=1)

    u = np.linspace(0.0, 1.0, 5)
    arch = np.sin(np.pi * u)
    brow_r = np.stack([-5.5 + 4.3 * u, -4.0 - 0.5 * arch, -1.0 - 0.6 * arch], axis=1)
    brow_l = brow_r[::-1] * np.array([-1.0, 1.0, 1.0])

    bridge = np.stack([np.zeros(4), np.linspace(-2.5, 1.5, 4), np.linspace(-2.0, -4.0, 4)], axis=1)
    nx = np.linspace(-1.6, 1.6, 5)
    nostrils = np.stack([nx, np.full(5, 2.3), -2.5 - 0.6 * (1.0 - np.abs(nx) / 1.6)], axis=1)

    eye_r = _ellipse((-3.2, -2.0), 1.4, 0.5, 6, -1.2, 0.3)
    eye_l = eye_r * np.array([-1.0, 1.0, 1.0])
    lips_outer = _ellipse((0.0, 4.8), 2.6, 1.1, 12, -2.0, -0.5)
    lips_inner = _ellipse((0.0, 4.8), 1.8, 0.4, 8, -2.2, -0.3)
    pupils = np.array([[-3.2, -2.0, -1.4], [3.2, -2.0, -1.4]])

    pts = np.concatenate(
        [jaw, brow_r, brow_l, bridge, nostrils, eye_r, eye_l, lips_outer, lips_inner, pupils]
    )
    assert len(pts) == FACE70_COUNT
    keep = [i for i in range(FACE70_COUNT) if i not in JAWLINE]
    return pts - pts[keep].mean(axis=0)


def default_template() -> ReferenceTemplate:
    return ReferenceTemplate(_default_landmarks(), JAWLINE)


def reference_camera(distance: float = 150.0) -> RigidTransform:
    """Frontal camera on the template's -z side, ``distance`` cm away."""
    return RigidTransform(np.eye(3), np.array([0.0, 0.0, distance]))


def load_template(path) -> ReferenceTemplate:
    """Read ``{"landmarks": [[x, y, z], ...], "excluded_indices": [...]}``."""
    data = json.loads(Path(path).read_text())
    return ReferenceTemplate(
        np.asarray(data["landmarks"], dtype=float),
        frozenset(data.get("excluded_indices", sorted(JAWLINE))),
    )
