"""Camera-relative head-pose labels and crop boxes from multi-camera 3D landmarks.

For each subject the reference template is rigidly fitted to the observed
landmarks (template -> world). A virtual camera that sees the subject as
the reference camera sees the template is ``E_virt = E_ref @ fit^-1``;
each real camera then differs from it by ``E_real @ E_virt^-1``, whose
rotation is decomposed into pitch/yaw/roll with yaw and roll negated.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np

from .angles import EulerPose, matrix_to_euler, normalize_pose
from .camera import Camera, CameraExtrinsics, CameraIntrinsics, project
from .records import AnnotationRecord, FaceFrame, SkipReport
from .rigid import DegenerateFitError, fit_rigid, residual_rms
from .template import ReferenceTemplate

log = logging.getLogger(__name__)

# labels with | |yaw| - 90 | below this are flagged near_gimbal
GIMBAL_WARN_DEG = 1.0


@dataclass(frozen=True)
class HelmetConfig:
    radius: float = 21.0
    sample_count: int = 256
    margin_k: float = 0.5

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("helmet radius must be positive")
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")
        if not self.margin_k >= 0:
            raise ValueError("margin_k must be >= 0")


class FitError(ValueError):
    def __init__(self, msg, frame_id=None, subject_id=None):
        super().__init__(f"frame {frame_id} subject {subject_id}: {msg}")
        self.frame_id = frame_id
        self.subject_id = subject_id


def build_virtual_extrinsics(
    template: ReferenceTemplate,
    ref_cam: CameraExtrinsics,
    observed,
    frame_id=None,
    subject_id=None,
) -> tuple[CameraExtrinsics, float]:
    obs = np.asarray(observed, dtype=float)
    if obs.shape != (template.count, 3):
        raise FitError(
            f"expected {template.count} landmarks, got shape {obs.shape}", frame_id, subject_id
        )
    idx = template.retained_indices
    src, dst = template.landmarks[idx], obs[idx]
    try:
        fit = fit_rigid(src, dst)
    except (DegenerateFitError, ValueError) as exc:
        raise FitError(str(exc), frame_id, subject_id) from exc
    return ref_cam @ fit.inverse(), residual_rms(fit, src, dst)


def camera_relative_pose(e_real: CameraExtrinsics, e_virt: CameraExtrinsics) -> EulerPose:
    rel = e_real @ e_virt.inverse()
    p = matrix_to_euler(rel.rotation)
    return normalize_pose(EulerPose(p.pitch, -p.yaw, -p.roll))


def fibonacci_sphere(n: int) -> np.ndarray:
    """``n`` near-uniform unit vectors (golden-angle spiral)."""
    i = np.arange(n, dtype=float) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = np.pi * (1.0 + math.sqrt(5.0)) * i
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def expand_box(box, margin_k: float):
    x0, y0, x1, y1 = box
    side = (1.0 + margin_k) * max(x1 - x0, y1 - y0)
    cx, cy = 0.5 * (x0 + x1), 0.5 * (y0 + y1)
    return (cx - 0.5 * side, cy - 0.5 * side, cx + 0.5 * side, cy + 0.5 * side)


def helmet_bbox(head_center, cfg: HelmetConfig, intr: CameraIntrinsics, extr: CameraExtrinsics):
    """Crop box (x_min, y_min, x_max, y_max) around the projected helmet sphere.

    Returns None when the head center is not in front of the camera (or the
    camera sits inside the helmet) or when the clamped box is empty.
    """
    c = np.asarray(head_center, dtype=float).reshape(3)
    depth = float((extr.rotation @ c + extr.translation)[2])
    if depth <= cfg.radius:
        return None
    pts = c + cfg.radius * fibonacci_sphere(cfg.sample_count)
    uv, _ = project(intr, extr, pts)
    raw = (uv[:, 0].min(), uv[:, 1].min(), uv[:, 0].max(), uv[:, 1].max())
    x0, y0, x1, y1 = expand_box(raw, cfg.margin_k) if cfg.margin_k > 0 else raw

    w, h = intr.resolution
    x0, x1 = max(0.0, x0), min(float(w), x1)
    y0, y1 = max(0.0, y0), min(float(h), y1)
    if x1 <= x0 or y1 <= y0:
        return None
    return (float(x0), float(y0), float(x1), float(y1))


def annotate_frame(
    frame: FaceFrame,
    cameras: Iterable[Camera] | Mapping[str, Camera],
    template: ReferenceTemplate,
    ref_cam: CameraExtrinsics,
    helmet: HelmetConfig = HelmetConfig(),
    skips: list | None = None,
) -> list[AnnotationRecord]:
    """One record per (subject, camera) whose crop survives clamping.

    Subjects whose template fit fails are appended to ``skips`` and left out.
    """
    if skips is None:
        skips = []
    cams = list(cameras.values()) if isinstance(cameras, Mapping) else list(cameras)
    if not cams:
        raise ValueError("annotate_frame needs at least one camera")

    records = []
    idx = template.retained_indices
    for sid, pts in frame.subjects:
        try:
            e_virt, rms = build_virtual_extrinsics(template, ref_cam, pts, frame.frame_id, sid)
        except FitError as exc:
            skips.append(SkipReport(f"frame {frame.frame_id} subject {sid}", str(exc)))
            log.info("skip: %s", exc)
            continue
        center = np.asarray(pts, dtype=float)[idx].mean(axis=0)
        for cam in cams:
            box = helmet_bbox(center, helmet, cam.intrinsics, cam.extrinsics)
            if box is None:
                continue
            pose = camera_relative_pose(cam.extrinsics, e_virt)
            records.append(
                AnnotationRecord(
                    frame_id=frame.frame_id,
                    subject_id=sid,
                    camera_id=cam.name,
                    pose=pose,
                    crop_box=box,
                    fit_rms=rms,
                    near_gimbal=abs(abs(pose.yaw) - 90.0) < GIMBAL_WARN_DEG,
                )
            )
    return records


def annotate_frames(
    frames: Iterable[FaceFrame],
    cameras,
    template: ReferenceTemplate,
    ref_cam: CameraExtrinsics,
    helmet: HelmetConfig = HelmetConfig(),
    skips: list | None = None,
) -> Iterator[AnnotationRecord]:
    """Annotate a frame stream; output sorted by (frame, subject, camera)."""
    for frame in frames:
        recs = annotate_frame(frame, cameras, template, ref_cam, helmet, skips)
        yield from sorted(recs, key=lambda r: r.key)
