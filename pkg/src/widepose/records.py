"""File formats: dome calibration JSON, per-frame face landmark JSON, and
JSON Lines annotation / prediction records.

Calibration::

    {"cameras": [{"name": "00_03", "type": "hd", "resolution": [1920, 1080],
                  "K": [[fx, 0, cx], [0, fy, cy], [0, 0, 1]],
                  "distCoef": [k1, k2, p1, p2, k3],
                  "R": [[...], [...], [...]], "t": [[tx], [ty], [tz]]}, ...]}

Face frame (one file per frame, frame id = last digit run of the file name)::

    {"people": [{"id": 0, "face70": {"landmarks": [x0, y0, z0, x1, ...]}}]}

Records are JSON Lines preceded by one ``#`` header line. Floats are written
with Python's shortest round-trip repr, so load(write(x)) == x bit for bit.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .angles import EulerPose, orthonormality_error
from .camera import Camera, CameraIntrinsics
from .rigid import RigidTransform

ANNOTATION_HEADER = "# widepose annotations v1"
PREDICTION_HEADER = "# widepose predictions v1"

R_REJECT_TOL = 1e-4
R_REPAIR_TOL = 1e-6


class DataError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True)
class SkipReport:
    source: str
    reason: str


@dataclass(frozen=True)
class AnnotationRecord:
    frame_id: int
    subject_id: int
    camera_id: str
    pose: EulerPose
    crop_box: tuple[float, float, float, float]
    fit_rms: float
    near_gimbal: bool = False

    @property
    def key(self) -> tuple[int, int, str]:
        return (self.frame_id, self.subject_id, self.camera_id)


@dataclass(frozen=True)
class PredictionRecord:
    frame_id: int
    subject_id: int
    camera_id: str
    pose: EulerPose

    @property
    def key(self) -> tuple[int, int, str]:
        return (self.frame_id, self.subject_id, self.camera_id)


@dataclass(frozen=True)
class FaceFrame:
    frame_id: int
    subjects: tuple[tuple[int, np.ndarray], ...] = field(default_factory=tuple)


@dataclass
class CalibrationSet:
    cameras: dict[str, Camera] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.cameras)

    def __iter__(self) -> Iterator[Camera]:
        return iter(self.cameras.values())

    def __getitem__(self, name: str) -> Camera:
        return self.cameras[name]


# -- calibration ------------------------------------------------------------


def _matrix(value, shape, what, cam_id):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DataError(f"camera {cam_id}: {what} is not numeric") from exc
    if arr.size != int(np.prod(shape)):
        raise DataError(f"camera {cam_id}: {what} has {arr.size} entries, expected {np.prod(shape)}")
    arr = arr.reshape(shape)
    if not np.all(np.isfinite(arr)):
        raise DataError(f"camera {cam_id}: {what} has non-finite entries")
    return arr


def parse_camera(entry: dict) -> Camera:
    if not isinstance(entry, dict):
        raise DataError(f"camera entry is not an object: {entry!r}")
    cam_id = entry.get("name", "<unnamed>")
    for key in ("name", "K", "R", "t", "resolution"):
        if key not in entry:
            raise DataError(f"camera {cam_id}: missing field {key!r}")
    cam_id = str(entry["name"])

    K = _matrix(entry["K"], (3, 3), "K", cam_id)
    R = _matrix(entry["R"], (3, 3), "R", cam_id)
    t = _matrix(entry["t"], (3,), "t", cam_id)
    res = _matrix(entry["resolution"], (2,), "resolution", cam_id)
    dist = _matrix(entry.get("distCoef", [0.0] * 5), (5,), "distCoef", cam_id)

    intr = CameraIntrinsics(K, (int(res[0]), int(res[1])), dist)
    try:
        intr.validate()
    except ValueError as exc:
        raise DataError(f"camera {cam_id}: {exc}") from exc

    if np.linalg.det(R) <= 0:
        raise DataError(f"camera {cam_id}: R is a reflection (det {np.linalg.det(R):.6f})")
    err = orthonormality_error(R)
    if err > R_REJECT_TOL:
        raise DataError(f"camera {cam_id}: R is not orthonormal (error {err:.3g})")
    repaired = err > R_REPAIR_TOL
    if repaired:
        U, _, Vt = np.linalg.svd(R)
        R = U @ Vt

    return Camera(
        name=cam_id,
        intrinsics=intr,
        extrinsics=RigidTransform(R, t),
        type=str(entry.get("type", "hd")),
        reorthonormalized=repaired,
    )


def load_calibration(path, camera_types: Iterable[str] | None = None) -> CalibrationSet:
    """Load a dome calibration file, optionally keeping only some camera types."""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"{path}: cannot read calibration: {exc}") from exc
    if not isinstance(data, dict) or not isinstance(data.get("cameras"), list):
        raise DataError(f"{path}: expected a top-level 'cameras' array")

    keep = None if camera_types is None else set(camera_types)
    calib = CalibrationSet()
    for entry in data["cameras"]:
        if keep is not None and isinstance(entry, dict) and entry.get("type", "hd") not in keep:
            continue
        cam = parse_camera(entry)
        if cam.name in calib.cameras:
            raise DataError(f"{path}: duplicate camera id {cam.name}")
        calib.cameras[cam.name] = cam
    return calib


def camera_to_json(cam: Camera) -> dict:
    return {
        "name": cam.name,
        "type": cam.type,
        "resolution": list(cam.intrinsics.resolution),
        "K": cam.intrinsics.K.tolist(),
        "distCoef": cam.intrinsics.distortion.tolist(),
        "R": cam.extrinsics.rotation.tolist(),
        "t": [[v] for v in cam.extrinsics.translation.tolist()],
    }


def write_calibration(calib: CalibrationSet, path) -> None:
    doc = {"cameras": [camera_to_json(c) for c in calib]}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n")


# -- face frames -------------------------------------------------------------


def frame_id_from_name(name: str) -> int:
    runs = re.findall(r"\d+", Path(name).stem)
    if not runs:
        raise DataError(f"{name}: no frame number in file name")
    return int(runs[-1])


def parse_face_frame(data, frame_id: int, landmark_count: int, source: str, skips) -> FaceFrame:
    if not isinstance(data, dict) or not isinstance(data.get("people"), list):
        raise DataError(f"{source}: expected a top-level 'people' array")
    subjects = []
    for k, person in enumerate(data["people"]):
        where = f"{source}: person #{k}"
        try:
            sid = int(person["id"])
            flat = np.asarray(person["face70"]["landmarks"], dtype=float).ravel()
        except (KeyError, TypeError, ValueError):
            skips.append(SkipReport(where, "missing id or face70 landmarks"))
            continue
        if flat.size % 3 or flat.size // 3 != landmark_count:
            skips.append(
                SkipReport(f"{source}: subject {sid}", f"{flat.size // 3} landmarks, expected {landmark_count}")
            )
            continue
        if not np.all(np.isfinite(flat)):
            skips.append(SkipReport(f"{source}: subject {sid}", "non-finite landmark"))
            continue
        subjects.append((sid, flat.reshape(-1, 3)))
    return FaceFrame(frame_id, tuple(subjects))


def load_face_frames(path, landmark_count: int = 70, skips: list | None = None) -> Iterator[FaceFrame]:
    """Yield face frames in ascending frame id from a file or directory."""
    if skips is None:
        skips = []
    path = Path(path)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    indexed = sorted((frame_id_from_name(f.name), f.name, f) for f in files)

    seen = set()
    for frame_id, _, f in indexed:
        if frame_id in seen:
            skips.append(SkipReport(str(f), f"duplicate frame id {frame_id}"))
            continue
        seen.add(frame_id)
        try:
            data = json.loads(f.read_text())
        except (OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise DataError(f"{f}: cannot parse face frame: {exc}") from exc
        yield parse_face_frame(data, frame_id, landmark_count, str(f), skips)


def write_face_frame(frame: FaceFrame, path) -> None:
    doc = {
        "people": [
            {"id": sid, "face70": {"landmarks": np.asarray(pts, dtype=float).ravel().tolist()}}
            for sid, pts in frame.subjects
        ]
    }
    Path(path).write_text(json.dumps(doc) + "\n")


# -- JSON Lines records --------------------------------------------------------


def _dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def annotation_to_json(rec: AnnotationRecord) -> dict:
    return {
        "frame_id": rec.frame_id,
        "subject_id": rec.subject_id,
        "camera_id": rec.camera_id,
        "pitch": float(rec.pose.pitch),
        "yaw": float(rec.pose.yaw),
        "roll": float(rec.pose.roll),
        "crop_box": [float(v) for v in rec.crop_box],
        "fit_rms": float(rec.fit_rms),
        "near_gimbal": bool(rec.near_gimbal),
    }


def annotation_from_json(obj: dict) -> AnnotationRecord:
    box = obj["crop_box"]
    if len(box) != 4:
        raise ValueError("crop_box needs 4 values")
    return AnnotationRecord(
        frame_id=int(obj["frame_id"]),
        subject_id=int(obj["subject_id"]),
        camera_id=str(obj["camera_id"]),
        pose=EulerPose(float(obj["pitch"]), float(obj["yaw"]), float(obj["roll"])),
        crop_box=tuple(float(v) for v in box),
        fit_rms=float(obj["fit_rms"]),
        near_gimbal=bool(obj.get("near_gimbal", False)),
    )


def prediction_to_json(rec: PredictionRecord) -> dict:
    return {
        "frame_id": rec.frame_id,
        "subject_id": rec.subject_id,
        "camera_id": rec.camera_id,
        "pitch": float(rec.pose.pitch),
        "yaw": float(rec.pose.yaw),
        "roll": float(rec.pose.roll),
    }


def prediction_from_json(obj: dict) -> PredictionRecord:
    return PredictionRecord(
        frame_id=int(obj["frame_id"]),
        subject_id=int(obj["subject_id"]),
        camera_id=str(obj["camera_id"]),
        pose=EulerPose(float(obj["pitch"]), float(obj["yaw"]), float(obj["roll"])),
    )


def _write_jsonl(records, path, header, to_json) -> int:
    n = 0
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for rec in records:
            fh.write(_dumps(to_json(rec)) + "\n")
            n += 1
    return n


def _load_jsonl(path, header, from_json, skips):
    if skips is None:
        skips = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                if lineno == 1 and line.split(" v")[0] != header.split(" v")[0]:
                    raise DataError(f"{path}: unexpected header {line!r}, expected {header!r}")
                continue
            try:
                yield from_json(json.loads(line))
            except (ValueError, KeyError, TypeError) as exc:
                skips.append(SkipReport(f"{path}:{lineno}", f"corrupt record: {exc}"))


def write_annotations(records: Iterable[AnnotationRecord], path) -> int:
    return _write_jsonl(records, path, ANNOTATION_HEADER, annotation_to_json)


def load_annotations(path, skips: list | None = None) -> Iterator[AnnotationRecord]:
    return _load_jsonl(path, ANNOTATION_HEADER, annotation_from_json, skips)


def write_predictions(records: Iterable[PredictionRecord], path) -> int:
    return _write_jsonl(records, path, PREDICTION_HEADER, prediction_to_json)


def load_predictions(path, skips: list | None = None) -> Iterator[PredictionRecord]:
    return _load_jsonl(path, PREDICTION_HEADER, prediction_from_json, skips)
