"""Scene (JSON) and observation/result (CSV) file formats."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .camera import (
    Camera,
    CameraPose,
    Intrinsics,
    focal_mm_to_px,
    look_at_pose,
    look_at_pose_robust,
)
from .errors import DegenerateLookAt
from .scene import ObservationSet, Room, Scene

OBSERVATION_COLUMNS = ("frame_id", "camera_id", "target_id", "u_px", "v_px")
POSITION_COLUMNS = (
    "frame_id", "target_id", "algorithm", "x_m", "y_m", "z_m", "reproj_cost_px2", "status",
)
METRIC_COLUMNS = ("metric", "algorithm", "axis", "value_mm")
SAMPLE_COLUMNS = ("algorithm", "sample", "error_mm", "x_mm", "y_mm", "z_mm")
SWEEP_COLUMNS = ("parameter_value", "camera_count", "algorithm", "mpe_mm")


class InputFileError(Exception):
    """A scene or observation file is malformed; the message locates the problem."""


def fmt(value):
    """Shortest decimal that round-trips to the same double."""
    return repr(float(value))


# --- scene files ---------------------------------------------------------


def _vector(value, n, where):
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError):
        raise InputFileError(f"{where}: expected {n} numbers, got {value!r}") from None
    if arr.shape != (n,) or not np.all(np.isfinite(arr)):
        raise InputFileError(f"{where}: expected {n} finite numbers, got {value!r}")
    return arr


def _parse_camera(doc, k):
    where = f"cameras[{k}]"
    if not isinstance(doc, dict):
        raise InputFileError(f"{where}: expected an object")
    try:
        cam_id = doc["id"]
    except KeyError:
        raise InputFileError(f"{where}: missing field 'id'") from None
    if not isinstance(cam_id, int) or isinstance(cam_id, bool):
        raise InputFileError(f"{where}.id: expected an integer, got {cam_id!r}")
    if "position" not in doc:
        raise InputFileError(f"{where}: missing field 'position'")
    position = _vector(doc["position"], 3, f"{where}.position")

    if "focal_px" in doc:
        f = doc["focal_px"]
        fx, fy = (f, f) if np.isscalar(f) else _vector(f, 2, f"{where}.focal_px")
    elif "focal_mm" in doc and "pixel_pitch_um" in doc:
        fx = fy = focal_mm_to_px(float(doc["focal_mm"]), float(doc["pixel_pitch_um"]))
    else:
        raise InputFileError(f"{where}: needs 'focal_px' or both 'focal_mm' and 'pixel_pitch_um'")
    if "principal" not in doc:
        raise InputFileError(f"{where}: missing field 'principal'")
    u0, v0 = _vector(doc["principal"], 2, f"{where}.principal")
    width, height = (
        _vector(doc["sensor"], 2, f"{where}.sensor") if "sensor" in doc else (None, None)
    )
    try:
        intr = Intrinsics(
            float(fx), float(fy), float(u0), float(v0),
            None if width is None else float(width),
            None if height is None else float(height),
        )
    except ValueError as exc:
        raise InputFileError(f"{where}: {exc}") from None

    try:
        if "rotation" in doc:
            R = np.array(doc["rotation"], dtype=float)
            pose = CameraPose(R, position)
        elif "focus" in doc:
            focus = _vector(doc["focus"], 3, f"{where}.focus")
            if "up" in doc:
                pose = look_at_pose(position, focus, _vector(doc["up"], 3, f"{where}.up"))
            else:
                pose = look_at_pose_robust(position, focus)
        else:
            raise InputFileError(f"{where}: needs either 'focus' or 'rotation'")
    except (ValueError, DegenerateLookAt) as exc:
        raise InputFileError(f"{where}: {exc}") from None
    return Camera(cam_id, intr, pose)


def scene_from_dict(doc):
    if not isinstance(doc, dict):
        raise InputFileError("scene: expected a JSON object at top level")
    for key in ("room", "cameras"):
        if key not in doc:
            raise InputFileError(f"scene: missing field '{key}'")
    room_doc = doc["room"]
    if not isinstance(room_doc, dict) or "min" not in room_doc or "max" not in room_doc:
        raise InputFileError("room: expected an object with 'min' and 'max'")
    try:
        room = Room(tuple(_vector(room_doc["min"], 3, "room.min")),
                    tuple(_vector(room_doc["max"], 3, "room.max")))
    except ValueError as exc:
        raise InputFileError(f"room: {exc}") from None
    if not isinstance(doc["cameras"], list):
        raise InputFileError("cameras: expected a list")
    cams = tuple(_parse_camera(c, k) for k, c in enumerate(doc["cameras"]))
    try:
        return Scene(cams, room)
    except ValueError as exc:
        raise InputFileError(f"scene: {exc}") from None


def scene_to_dict(scene):
    cams = []
    for c in scene.cameras:
        k = c.intrinsics
        cams.append({
            "id": c.id,
            "position": c.pose.center.tolist(),
            "rotation": c.pose.rotation.tolist(),
            "focal_px": [k.fx, k.fy],
            "principal": [k.u0, k.v0],
            "sensor": [k.width, k.height],
        })
    return {"room": {"min": list(scene.room.min), "max": list(scene.room.max)}, "cameras": cams}


def parse_scene(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputFileError(f"{path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputFileError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return scene_from_dict(doc)
    except InputFileError as exc:
        raise InputFileError(f"{path}: {exc}") from None


def write_scene(scene, path):
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2) + "\n")


# --- observation files ---------------------------------------------------


def parse_observations(path, scene=None):
    """Read an observation CSV into ``{frame_id: ObservationSet}``.

    Frames keep their order of first appearance. When ``scene`` is given,
    unknown camera ids are rejected.
    """
    path = Path(path)
    frames = {}
    try:
        fh = path.open(newline="")
    except OSError as exc:
        raise InputFileError(f"{path}: {exc.strerror}") from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != list(OBSERVATION_COLUMNS):
            raise InputFileError(
                f"{path}:1: header must be {','.join(OBSERVATION_COLUMNS)}, got {header!r}"
            )
        for row in reader:
            line = reader.line_num
            if not row or all(not f.strip() for f in row):
                continue
            if len(row) != len(OBSERVATION_COLUMNS):
                raise InputFileError(
                    f"{path}:{line}: expected {len(OBSERVATION_COLUMNS)} fields, got {len(row)}"
                )
            values = []
            for name, raw in zip(OBSERVATION_COLUMNS, row):
                conv = int if name.endswith("_id") else float
                try:
                    values.append(conv(raw.strip()))
                except ValueError:
                    raise InputFileError(f"{path}:{line}: field {name}: invalid value {raw!r}") from None
            frame, cam, target, u, v = values
            if not (np.isfinite(u) and np.isfinite(v)):
                raise InputFileError(f"{path}:{line}: pixel coordinates must be finite")
            if scene is not None and cam not in scene.index_of:
                raise InputFileError(f"{path}:{line}: field camera_id: unknown camera {cam}")
            obs = frames.setdefault(frame, ObservationSet())
            if (cam, target) in obs.pixels:
                raise InputFileError(
                    f"{path}:{line}: duplicate observation frame {frame} camera {cam} target {target}"
                )
            obs.add(cam, target, (u, v))
    return frames


def write_observations(frames, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(OBSERVATION_COLUMNS)
        for frame, obs in frames.items():
            for (cam, target), p in sorted(obs.pixels.items()):
                w.writerow([frame, cam, target, fmt(p[0]), fmt(p[1])])


# --- result files --------------------------------------------------------


def write_positions(rows, path):
    """``rows`` are dicts keyed by :data:`POSITION_COLUMNS`; floats are formatted losslessly."""
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(POSITION_COLUMNS)
        for r in rows:
            w.writerow([
                fmt(r[c]) if isinstance(r.get(c), (float, np.floating)) else r.get(c, "")
                for c in POSITION_COLUMNS
            ])


def read_csv(path):
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def metric_rows(metrics_by_algorithm):
    rows = []
    for alg, m in metrics_by_algorithm.items():
        for name in ("mpe", "rmse", "std", "cdf50", "cdf90"):
            rows.append((name, alg, "all", getattr(m, name)))
            for axis, v in zip("xyz", getattr(m, f"per_axis_{name}")):
                rows.append((name, alg, axis, v))
    return rows


def write_metrics(metrics_by_algorithm, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRIC_COLUMNS)
        for name, alg, axis, v in metric_rows(metrics_by_algorithm):
            w.writerow([name, alg, axis, fmt(v)])


def write_samples(metrics_by_algorithm, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_COLUMNS)
        for alg, m in metrics_by_algorithm.items():
            for k, (e, a) in enumerate(zip(m.error_samples, m.axis_samples)):
                w.writerow([alg, k, fmt(e), fmt(a[0]), fmt(a[1]), fmt(a[2])])


def write_sweep(rows, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for r in rows:
            w.writerow([fmt(r.parameter_value), r.camera_count, r.algorithm, fmt(r.mpe_mm)])
