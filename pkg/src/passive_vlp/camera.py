"""Pinhole camera model.

World (WCS) and camera (CCS) frames are related by ``x_w = R @ x_c + t``
where ``R`` is the camera-to-world rotation and ``t`` the optical center.
The camera looks along its +z axis; pixels follow ``u = fx*x/z + u0``,
``v = fy*y/z + v0``. No lens distortion is modelled.

Pixels are plain length-2 arrays ``[u, v]``; points and directions are
length-3 arrays in meters.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BehindCamera, DegenerateLookAt

# Points closer than this to the image plane (z_c) are treated as not imageable.
CHEIRALITY_TOL = 1e-9
_ROTATION_TOL = 1e-9
WORLD_UP = np.array([0.0, 0.0, 1.0])
FALLBACK_UP = np.array([1.0, 0.0, 0.0])


def focal_mm_to_px(focal_mm, pixel_pitch_um):
    """Convert a focal length in mm to pixels given the pixel pitch in um/px."""
    return focal_mm * 1000.0 / pixel_pitch_um


@dataclass(frozen=True)
class Intrinsics:
    fx: float
    fy: float
    u0: float
    v0: float
    width: float = None
    height: float = None

    def __post_init__(self):
        # sensor bounds default to a centered principal point
        if self.width is None:
            object.__setattr__(self, "width", 2.0 * self.u0)
        if self.height is None:
            object.__setattr__(self, "height", 2.0 * self.v0)
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if not (0 < self.u0 < self.width and 0 < self.v0 < self.height):
            raise ValueError(
                f"principal point ({self.u0}, {self.v0}) outside sensor "
                f"{self.width}x{self.height}"
            )

    @property
    def K(self):
        return np.array([[self.fx, 0.0, self.u0], [0.0, self.fy, self.v0], [0.0, 0.0, 1.0]])


@dataclass(frozen=True, eq=False)
class CameraPose:
    """Camera-to-world rotation and optical center."""

    rotation: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        R = np.array(self.rotation, dtype=float)
        c = np.array(self.center, dtype=float)
        if R.shape != (3, 3) or c.shape != (3,):
            raise ValueError("rotation must be 3x3 and center a 3-vector")
        if not np.allclose(R.T @ R, np.eye(3), rtol=0, atol=_ROTATION_TOL):
            raise ValueError("rotation is not orthonormal")
        if abs(np.linalg.det(R) - 1.0) > _ROTATION_TOL:
            raise ValueError("rotation must have determinant +1")
        R.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "center", c)

    def __eq__(self, other):
        if not isinstance(other, CameraPose):
            return NotImplemented
        return np.array_equal(self.rotation, other.rotation) and np.array_equal(
            self.center, other.center
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Camera:
    id: int
    intrinsics: Intrinsics
    pose: CameraPose

    def __eq__(self, other):
        if not isinstance(other, Camera):
            return NotImplemented
        return (
            self.id == other.id
            and self.intrinsics == other.intrinsics
            and self.pose == other.pose
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Ray:
    """Half-line ``origin + s * direction``, ``s >= 0``, with unit ``direction``."""

    origin: np.ndarray
    direction: np.ndarray

    def __post_init__(self):
        o = np.array(self.origin, dtype=float)
        d = np.array(self.direction, dtype=float)
        n = np.linalg.norm(d)
        if not n > 0:
            raise ValueError("ray direction must be nonzero")
        object.__setattr__(self, "origin", o)
        object.__setattr__(self, "direction", d / n)


def world_to_camera(pose, x_w):
    return pose.rotation.T @ (np.asarray(x_w, dtype=float) - pose.center)


def camera_to_world(pose, x_c):
    return pose.rotation @ np.asarray(x_c, dtype=float) + pose.center


def project(camera, x_w):
    """Pixel coordinates of world point ``x_w``.

    Raises :class:`BehindCamera` when the point's depth is not positive.
    """
    x, y, z = world_to_camera(camera.pose, x_w)
    if z <= CHEIRALITY_TOL:
        raise BehindCamera(f"point at depth {z:.3g} m is behind camera {camera.id}",
                           camera_id=camera.id)
    k = camera.intrinsics
    return np.array([k.fx * x / z + k.u0, k.fy * y / z + k.v0])


def backproject_direction(camera, p):
    """Unit world-frame direction of the ray through pixel ``p``."""
    k = camera.intrinsics
    u, v = p
    d_c = np.array([(u - k.u0) / k.fx, (v - k.v0) / k.fy, 1.0])
    d_w = camera.pose.rotation @ (d_c / np.linalg.norm(d_c))
    # rotation preserves norm; renormalize only to absorb rounding
    return d_w / np.linalg.norm(d_w)


def observation_ray(camera, p):
    return Ray(camera.pose.center, backproject_direction(camera, p))


def look_at_pose(position, focus, up_hint=WORLD_UP):
    """Pose at ``position`` whose principal axis points at ``focus``.

    The camera x axis is ``up_hint x z`` and y completes a right-handed frame,
    so image rows run "down" relative to ``up_hint``.
    """
    position = np.asarray(position, dtype=float)
    focus = np.asarray(focus, dtype=float)
    up = np.asarray(up_hint, dtype=float)
    up = up / np.linalg.norm(up)
    diff = focus - position
    dist = np.linalg.norm(diff)
    if dist <= 1e-9:
        raise DegenerateLookAt("focus coincides with camera position")
    z = diff / dist
    if abs(z @ up) >= 1.0 - 1e-9:
        raise DegenerateLookAt("viewing direction is parallel to up_hint")
    x = np.cross(up, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return CameraPose(np.column_stack([x, y, z]), position)


def look_at_pose_robust(position, focus):
    """Like :func:`look_at_pose` with world z up, falling back to world x."""
    try:
        return look_at_pose(position, focus, WORLD_UP)
    except DegenerateLookAt:
        return look_at_pose(position, focus, FALLBACK_UP)


def is_visible(camera, x_w):
    x, y, z = world_to_camera(camera.pose, x_w)
    if z <= CHEIRALITY_TOL:
        return False
    k = camera.intrinsics
    u = k.fx * x / z + k.u0
    v = k.fy * y / z + k.v0
    return bool(0.0 <= u <= k.width and 0.0 <= v <= k.height)


def visible_mask(camera, points):
    """Vectorized :func:`is_visible` over an ``(n, 3)`` array of points."""
    pts = np.asarray(points, dtype=float)
    xc = (pts - camera.pose.center) @ camera.pose.rotation
    z = xc[:, 2]
    ok = z > CHEIRALITY_TOL
    zs = np.where(ok, z, 1.0)
    k = camera.intrinsics
    u = k.fx * xc[:, 0] / zs + k.u0
    v = k.fy * xc[:, 1] / zs + k.v0
    return ok & (u >= 0.0) & (u <= k.width) & (v >= 0.0) & (v <= k.height)
