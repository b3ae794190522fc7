"""Scene layout and per-frame pixel observations."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np


@dataclass(frozen=True)
class Room:
    """Axis-aligned box given by its min and max corners (meters)."""

    min: tuple
    max: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.min)
        hi = tuple(float(v) for v in self.max)
        if len(lo) != 3 or len(hi) != 3 or any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"invalid room box {lo} .. {hi}")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    def contains(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= np.subtract(self.min, tol)) and np.all(x <= np.add(self.max, tol)))


@dataclass(frozen=True, eq=False)
class Scene:
    cameras: tuple
    room: Room

    def __post_init__(self):
        cams = tuple(self.cameras)
        object.__setattr__(self, "cameras", cams)
        if len(cams) < 2:
            raise ValueError("a scene needs at least 2 cameras")
        ids = [c.id for c in cams]
        if len(set(ids)) != len(ids):
            raise ValueError(f"duplicate camera ids in {ids}")
        for c in cams:
            if not self.room.contains(c.pose.center):
                raise ValueError(f"camera {c.id} center {c.pose.center} lies outside the room")

    def __eq__(self, other):
        if not isinstance(other, Scene):
            return NotImplemented
        return self.room == other.room and self.cameras == other.cameras

    __hash__ = None

    def camera(self, camera_id):
        return self.cameras[self.index_of[camera_id]]

    @cached_property
    def index_of(self):
        return {c.id: i for i, c in enumerate(self.cameras)}

    @cached_property
    def stacked(self):
        """Per-camera parameters as arrays, for vectorized projection."""
        return CameraStack(
            rotations=np.stack([c.pose.rotation for c in self.cameras]),
            centers=np.stack([c.pose.center for c in self.cameras]),
            focal=np.array([[c.intrinsics.fx, c.intrinsics.fy] for c in self.cameras]),
            principal=np.array([[c.intrinsics.u0, c.intrinsics.v0] for c in self.cameras]),
        )


@dataclass(frozen=True)
class CameraStack:
    rotations: np.ndarray  # (N, 3, 3) camera-to-world
    centers: np.ndarray  # (N, 3)
    focal: np.ndarray  # (N, 2) fx, fy
    principal: np.ndarray  # (N, 2) u0, v0


@dataclass
class ObservationSet:
    """Observed pixels of one frame, keyed by ``(camera_id, target_id)``."""

    pixels: dict = field(default_factory=dict)

    def add(self, camera_id, target_id, pixel):
        self.pixels[(camera_id, target_id)] = np.asarray(pixel, dtype=float)

    @property
    def target_ids(self):
        return sorted({t for _, t in self.pixels})

    def cameras_observing(self, target_id):
        return sorted(c for c, t in self.pixels if t == target_id)

    def __len__(self):
        return len(self.pixels)

    def arrays(self, scene, target_ids=None):
        """Flatten to index arrays ordered by (camera index, target index).

        Returns ``(cam_idx, tgt_idx, pixels)`` where ``tgt_idx`` indexes into
        ``target_ids`` (all observed targets, sorted, by default).
        """
        if target_ids is None:
            target_ids = self.target_ids
        tpos = {t: j for j, t in enumerate(target_ids)}
        rows = sorted(
            (scene.index_of[c], tpos[t], p) for (c, t), p in self.pixels.items() if t in tpos
        )
        if not rows:
            return np.zeros(0, int), np.zeros(0, int), np.zeros((0, 2))
        cam_idx = np.array([r[0] for r in rows])
        tgt_idx = np.array([r[1] for r in rows])
        pix = np.array([r[2] for r in rows], dtype=float)
        return cam_idx, tgt_idx, pix
