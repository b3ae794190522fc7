"""Closed-form least-squares ray triangulation.

Each target is placed at the point minimizing the sum of squared
perpendicular distances to its observation rays. With the projector
``A = I - d d^T`` and ``b = A c`` for a ray from ``c`` along unit ``d``,
the minimizer solves the 3x3 normal system ``(sum A) x = sum b``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .camera import CHEIRALITY_TOL
from .errors import DegenerateGeometry, InsufficientRays, TargetFailures

MAX_CONDITION = 1e12


@dataclass(frozen=True, eq=False)
class RayProjector:
    A: np.ndarray
    b: np.ndarray


@dataclass(frozen=True, eq=False)
class LinearEstimate:
    position: np.ndarray
    residual_sq: float
    ray_count: int
    target_id: object = None
    # set when the unconstrained solution lies behind an observing camera
    behind_camera: bool = False


def point_ray_distance(x, ray):
    """Perpendicular distance from ``x`` to the infinite line through ``ray``."""
    r = np.asarray(x, dtype=float) - ray.origin
    d = ray.direction
    return float(np.linalg.norm(r - d * (d @ r)))


def ray_projector(ray):
    d = ray.direction
    A = np.eye(3) - np.outer(d, d)
    return RayProjector(A, A @ ray.origin)


def _solve_normal(A_sum, b_sum, target_id=None):
    cond = np.linalg.cond(A_sum)
    if not np.isfinite(cond) or cond > MAX_CONDITION:
        raise DegenerateGeometry(
            f"rays are (nearly) parallel, normal matrix condition {cond:.3g}",
            target_id=target_id,
        )
    return np.linalg.solve(A_sum, b_sum)


def triangulate_lls(rays, target_id=None):
    """Least-squares intersection of two or more rays.

    Raises :class:`InsufficientRays` for fewer than two rays and
    :class:`DegenerateGeometry` when the rays are parallel.
    """
    rays = list(rays)
    if len(rays) < 2:
        raise InsufficientRays(
            f"need at least 2 rays to triangulate, got {len(rays)}", target_id=target_id
        )
    A_sum = np.zeros((3, 3))
    b_sum = np.zeros(3)
    for ray in rays:
        proj = ray_projector(ray)
        A_sum += proj.A
        b_sum += proj.b
    x = _solve_normal(A_sum, b_sum, target_id)
    residual_sq = sum(point_ray_distance(x, r) ** 2 for r in rays)
    behind = any((x - r.origin) @ r.direction <= CHEIRALITY_TOL for r in rays)
    return LinearEstimate(x, residual_sq, len(rays), target_id, behind)


def backproject_arrays(scene, cam_idx, pixels):
    """Unit world directions for pixel rows observed by cameras ``cam_idx``."""
    st = scene.stacked
    xy = (pixels - st.principal[cam_idx]) / st.focal[cam_idx]
    d_c = np.concatenate([xy, np.ones((len(xy), 1))], axis=1)
    d_c /= np.linalg.norm(d_c, axis=1, keepdims=True)
    d_w = np.einsum("kab,kb->ka", st.rotations[cam_idx], d_c)
    return d_w / np.linalg.norm(d_w, axis=1, keepdims=True)


def localize_linear(scene, observations):
    """Triangulate every observed target independently.

    Returns a dict mapping target id to :class:`LinearEstimate`. If any
    target cannot be triangulated a :class:`TargetFailures` is raised whose
    ``partial`` attribute holds the estimates for the remaining targets.
    """
    target_ids = observations.target_ids
    cam_idx, tgt_idx, pixels = observations.arrays(scene, target_ids)
    M = len(target_ids)
    centers = scene.stacked.centers[cam_idx]
    d = backproject_arrays(scene, cam_idx, pixels)

    A = np.eye(3) - d[:, :, None] * d[:, None, :]
    b = np.einsum("kab,kb->ka", A, centers)
    A_sum = np.zeros((M, 3, 3))
    b_sum = np.zeros((M, 3))
    np.add.at(A_sum, tgt_idx, A)
    np.add.at(b_sum, tgt_idx, b)
    counts = np.bincount(tgt_idx, minlength=M)

    estimates, failures = {}, {}
    for j, tid in enumerate(target_ids):
        if counts[j] < 2:
            failures[tid] = InsufficientRays(
                f"target {tid} seen by {counts[j]} camera(s), need at least 2", target_id=tid
            )
            continue
        try:
            x = _solve_normal(A_sum[j], b_sum[j], tid)
        except DegenerateGeometry as exc:
            failures[tid] = exc
            continue
        rows = tgt_idx == j
        r = x - centers[rows]
        along = np.einsum("ka,ka->k", r, d[rows])
        perp = r - d[rows] * along[:, None]
        estimates[tid] = LinearEstimate(
            position=x,
            residual_sq=float(np.sum(perp * perp)),
            ray_count=int(counts[j]),
            target_id=tid,
            behind_camera=bool(np.any(along <= CHEIRALITY_TOL)),
        )
    if failures:
        raise TargetFailures(failures, estimates)
    return estimates
