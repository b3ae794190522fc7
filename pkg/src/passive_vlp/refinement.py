"""Joint reprojection-error refinement of all target positions.

The cost is the sum over observations of ``|observed - project(x)|^2`` in
squared pixels. It is minimized with Levenberg-Marquardt (Marquardt's
``lambda * diag(J^T J)`` damping) starting from the linear estimates.
Targets share no variables, so ``J^T J`` is block diagonal with one 3x3
block per target and each iteration costs O(observations).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .camera import CHEIRALITY_TOL
from .errors import BehindCamera, TargetFailures
from .triangulation import localize_linear


class Termination(enum.Enum):
    GRADIENT = "gradient"
    STEP = "step"
    COST = "cost"
    MAX_ITER = "max_iter"
    # the initial guess itself is behind an observing camera
    INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SolverConfig:
    max_iterations: int = 100
    initial_damping: float = 1e-3
    damping_increase: float = 10.0
    damping_decrease: float = 0.1
    gradient_tol: float = 1e-8
    step_tol: float = 1e-10
    cost_tol: float = 1e-12

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if min(self.initial_damping, self.gradient_tol, self.step_tol, self.cost_tol) <= 0:
            raise ValueError("damping and tolerances must be positive")
        if not self.damping_increase > 1:
            raise ValueError("damping_increase must exceed 1")
        if not 0 < self.damping_decrease < 1:
            raise ValueError("damping_decrease must lie in (0, 1)")


@dataclass(eq=False)
class RefinementResult:
    positions: np.ndarray  # (M, 3), rows follow target_ids
    target_ids: list
    initial_cost: float
    final_cost: float
    iterations: int
    converged: bool
    termination: Termination
    target_costs: np.ndarray = None  # per-target final cost, px^2
    # stage-1 estimates when produced by localize()
    linear: dict = field(default=None)

    def position(self, target_id):
        return self.positions[self.target_ids.index(target_id)]


def _camera_points(scene, cam_idx, tgt_idx, positions):
    st = scene.stacked
    diff = positions[tgt_idx] - st.centers[cam_idx]
    # R^T (x - c) per row
    return np.einsum("kba,kb->ka", st.rotations[cam_idx], diff)


def _check_cheirality(xc, cam_idx, tgt_idx, scene, target_ids):
    bad = np.flatnonzero(xc[:, 2] <= CHEIRALITY_TOL)
    if bad.size:
        k = bad[0]
        cam = scene.cameras[cam_idx[k]].id
        tid = target_ids[tgt_idx[k]]
        raise BehindCamera(
            f"target {tid} is behind camera {cam}", camera_id=cam, target_id=tid
        )


def _residual_rows(scene, cam_idx, tgt_idx, pixels, positions, target_ids):
    """(K, 2) residuals and the camera-frame points they were computed from."""
    xc = _camera_points(scene, cam_idx, tgt_idx, positions)
    _check_cheirality(xc, cam_idx, tgt_idx, scene, target_ids)
    st = scene.stacked
    proj = st.focal[cam_idx] * xc[:, :2] / xc[:, 2:3] + st.principal[cam_idx]
    return pixels - proj, xc


def _jacobian_rows(scene, cam_idx, xc):
    """(K, 2, 3) derivative of each residual pair w.r.t. its target position."""
    st = scene.stacked
    fx = st.focal[cam_idx, 0]
    fy = st.focal[cam_idx, 1]
    x, y, z = xc[:, 0], xc[:, 1], xc[:, 2]
    dpi = np.zeros((len(xc), 2, 3))
    dpi[:, 0, 0] = fx / z
    dpi[:, 0, 2] = -fx * x / z**2
    dpi[:, 1, 1] = fy / z
    dpi[:, 1, 2] = -fy * y / z**2
    # d(pi)/d(x_w) = d(pi)/d(x_c) @ R^T ; residual = observed - pi
    return -np.einsum("kij,klj->kil", dpi, st.rotations[cam_idx])


def _as_positions(positions, target_ids):
    if isinstance(positions, dict):
        positions = [positions[t] for t in target_ids]
    pos = np.array(positions, dtype=float).reshape(-1, 3)
    if len(pos) != len(target_ids):
        raise ValueError(f"expected {len(target_ids)} positions, got {len(pos)}")
    return pos


def reprojection_residual(scene, observations, positions, target_ids=None):
    """Stacked ``observed - projected`` pixel residuals.

    Entries are ordered by (camera index, target index), each observation
    contributing ``(du, dv)``. ``positions`` is an ``(M, 3)`` array aligned
    with ``target_ids`` (default: all observed targets, sorted) or a dict
    keyed by target id.
    """
    if target_ids is None:
        target_ids = observations.target_ids
    pos = _as_positions(positions, target_ids)
    cam_idx, tgt_idx, pixels = observations.arrays(scene, target_ids)
    r, _ = _residual_rows(scene, cam_idx, tgt_idx, pixels, pos, target_ids)
    return r.reshape(-1)


def residual_jacobian(scene, observations, positions, target_ids=None):
    """Dense ``(2 * observations, 3 * M)`` Jacobian of :func:`reprojection_residual`."""
    if target_ids is None:
        target_ids = observations.target_ids
    pos = _as_positions(positions, target_ids)
    cam_idx, tgt_idx, pixels = observations.arrays(scene, target_ids)
    _, xc = _residual_rows(scene, cam_idx, tgt_idx, pixels, pos, target_ids)
    blocks = _jacobian_rows(scene, cam_idx, xc)
    J = np.zeros((2 * len(cam_idx), 3 * len(target_ids)))
    for k, j in enumerate(tgt_idx):
        J[2 * k : 2 * k + 2, 3 * j : 3 * j + 3] = blocks[k]
    return J


def per_target_cost(scene, observations, positions, target_ids=None):
    """Sum of squared reprojection residuals for each target, px^2."""
    if target_ids is None:
        target_ids = observations.target_ids
    pos = _as_positions(positions, target_ids)
    cam_idx, tgt_idx, pixels = observations.arrays(scene, target_ids)
    r, _ = _residual_rows(scene, cam_idx, tgt_idx, pixels, pos, target_ids)
    return np.bincount(tgt_idx, weights=np.sum(r * r, axis=1), minlength=len(target_ids))


def _solve_damped(H, g, lam, dense):
    M = len(H)
    if dense:
        Hf = np.zeros((3 * M, 3 * M))
        for j in range(M):
            Hf[3 * j : 3 * j + 3, 3 * j : 3 * j + 3] = H[j]
        Hf[np.diag_indices_from(Hf)] *= 1.0 + lam
        return np.linalg.solve(Hf, -g.reshape(-1)).reshape(M, 3)
    Hd = H.copy()
    idx = np.arange(3)
    Hd[:, idx, idx] *= 1.0 + lam
    return np.linalg.solve(Hd, -g[..., None])[..., 0]


def refine_lm(scene, observations, init, config=None, target_ids=None, dense=False):
    """Minimize the total reprojection error over all target positions.

    Trial steps that would put a target behind an observing camera are
    rejected like any non-improving step. Never raises on non-convergence;
    inspect ``converged`` and ``termination`` on the result. ``dense=True``
    solves the full ``3M x 3M`` damped system instead of its diagonal blocks.
    """
    config = config or SolverConfig()
    if target_ids is None:
        target_ids = observations.target_ids
    target_ids = list(target_ids)
    x = _as_positions(init, target_ids).copy()
    if not np.all(np.isfinite(x)):
        raise ValueError("initial positions must be finite")
    M = len(target_ids)
    cam_idx, tgt_idx, pixels = observations.arrays(scene, target_ids)

    def evaluate(pos):
        r, xc = _residual_rows(scene, cam_idx, tgt_idx, pixels, pos, target_ids)
        return r, xc, float(np.sum(r * r))

    try:
        r, xc, cost = evaluate(x)
    except BehindCamera:
        return RefinementResult(
            x, target_ids, np.inf, np.inf, 0, False, Termination.INFEASIBLE,
            np.full(M, np.inf),
        )
    initial_cost = cost
    lam = config.initial_damping
    iterations = 0
    termination = Termination.MAX_ITER
    need_linearize = True

    while True:
        if need_linearize:
            Jk = _jacobian_rows(scene, cam_idx, xc)
            H = np.zeros((M, 3, 3))
            g = np.zeros((M, 3))
            np.add.at(H, tgt_idx, np.einsum("kia,kib->kab", Jk, Jk))
            np.add.at(g, tgt_idx, np.einsum("kia,ki->ka", Jk, r))
            need_linearize = False
            if np.max(np.abs(g)) <= config.gradient_tol:
                termination = Termination.GRADIENT
                break
        if iterations >= config.max_iterations:
            break
        iterations += 1
        try:
            delta = _solve_damped(H, g, lam, dense)
        except np.linalg.LinAlgError:
            lam *= config.damping_increase
            continue
        if np.linalg.norm(delta) <= config.step_tol * (np.linalg.norm(x) + config.step_tol):
            termination = Termination.STEP
            break
        x_new = x + delta
        try:
            r_new, xc_new, cost_new = evaluate(x_new)
        except BehindCamera:
            lam *= config.damping_increase
            continue
        if cost_new < cost:
            reduction = (cost - cost_new) / cost
            x, r, xc, cost = x_new, r_new, xc_new, cost_new
            lam *= config.damping_decrease
            need_linearize = True
            if reduction <= config.cost_tol:
                termination = Termination.COST
                break
        else:
            lam *= config.damping_increase

    target_costs = np.bincount(tgt_idx, weights=np.sum(r * r, axis=1), minlength=M)
    return RefinementResult(
        positions=x,
        target_ids=target_ids,
        initial_cost=initial_cost,
        final_cost=cost,
        iterations=iterations,
        converged=termination is not Termination.MAX_ITER,
        termination=termination,
        target_costs=target_costs,
    )


def localize(scene, observations, config=None):
    """Two-stage localization: linear triangulation, then joint refinement.

    The stage-1 estimates are kept on ``result.linear``. If some targets
    cannot be triangulated the remaining ones are still refined and a
    :class:`TargetFailures` is raised with that result as ``partial``.
    """
    failures = {}
    try:
        linear = localize_linear(scene, observations)
    except TargetFailures as exc:
        failures = dict(exc.failures)
        linear = exc.partial
    target_ids = sorted(linear)
    result = None
    if target_ids:
        init = np.array([linear[t].position for t in target_ids])
        result = refine_lm(scene, observations, init, config, target_ids=target_ids)
        result.linear = linear
    if failures:
        raise TargetFailures(failures, result)
    return result
