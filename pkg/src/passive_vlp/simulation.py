"""Monte Carlo evaluation of linear vs. jointly refined localization.

Each iteration samples targets visible to every camera, projects them with
additive Gaussian pixel noise, then runs the two-stage localizer on those
observations. Stage-1 output is scored as ``mcvlp``, stage-2 as ``mcjo``.
Every iteration draws from its own RNG stream derived from
``(seed, iteration)``, so results do not depend on how iterations are
distributed over worker processes.
"""
from __future__ import annotations

import enum
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .camera import Camera, Intrinsics, focal_mm_to_px, look_at_pose_robust, visible_mask
from .errors import BehindCamera, PositioningError, SamplingExhausted, TargetFailures
from .refinement import SolverConfig, localize
from .scene import ObservationSet, Room, Scene

log = logging.getLogger(__name__)

TABLE1_FOCAL_PX = focal_mm_to_px(3.36, 2.24)
TABLE1_PRINCIPAL = (2080.0, 1560.0)
TABLE1_HEIGHT = 3.0
TABLE1_FOCUS_HEIGHT = 1.5

TABLE4_FOCAL_PX = focal_mm_to_px(5.0, 2.0)
TABLE4_PRINCIPAL = (1296.0, 972.0)
TABLE4_CAMERAS = (
    ((0.05, 0.13, 2.35), (2.0, 1.6, 0.0)),
    ((3.50, 0.09, 2.30), (1.5, 1.4, 0.0)),
    ((1.77, 3.41, 2.26), (1.8, 1.9, 0.0)),
)
TABLE4_ROOM = Room((0.0, 0.0, 0.0), (3.6, 3.6, 2.4))

FAILURE_FLAG_FRACTION = 0.01


def _corner_positions(L, camera_count):
    h = TABLE1_HEIGHT
    corners = [(0.0, 0.0, h), (L, 0.0, h), (0.0, L, h), (L, L, h)]
    if camera_count == 4:
        return corners
    if camera_count == 3:
        return corners[:3]
    if camera_count == 2:
        return [corners[0], corners[3]]
    raise ValueError(f"camera_count must be 2, 3 or 4, got {camera_count}")


def build_table1_scene(layout_distance_m=8.0, camera_count=4, focal_px=TABLE1_FOCAL_PX):
    """Ceiling-corner layout of an L x L x 3 m room, all cameras aimed at
    ``[L/2, L/2, 1.5]``.

    Two cameras use opposite corners; three drop the ``[L, L]`` corner.
    """
    if not layout_distance_m > 0:
        raise ValueError("layout distance must be positive")
    L = float(layout_distance_m)
    focus = np.array([L / 2, L / 2, TABLE1_FOCUS_HEIGHT])
    intr = Intrinsics(focal_px, focal_px, *TABLE1_PRINCIPAL)
    cams = [
        Camera(i, intr, look_at_pose_robust(np.array(p), focus))
        for i, p in enumerate(_corner_positions(L, camera_count))
    ]
    return Scene(tuple(cams), Room((0.0, 0.0, 0.0), (L, L, TABLE1_HEIGHT)))


def build_table4_scene(focal_px=TABLE4_FOCAL_PX):
    """Three-camera geometry of the physical prototype."""
    intr = Intrinsics(focal_px, focal_px, *TABLE4_PRINCIPAL)
    cams = [
        Camera(i, intr, look_at_pose_robust(np.array(p), np.array(f)))
        for i, (p, f) in enumerate(TABLE4_CAMERAS)
    ]
    return Scene(tuple(cams), TABLE4_ROOM)


PRESETS = {"table1": build_table1_scene, "table4": build_table4_scene}


@dataclass(frozen=True)
class NoiseModel:
    sigma: float = 3.0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("noise sigma must be nonnegative")


@dataclass(frozen=True)
class MonteCarloConfig:
    iterations: int = 10_000
    targets_per_iteration: int = 3
    noise: NoiseModel = NoiseModel()
    seed: int = 0
    solver: SolverConfig = SolverConfig()
    sampling_margin: float = 0.1

    def __post_init__(self):
        if self.iterations < 1 or self.targets_per_iteration < 1:
            raise ValueError("iterations and targets_per_iteration must be >= 1")


@dataclass(frozen=True, eq=False)
class RunMetrics:
    """Position-error statistics in millimeters."""

    mpe: float
    rmse: float
    std: float
    cdf50: float
    cdf90: float
    per_axis_mpe: np.ndarray
    per_axis_rmse: np.ndarray
    per_axis_std: np.ndarray
    per_axis_cdf50: np.ndarray
    per_axis_cdf90: np.ndarray
    error_samples: np.ndarray
    axis_samples: np.ndarray


def _stats(e):
    n = e.shape[0]
    mean = e.mean(axis=0)
    rms = np.sqrt(np.mean(e * e, axis=0))
    std = e.std(axis=0, ddof=1) if n > 1 else np.zeros_like(mean)
    p50, p90 = np.percentile(e, [50, 90], axis=0)
    return mean, rms, std, p50, p90


def compute_metrics(errors, per_axis_errors=None):
    """Summarize position errors (mm).

    ``std`` is the sample (n-1) standard deviation; percentiles interpolate
    linearly between order statistics. ``per_axis_errors`` is an ``(n, 3)``
    array of absolute per-axis errors; when omitted the per-axis fields are NaN.
    """
    e = np.asarray(errors, dtype=float).reshape(-1)
    if e.size == 0:
        raise ValueError("cannot compute metrics of an empty sample")
    mpe, rmse, std, c50, c90 = (float(v) for v in _stats(e))
    if per_axis_errors is None:
        a = np.full((e.size, 3), np.nan)
        axis = tuple(np.full(3, np.nan) for _ in range(5))
    else:
        a = np.asarray(per_axis_errors, dtype=float).reshape(-1, 3)
        if len(a) != e.size:
            raise ValueError("per-axis errors must align with total errors")
        axis = _stats(a)
    return RunMetrics(mpe, rmse, std, c50, c90, *axis, error_samples=e, axis_samples=a)


def sample_targets(scene, count, margin, rng, max_candidates=100_000, batch=64):
    """Uniform points in the margin-shrunk room, visible to every camera."""
    lo = np.array(scene.room.min) + margin
    hi = np.array(scene.room.max) - margin
    if np.any(lo > hi):
        raise SamplingExhausted(f"room is empty after shrinking by margin {margin} m")
    accepted = []
    drawn = 0
    while len(accepted) < count:
        if drawn >= max_candidates:
            raise SamplingExhausted(
                f"found {len(accepted)} of {count} visible targets in {drawn} candidates"
            )
        cand = rng.uniform(lo, hi, size=(batch, 3))
        drawn += batch
        ok = np.ones(batch, dtype=bool)
        for cam in scene.cameras:
            ok &= visible_mask(cam, cand)
        accepted.extend(cand[ok])
    return np.array(accepted[:count])


def project_all(scene, targets):
    """Noiseless pixels of every target in every camera, shape ``(N, M, 2)``."""
    st = scene.stacked
    pts = np.asarray(targets, dtype=float).reshape(-1, 3)
    xc = np.einsum("nba,nmb->nma", st.rotations, pts[None, :, :] - st.centers[:, None, :])
    if np.any(xc[..., 2] <= 0):
        raise BehindCamera("a target is behind a camera")
    return st.focal[:, None, :] * xc[..., :2] / xc[..., 2:3] + st.principal[:, None, :]


def synthesize_observations(scene, targets, noise, rng):
    """Project targets into every camera and add i.i.d. Gaussian pixel noise.

    Target ids are the row indices of ``targets``.
    """
    pix = project_all(scene, targets)
    if noise.sigma > 0:
        pix = pix + rng.normal(0.0, noise.sigma, size=pix.shape)
    obs = ObservationSet()
    for i, cam in enumerate(scene.cameras):
        for j in range(pix.shape[1]):
            obs.pixels[(cam.id, j)] = pix[i, j]
    return obs


def iteration_rng(seed, index):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _run_iteration(scene, config, index):
    rng = iteration_rng(config.seed, index)
    truth = sample_targets(scene, config.targets_per_iteration, config.sampling_margin, rng)
    obs = synthesize_observations(scene, truth, config.noise, rng)
    try:
        result = localize(scene, obs, config.solver)
    except TargetFailures:
        return None
    if not result.converged:
        return None
    linear = np.array([result.linear[t].position for t in result.target_ids])
    return truth, linear, result.positions


def _run_chunk(args):
    scene, config, indices = args
    return [_run_iteration(scene, config, i) for i in indices]


@dataclass(eq=False)
class MonteCarloResult:
    mcjo: RunMetrics
    mcvlp: RunMetrics
    iterations: int
    failures: int
    flagged: bool
    truth: np.ndarray = field(repr=False, default=None)

    def __iter__(self):
        return iter((self.mcjo, self.mcvlp))


def run_monte_carlo(config, scene, workers=1):
    """Run the batch and score both stages on identical observations.

    Failed iterations are excluded from both algorithms and counted; the run
    is flagged when more than 1% fail.
    """
    n = config.iterations
    if workers <= 1:
        outcomes = [_run_iteration(scene, config, i) for i in range(n)]
    else:
        chunks = np.array_split(np.arange(n), min(n, workers * 4))
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = ex.map(_run_chunk, [(scene, config, c.tolist()) for c in chunks])
            outcomes = [o for part in parts for o in part]
    good = [o for o in outcomes if o is not None]
    failures = n - len(good)
    if not good:
        raise PositioningError(f"all {n} Monte Carlo iterations failed")
    truth = np.concatenate([g[0] for g in good])
    lin = np.concatenate([g[1] for g in good])
    ref = np.concatenate([g[2] for g in good])
    flagged = failures > FAILURE_FLAG_FRACTION * n
    if failures:
        log.warning("%d of %d iterations failed%s", failures, n, " (run flagged)" if flagged else "")

    def metrics(est):
        d = (est - truth) * 1000.0
        return compute_metrics(np.linalg.norm(d, axis=1), np.abs(d))

    return MonteCarloResult(metrics(ref), metrics(lin), n, failures, flagged, truth)


class SweepParameter(enum.Enum):
    FOCAL_LENGTH_PX = "focal"
    NOISE_STD = "noise"
    LAYOUT_DISTANCE = "layout"
    CAMERA_COUNT = "cameras"


@dataclass(frozen=True)
class SweepSpec:
    parameter: SweepParameter
    values: tuple
    base: MonteCarloConfig = MonteCarloConfig()
    camera_counts: tuple = (2, 3, 4)
    focal_px: float = TABLE1_FOCAL_PX
    layout_distance: float = 8.0

    def __post_init__(self):
        vals = tuple(self.values)
        if not vals:
            raise ValueError("sweep needs at least one value")
        if any(b <= a for a, b in zip(vals, vals[1:])):
            raise ValueError("sweep values must be strictly increasing")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "parameter", SweepParameter(self.parameter))


@dataclass(frozen=True)
class SweepRow:
    parameter_value: float
    camera_count: int
    algorithm: str
    mpe_mm: float
    flagged: bool = False


def run_sweep(spec, workers=1):
    """One Monte Carlo batch per (value, camera count); long-format rows."""
    rows = []
    p = spec.parameter
    for value in spec.values:
        counts = (int(value),) if p is SweepParameter.CAMERA_COUNT else spec.camera_counts
        for count in counts:
            focal, L, config = spec.focal_px, spec.layout_distance, spec.base
            if p is SweepParameter.FOCAL_LENGTH_PX:
                focal = float(value)
            elif p is SweepParameter.LAYOUT_DISTANCE:
                L = float(value)
            elif p is SweepParameter.NOISE_STD:
                config = replace(config, noise=NoiseModel(float(value)))
            scene = build_table1_scene(L, count, focal)
            log.info("sweep %s=%s cameras=%d", p.value, value, count)
            res = run_monte_carlo(config, scene, workers=workers)
            rows.append(SweepRow(value, count, "mcjo", res.mcjo.mpe, res.flagged))
            rows.append(SweepRow(value, count, "mcvlp", res.mcvlp.mpe, res.flagged))
    return rows
