"""Exit criteria for the build, one test per criterion.

Each test records a PASS/FAIL line that is printed in the pytest terminal
summary. The Monte Carlo criteria run the full batch sizes and take a
couple of minutes in total on one core.
"""
import time

import numpy as np
import pytest
from scipy import stats

from passive_vlp import (
    MonteCarloConfig,
    NoiseModel,
    SweepParameter,
    SweepSpec,
    build_table1_scene,
    build_table4_scene,
    localize,
    localize_linear,
    observation_ray,
    refine_lm,
    residual_jacobian,
    run_monte_carlo,
    run_sweep,
    triangulate_lls,
)
from passive_vlp.cli import main
from passive_vlp.files import write_observations, write_scene
from passive_vlp.refinement import per_target_cost
from passive_vlp.simulation import sample_targets, synthesize_observations

from .conftest import ACCEPTANCE_LINES, random_instance
from .test_refinement import central_difference_jacobian, jacobian_relative_error
from .test_triangulation import grid_argmin, sum_sq_distance

pytestmark = pytest.mark.slow

SEED = 20250415
SWEEP_ITERATIONS = 2000


def record(name, ok, detail):
    ACCEPTANCE_LINES.append((name, bool(ok), detail))
    print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
    assert ok, f"{name}: {detail}"


def within(value, target, rel):
    return abs(value - target) <= rel * target


@pytest.fixture(scope="module")
def table2_run():
    config = MonteCarloConfig(iterations=10_000, targets_per_iteration=3,
                              noise=NoiseModel(3.0), seed=SEED)
    t0 = time.perf_counter()
    res = run_monte_carlo(config, build_table1_scene(8.0, 4, 1500.0))
    return res, time.perf_counter() - t0


def sweep_mpe(parameter, values, camera_counts=(4,)):
    spec = SweepSpec(parameter, tuple(values), MonteCarloConfig(iterations=SWEEP_ITERATIONS,
                                                                 seed=SEED),
                     camera_counts=camera_counts, focal_px=1500.0)
    rows = run_sweep(spec)
    assert not any(r.flagged for r in rows)
    out = {}
    for r in rows:
        out.setdefault((r.algorithm, r.camera_count), []).append(r.mpe_mm)
    return out


def test_c1_table2_reproduction(table2_run):
    res, seconds = table2_run
    j, v = res.mcjo, res.mcvlp
    checks = {
        "mcjo MPE": (j.mpe, 9.69, 0.08),
        "mcvlp MPE": (v.mpe, 12.00, 0.08),
        "mcjo RMSE": (j.rmse, 10.82, 0.08),
        "mcjo CDF50": (j.cdf50, 9.08, 0.10),
        "mcjo CDF90": (j.cdf90, 16.07, 0.10),
    }
    ok = all(within(*c) for c in checks.values()) and res.failures == 0
    detail = ", ".join(f"{k} {c[0]:.2f} (ref {c[1]}±{c[2]:.0%})" for k, c in checks.items())
    record("C1 Table II reproduction", ok, f"{detail}; failures {res.failures}; {seconds:.0f} s")


def test_c2_relative_improvement(table2_run):
    res, _ = table2_run
    gain = (res.mcvlp.mpe - res.mcjo.mpe) / res.mcvlp.mpe
    record("C2 relative improvement", 0.14 <= gain <= 0.24, f"{gain:.1%} in [14%, 24%]")


def test_c3_per_axis_structure(table2_run):
    res, _ = table2_run
    x, y, z = res.mcjo.per_axis_mpe
    ok = abs(x - y) <= 0.05 * min(x, y) and z < min(x, y)
    record("C3 per-axis structure", ok, f"x {x:.2f}, y {y:.2f}, z {z:.2f} mm")


def test_c4_focal_sweep():
    focal = [500, 1000, 1500, 2000, 3000, 4000]
    mpe = sweep_mpe(SweepParameter.FOCAL_LENGTH_PX, focal)[("mcjo", 4)]
    ok = (
        within(mpe[0], 29.30, 0.10)
        and within(mpe[-1], 4.10, 0.10)
        and all(b <= a for a, b in zip(mpe, mpe[1:]))
    )
    record("C4 focal sweep", ok,
           ", ".join(f"{f}px {m:.2f}" for f, m in zip(focal, mpe)) + " (ref 29.30 / 4.10 mm)")


def _monotone(seq, increasing):
    pairs = zip(seq, seq[1:])
    return all(b >= a for a, b in pairs) if increasing else all(b <= a for a, b in pairs)


def test_c5_trends():
    lines, ok = [], True
    noise = sweep_mpe(SweepParameter.NOISE_STD, [1, 2, 3, 4, 5])
    layout = sweep_mpe(SweepParameter.LAYOUT_DISTANCE, [4, 6, 8, 10])
    cams = sweep_mpe(SweepParameter.CAMERA_COUNT, [2, 3, 4], camera_counts=())
    for alg in ("mcjo", "mcvlp"):
        s, lay = noise[(alg, 4)], layout[(alg, 4)]
        c = [cams[(alg, n)][0] for n in (2, 3, 4)]
        ok &= _monotone(s, True) and _monotone(lay, True) and _monotone(c, False)
        ok &= bool(np.isclose(stats.spearmanr([1, 2, 3, 4, 5], s).statistic, 1.0))
        lines.append(
            f"{alg}: sigma {[round(m, 2) for m in s]}, L {[round(m, 2) for m in lay]}, "
            f"cameras {[round(m, 2) for m in c]}"
        )
    record("C5 trend suite", ok, "; ".join(lines))


def test_c6_noiseless_exactness():
    rng = np.random.default_rng(SEED)
    worst1 = worst2 = 0.0
    cost_ok = True
    for _ in range(1000):
        scene, truth, obs = random_instance(rng, n_targets=3, sigma=0.0)
        res = localize(scene, obs)
        lin = np.array([res.linear[t].position for t in res.target_ids])
        worst1 = max(worst1, np.max(np.linalg.norm(lin - truth, axis=1)))
        worst2 = max(worst2, np.max(np.linalg.norm(res.positions - truth, axis=1)))
        cost_ok &= res.final_cost <= np.sum(per_target_cost(scene, obs, lin))
    ok = worst1 < 1e-6 and worst2 < 1e-6 and cost_ok
    record("C6 noiseless exactness", ok,
           f"max error stage1 {worst1:.2e} m, stage2 {worst2:.2e} m, cost descent {cost_ok}")


def test_c7_oracle_equivalence():
    rng = np.random.default_rng(SEED + 7)
    worst_grid = worst_sep = 0.0
    off_grid = 0
    closed_form_beats_grid = True
    for _ in range(50):
        # 1 px keeps the noisy minimizer inside the 10 cm search cube even for
        # two-camera scenes; at 3 px an occasional estimate lands ~6 cm out.
        scene, truth, obs = random_instance(rng, n_targets=3, sigma=1.0)
        rays = [observation_ray(scene.camera(c), obs.pixels[(c, 0)])
                for c in obs.cameras_observing(0)]
        closed = triangulate_lls(rays).position
        grid = grid_argmin(rays, truth[0])
        gap = np.max(np.abs(grid - closed))
        worst_grid = max(worst_grid, gap)
        off_grid += gap > 0.001 + 1e-12
        # the grid's best point should never undercut the true minimizer
        closed_form_beats_grid &= bool(
            sum_sq_distance(closed[None], rays)[0] <= sum_sq_distance(grid[None], rays)[0]
        )

        init = np.array([e.position for _, e in sorted(localize_linear(scene, obs).items())])
        joint = refine_lm(scene, obs, init)
        for j in range(3):
            alone = refine_lm(scene, obs, init[j : j + 1], target_ids=[j])
            worst_sep = max(worst_sep, np.max(np.abs(alone.positions[0] - joint.positions[j])))
    ok = worst_grid <= 0.001 + 1e-12 and worst_sep <= 1e-9
    record("C7 oracle equivalence", ok,
           f"grid vs closed form {worst_grid * 1e3:.3f} mm (<= 1 mm; {off_grid}/50 instances "
           f"beyond one step, closed-form cost <= grid cost on all: {closed_form_beats_grid}), "
           f"joint vs per-target {worst_sep:.1e} m")


def test_c8_jacobian():
    rng = np.random.default_rng(SEED + 8)
    worst = 0.0
    for _ in range(100):
        scene, truth, obs = random_instance(rng, n_targets=2, sigma=3.0)
        x = truth + rng.normal(0, 0.02, truth.shape)
        worst = max(worst, jacobian_relative_error(residual_jacobian(scene, obs, x),
                                                   central_difference_jacobian(scene, obs, x)))
    record("C8 Jacobian check", worst < 1e-5, f"max relative error {worst:.2e} over 100 configs")


def test_c9_determinism(tmp_path):
    scene = build_table1_scene()
    write_scene(scene, tmp_path / "scene.json")
    rng = np.random.default_rng(SEED)
    frames = {}
    for f in range(5):
        truth = sample_targets(scene, 3, 0.1, rng)
        frames[f] = synthesize_observations(scene, truth, NoiseModel(3.0), rng)
    write_observations(frames, tmp_path / "obs.csv")

    commands = {
        "simulate": ["simulate", "--iterations", "200", "--seed", "7", "--emit-cdf", "{dir}/cdf.csv"],
        "sweep": ["sweep", "--parameter", "noise", "--values", "1,3", "--iterations", "50",
                  "--seed", "7"],
        "localize": ["localize", "--scene", str(tmp_path / "scene.json"),
                     "--observations", str(tmp_path / "obs.csv")],
    }
    ok, notes = True, []
    for name, argv in commands.items():
        outputs = []
        for k, workers in enumerate((1, 1, 3)):
            d = tmp_path / f"{name}{k}"
            d.mkdir()
            args = [a.format(dir=d) for a in argv] + ["--out", str(d / "out.csv")]
            if name != "localize":
                args += ["--workers", str(workers)]
            assert main(args) == 0
            outputs.append(sorted((p.name, p.read_bytes()) for p in d.iterdir()))
        same = outputs[0] == outputs[1] == outputs[2]
        ok &= same
        notes.append(f"{name} {'identical' if same else 'DIFFERS'}")
    record("C9 determinism", ok, ", ".join(notes) + " (workers 1, 1, 3)")


def _ring_scene(n_cameras):
    from passive_vlp import Camera, Intrinsics, Room, Scene
    from passive_vlp.camera import look_at_pose_robust

    intr = Intrinsics(1500.0, 1500.0, 2080.0, 1560.0)
    cams = []
    for i in range(n_cameras):
        a = 2 * np.pi * i / n_cameras
        pos = np.array([4 + 4 * np.cos(a), 4 + 4 * np.sin(a), 3.0])
        cams.append(Camera(i, intr, look_at_pose_robust(pos, np.array([4, 4, 1.5]))))
    return Scene(tuple(cams), Room((-0.5, -0.5, 0), (8.5, 8.5, 3)))


def test_c10_stage1_scaling():
    rng = np.random.default_rng(SEED)
    sizes = [(3, 2), (3, 4), (6, 4), (12, 4)]  # (targets, cameras); M*N = 6, 12, 24, 48
    mn, seconds = [], []
    for m, n in sizes:
        scene = _ring_scene(n)
        truth = sample_targets(scene, m, 0.5, rng)
        obs = synthesize_observations(scene, truth, NoiseModel(3.0), rng)
        reps = 200
        best = np.inf
        for _ in range(7):
            t0 = time.perf_counter()
            for _ in range(reps):
                localize_linear(scene, obs)
            best = min(best, (time.perf_counter() - t0) / reps)
        mn.append(m * n)
        seconds.append(best)
    fit = stats.linregress(mn, seconds)
    r2 = fit.rvalue**2
    record("C10 stage-1 scaling", r2 > 0.95 and fit.slope > 0,
           f"R^2 {r2:.3f}, " + ", ".join(f"MN={k}: {s * 1e6:.0f} us" for k, s in zip(mn, seconds)))


def test_table4_geometry_plausibility():
    res = run_monte_carlo(MonteCarloConfig(iterations=2000, seed=SEED), build_table4_scene())
    ok = res.mcjo.mpe < 20.0 and res.failures == 0
    record("table4 preset plausibility", ok, f"mcjo MPE {res.mcjo.mpe:.2f} mm (< 20 mm)")
