import numpy as np
import pytest

from passive_vlp import Camera, Intrinsics, Room, Scene, build_table1_scene
from passive_vlp.camera import look_at_pose_robust
from passive_vlp.simulation import NoiseModel, sample_targets, synthesize_observations


def random_scene(rng, n_cameras=None):
    """Ceiling cameras at random spots in a random room, aimed near its middle."""
    L = rng.uniform(3.0, 10.0)
    H = rng.uniform(2.5, 4.0)
    n = n_cameras or int(rng.integers(2, 6))
    focal = rng.uniform(800.0, 3000.0)
    intr = Intrinsics(focal, focal * rng.uniform(0.95, 1.05), 2080.0, 1560.0)
    cams = []
    for i in range(n):
        pos = np.array([rng.uniform(0, L), rng.uniform(0, L), H])
        focus = np.array([L / 2, L / 2, 0.0]) + rng.uniform(-0.5, 0.5, 3)
        cams.append(Camera(i, intr, look_at_pose_robust(pos, focus)))
    return Scene(tuple(cams), Room((0, 0, 0), (L, L, H)))


def random_instance(rng, n_targets=3, sigma=0.0, n_cameras=None):
    """(scene, truth, observations) with every target visible to every camera."""
    while True:
        scene = random_scene(rng, n_cameras)
        try:
            truth = sample_targets(scene, n_targets, 0.1, rng, max_candidates=4096)
        except Exception:
            continue
        obs = synthesize_observations(scene, truth, NoiseModel(sigma), rng)
        return scene, truth, obs


@pytest.fixture
def table1():
    return build_table1_scene()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# (criterion, passed, detail) lines recorded by test_acceptance.py
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE_LINES:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
