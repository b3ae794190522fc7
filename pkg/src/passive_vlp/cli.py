"""Command-line interface: ``simulate``, ``sweep``, ``localize`` and ``export-scene``.

Exit codes: 0 success (per-target failures in ``localize`` included),
2 usage error, 3 input-file error, 4 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import files
from .errors import BehindCamera, PositioningError, TargetFailures
from .refinement import SolverConfig, localize, per_target_cost
from .simulation import (
    MonteCarloConfig,
    NoiseModel,
    SweepParameter,
    SweepSpec,
    TABLE1_FOCAL_PX,
    build_table1_scene,
    build_table4_scene,
    run_monte_carlo,
    run_sweep,
)
from .triangulation import localize_linear

EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_RUNTIME = 4

log = logging.getLogger("passive_vlp")


def _number_list(cast):
    def parse(text):
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if not parts:
            raise argparse.ArgumentTypeError("expected a non-empty comma-separated list")
        try:
            return [cast(p) for p in parts]
        except ValueError:
            raise argparse.ArgumentTypeError(f"invalid list {text!r}") from None

    return parse


def _scene_args(p, with_table1_knobs=True):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", choices=("table1", "table4"), default=None,
                     help="built-in camera layout (default table1)")
    src.add_argument("--scene", help="scene JSON file")
    if with_table1_knobs:
        p.add_argument("--focal", type=float, default=TABLE1_FOCAL_PX,
                       help="focal length in px for the table1 preset")
        p.add_argument("--layout", type=float, default=8.0,
                       help="layout distance L in m for the table1 preset")
        p.add_argument("--camera-count", type=int, default=4, choices=(2, 3, 4),
                       help="number of ceiling cameras for the table1 preset")


def _mc_args(p, iterations):
    p.add_argument("--sigma", type=float, default=3.0, help="pixel noise STD")
    p.add_argument("--iterations", type=int, default=iterations)
    p.add_argument("--targets", type=int, default=3, help="targets per iteration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--margin", type=float, default=0.1, help="sampling margin from walls, m")
    p.add_argument("--workers", type=int, default=1, help="worker processes")
    p.add_argument("--out", required=True)


def build_parser():
    parser = argparse.ArgumentParser(prog="passive-vlp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo accuracy of both algorithms")
    _scene_args(p)
    _mc_args(p, 10_000)
    p.add_argument("--emit-cdf", metavar="PATH", help="also write raw error samples here")

    p = sub.add_parser("sweep", help="MPE versus one parameter")
    p.add_argument("--parameter", required=True, choices=[s.value for s in SweepParameter])
    p.add_argument("--values", required=True, type=_number_list(float))
    p.add_argument("--cameras", type=_number_list(int), default=[2, 3, 4],
                   help="camera counts to run at each value")
    p.add_argument("--focal", type=float, default=TABLE1_FOCAL_PX)
    p.add_argument("--layout", type=float, default=8.0)
    _mc_args(p, 2_000)

    p = sub.add_parser("localize", help="localize targets from an observation file")
    _scene_args(p, with_table1_knobs=False)
    p.add_argument("--observations", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--linear-only", action="store_true", help="skip joint refinement")

    p = sub.add_parser("export-scene", help="write a preset scene as JSON")
    _scene_args(p)
    p.add_argument("--out", required=True)
    return parser


def _load_scene(args):
    if getattr(args, "scene", None):
        return files.parse_scene(args.scene)
    if args.preset == "table4":
        return build_table4_scene()
    if hasattr(args, "focal"):
        return build_table1_scene(args.layout, args.camera_count, args.focal)
    return build_table1_scene()


def _mc_config(args):
    return MonteCarloConfig(
        iterations=args.iterations,
        targets_per_iteration=args.targets,
        noise=NoiseModel(args.sigma),
        seed=args.seed,
        sampling_margin=args.margin,
    )


def cmd_simulate(args):
    scene = _load_scene(args)
    result = run_monte_carlo(_mc_config(args), scene, workers=args.workers)
    metrics = {"mcjo": result.mcjo, "mcvlp": result.mcvlp}
    files.write_metrics(metrics, args.out)
    if args.emit_cdf:
        files.write_samples(metrics, args.emit_cdf)
    log.info("mcjo MPE %.3f mm, mcvlp MPE %.3f mm, %d failed iteration(s)",
             result.mcjo.mpe, result.mcvlp.mpe, result.failures)
    if result.flagged:
        print(f"error: {result.failures} of {result.iterations} iterations failed",
              file=sys.stderr)
        return EXIT_RUNTIME
    return 0


def cmd_sweep(args):
    spec = SweepSpec(
        parameter=SweepParameter(args.parameter),
        values=tuple(args.values),
        base=_mc_config(args),
        camera_counts=tuple(args.cameras),
        focal_px=args.focal,
        layout_distance=args.layout,
    )
    rows = run_sweep(spec, workers=args.workers)
    files.write_sweep(rows, args.out)
    if any(r.flagged for r in rows):
        print("error: some sweep points had more than 1% failed iterations", file=sys.stderr)
        return EXIT_RUNTIME
    return 0


def _cost_or_none(scene, obs, positions, target_ids):
    try:
        return per_target_cost(scene, obs, positions, target_ids)
    except BehindCamera:
        return None


def _position_rows(frame, scene, obs, positions, target_ids, algorithm, costs=None):
    if costs is None:
        costs = _cost_or_none(scene, obs, positions, target_ids)
    rows = []
    for k, tid in enumerate(target_ids):
        x, y, z = positions[k]
        rows.append({
            "frame_id": frame, "target_id": tid, "algorithm": algorithm,
            "x_m": float(x), "y_m": float(y), "z_m": float(z),
            "reproj_cost_px2": "" if costs is None else float(costs[k]),
            "status": "ok" if costs is not None else "behind_camera",
        })
    return rows


def _failure_rows(frame, failures, algorithms):
    rows = []
    for tid, exc in failures.items():
        status = type(exc).__name__
        for alg in algorithms:
            rows.append({"frame_id": frame, "target_id": tid, "algorithm": alg,
                         "status": status})
    return rows


def cmd_localize(args):
    scene = _load_scene(args)
    frames = files.parse_observations(args.observations, scene)
    algorithms = ("mcvlp",) if args.linear_only else ("mcjo", "mcvlp")
    rows = []
    config = SolverConfig()
    for frame, obs in frames.items():
        failures = {}
        if args.linear_only:
            try:
                linear = localize_linear(scene, obs)
            except TargetFailures as exc:
                failures, linear = exc.failures, exc.partial
            result = None
        else:
            try:
                result = localize(scene, obs, config)
            except TargetFailures as exc:
                failures, result = exc.failures, exc.partial
            linear = result.linear if result is not None else {}
        frame_rows = []
        if result is not None:
            frame_rows += _position_rows(frame, scene, obs, result.positions, result.target_ids,
                                         "mcjo", result.target_costs)
        if linear:
            ids = sorted(linear)
            frame_rows += _position_rows(frame, scene, obs,
                                         np.array([linear[t].position for t in ids]), ids, "mcvlp")
        frame_rows += _failure_rows(frame, failures, algorithms)
        for t, exc in failures.items():
            log.warning("frame %s target %s: %s", frame, t, exc)
        frame_rows.sort(key=lambda r: (r["target_id"], algorithms.index(r["algorithm"])))
        rows += frame_rows
    files.write_positions(rows, args.out)
    return 0


def cmd_export_scene(args):
    files.write_scene(_load_scene(args), args.out)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "localize": cmd_localize,
    "export-scene": cmd_export_scene,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except files.InputFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        # invalid numeric arguments (negative sigma, bad sweep values, ...)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except PositioningError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
