"""Run the focal-length, noise, layout-distance and camera-count sweeps.

Writes one long-format CSV per sweep into --outdir, ready for plotting
MPE against the swept parameter per camera count and algorithm.
"""
import argparse
import logging
from pathlib import Path

from passive_vlp import MonteCarloConfig, SweepParameter, SweepSpec, run_sweep
from passive_vlp.files import write_sweep

SWEEPS = {
    SweepParameter.FOCAL_LENGTH_PX: (500, 1000, 1500, 2000, 2500, 3000, 3500, 4000),
    SweepParameter.NOISE_STD: (0.5, 1, 1.5, 2, 2.5, 3, 3.5, 4, 4.5, 5),
    SweepParameter.LAYOUT_DISTANCE: (4, 5, 6, 7, 8, 9, 10),
    SweepParameter.CAMERA_COUNT: (2, 3, 4),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iterations", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--outdir", default="sweeps")
    ap.add_argument("--only", choices=[p.value for p in SweepParameter])
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    base = MonteCarloConfig(iterations=args.iterations, seed=args.seed)
    for param, values in SWEEPS.items():
        if args.only and param.value != args.only:
            continue
        counts = () if param is SweepParameter.CAMERA_COUNT else (2, 3, 4)
        rows = run_sweep(SweepSpec(param, values, base, camera_counts=counts),
                         workers=args.workers)
        path = outdir / f"sweep_{param.value}.csv"
        write_sweep(rows, path)
        print(f"wrote {path}")
        for r in rows:
            print(f"  {param.value}={r.parameter_value:g} cams={r.camera_count} "
                  f"{r.algorithm:5} MPE {r.mpe_mm:7.2f} mm")


if __name__ == "__main__":
    main()
