"""Monte Carlo accuracy at the default ceiling-corner settings.

Prints MPE/RMSE/STD/CDF for both algorithms, total and per axis, next to the
published reference values.

    python scripts/reproduce_table2.py --iterations 10000 --seed 0
"""
import argparse
import time

from passive_vlp import MonteCarloConfig, NoiseModel, build_table1_scene, run_monte_carlo

REFERENCE = {
    ("mcjo", "mpe"): 9.69, ("mcvlp", "mpe"): 12.00,
    ("mcjo", "rmse"): 10.82, ("mcvlp", "rmse"): 13.14,
    ("mcjo", "cdf50"): 9.08, ("mcvlp", "cdf50"): 11.36,
    ("mcjo", "cdf90"): 16.07, ("mcvlp", "cdf90"): 19.21,
    ("mcjo", "std"): 4.74, ("mcvlp", "std"): 5.34,
}
AXIS_REFERENCE = {
    "mpe": (5.08, 5.06, 4.29),
    "rmse": (6.62, 6.60, 5.45),
    "cdf50": (4.02, 4.07, 3.59),
    "cdf90": (10.98, 11.12, 8.95),
    "std": (4.25, 4.24, 3.36),
}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--iterations", type=int, default=10_000)
    ap.add_argument("--sigma", type=float, default=3.0)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    config = MonteCarloConfig(iterations=args.iterations, noise=NoiseModel(args.sigma),
                              seed=args.seed)
    t0 = time.perf_counter()
    res = run_monte_carlo(config, build_table1_scene(), workers=args.workers)
    print(f"{args.iterations} iterations, {res.failures} failed, "
          f"{time.perf_counter() - t0:.1f} s\n")

    print(f"{'metric':8} {'mcjo':>8} {'(ref)':>8} {'mcvlp':>8} {'(ref)':>8}   mcjo x/y/z (ref)")
    for name in ("mpe", "rmse", "cdf50", "cdf90", "std"):
        j, v = getattr(res.mcjo, name), getattr(res.mcvlp, name)
        axes = getattr(res.mcjo, f"per_axis_{name}")
        ref_axes = "/".join(f"{a:.2f}" for a in AXIS_REFERENCE[name])
        print(f"{name:8} {j:8.2f} {REFERENCE['mcjo', name]:8.2f} {v:8.2f} "
              f"{REFERENCE['mcvlp', name]:8.2f}   "
              + "/".join(f"{a:.2f}" for a in axes) + f" ({ref_axes})")
    gain = (res.mcvlp.mpe - res.mcjo.mpe) / res.mcvlp.mpe
    print(f"\nMPE improvement of refinement over linear: {gain:.1%} (reported ~19%)")


if __name__ == "__main__":
    main()
