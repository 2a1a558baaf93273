"""
Time the hot kernels under both backends.

    python benchmarks/bench_kernels.py [--repeat 5] [--samples 2000]

Each kernel is run once to trigger compilation, then timed ``--repeat``
times; the best wall time is reported together with the numba speed-up and
the largest disagreement between the two backends.
"""
import argparse
import time

import numpy as np

from coordmed import kernels


def best_time(fn, repeat):
    fn()
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def cases(samples, rng):
    small = rng.uniform(-1, 1, size=(samples, 5, 2))
    wide = rng.uniform(-1, 1, size=(samples // 10, 25, 2))
    cands = rng.uniform(-1, 1, size=(200_000, 2))
    consts = np.array([[0.3, -0.2], [-np.inf, np.inf]])
    devs = rng.uniform(-2, 2, size=(1681, 2))
    return {
        "geometric_median_batch n=5": lambda: kernels.geometric_median_batch(small, 1e-10, 100_000)[0],
        "geometric_median_batch n=25": lambda: kernels.geometric_median_batch(wide, 1e-10, 100_000)[0],
        "optimal_batch p=3 n=5": lambda: kernels.optimal_batch(small, 3.0, False, 1e-10, 100_000)[0],
        "optimal_batch p=inf n=25": lambda: kernels.optimal_batch(wide, 1.0, True, 1e-10, 100_000)[0],
        "social_cost_many 200k": lambda: kernels.social_cost_many(cands, small[0], 1.0, False),
        "cwm_batch k=2": lambda: kernels.cwm_batch(small, consts, True),
        "cwm_deviations 41x41": lambda: kernels.cwm_deviations(small[0], consts, 2, devs, True),
    }


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[1])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--samples", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    table = cases(args.samples, rng)
    print(f"{'kernel':30s} {'numpy [s]':>11s} {'numba [s]':>11s} {'speed-up':>9s} {'max diff':>10s}")
    for name, fn in table.items():
        with kernels.using_backend("numpy"):
            t_np = best_time(fn, args.repeat)
            ref = fn()
        with kernels.using_backend("numba"):
            t_nb = best_time(fn, args.repeat)
            out = fn()
        diff = float(np.nanmax(np.abs(np.asarray(out) - np.asarray(ref))))
        print(f"{name:30s} {t_np:11.4f} {t_nb:11.4f} {t_np / t_nb:9.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
