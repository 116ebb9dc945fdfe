"""Time each hot kernel under the numpy and numba backends.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--n 200] [--m 3]
"""
import argparse
import time

import numpy as np

from fairevo import _kernels


def _inputs(n, m, seed):
    rng = np.random.default_rng(seed)
    F = rng.random((n, m))
    order = np.arange(n, dtype=np.int64)
    return {
        "nondominated_mask": (F,),
        "eps_matrix": (F,),
        "sde_min_distance": (F,),
        "stochastic_bubble": (order, rng.random(n), rng.random(n), rng.random((n, n)), 0.5),
        "count_dominated_samples": (F[:50], rng.random((20000, m))),
    }


def bench(backend, name, args, repeat):
    fn = getattr(backend, name)
    fn(*args)  # compile / warm up outside the timed loop
    best = np.inf
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--n", type=int, default=200, help="population size")
    ap.add_argument("--m", type=int, default=3, help="number of objectives")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    inputs = _inputs(args.n, args.m, args.seed)
    names = list(_kernels.BACKENDS)
    print(f"{'kernel':<26}" + "".join(f"{b:>14}" for b in names) + ("     speedup" if len(names) > 1 else ""))
    for kernel, kargs in inputs.items():
        times = [bench(_kernels.BACKENDS[b], kernel, kargs, args.repeat) for b in names]
        row = f"{kernel:<26}" + "".join(f"{t * 1e3:>12.3f}ms" for t in times)
        if len(times) > 1:
            row += f"{times[0] / times[1]:>11.1f}x"
        print(row)


if __name__ == "__main__":
    main()
