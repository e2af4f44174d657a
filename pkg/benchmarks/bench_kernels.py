"""Compiled vs pure-Python optimizer kernels.

Times the static optimizer and the batched must-include optimizer (one
call per active item, as at every epoch start) on random instances, and
checks that both backends return identical results.

    python3 benchmarks/bench_kernels.py --n 100 --k 10 --reps 200
"""

import argparse
import timeit

import numpy as np

from robust_assort import kernels


def bench(n, k, reps, seed):
    rng = np.random.default_rng(seed)
    r, v = rng.random(n), rng.random(n)
    musts = np.arange(n, dtype=np.int64)
    backends = kernels.available_backends()
    results, rows = {}, []
    for name in backends:
        mod = kernels.load(name)
        results[name] = (mod.bisect_opt(r, v, k, -1, 1e-9),
                         mod.bisect_opt_many(r, v, k, musts, 1e-9))
        t_static = min(timeit.repeat(lambda: mod.bisect_opt(r, v, k, -1, 1e-9),
                                     number=reps, repeat=3)) / reps
        t_batch = min(timeit.repeat(lambda: mod.bisect_opt_many(r, v, k, musts, 1e-9),
                                    number=max(1, reps // 20), repeat=3)) / max(1, reps // 20)
        rows.append((name, t_static, t_batch))
    same = all(res == results[backends[0]] for res in results.values())
    return rows, same


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, nargs="+", default=[20, 100, 300])
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    print(f"{'N':>5} {'backend':>9} {'static (us)':>12} {'batch of N (ms)':>16}")
    for n in args.n:
        rows, same = bench(n, min(args.k, n), args.reps, args.seed)
        base = {name: (ts, tb) for name, ts, tb in rows}
        for name, ts, tb in rows:
            print(f"{n:>5} {name:>9} {ts * 1e6:>12.1f} {tb * 1e3:>16.2f}")
        if "compiled" in base:
            py, c = base["python"], base["compiled"]
            print(f"{'':>5} {'speedup':>9} {py[0] / c[0]:>11.1f}x {py[1] / c[1]:>15.1f}x")
        print(f"{'':>5} outputs identical across backends: {same}")


if __name__ == "__main__":
    main()
