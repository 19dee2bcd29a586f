"""Compare the compiled and numpy permutation kernels of the energy test.

    python benchmarks/bench_energy.py [--n 50000] [--dims 2] [--permutations 200] [--repeat 3]

Both backends get identical inputs; the script reports the best wall time of
each and the largest difference between their statistics.
"""
import argparse
import time

import numpy as np

from exactsem import _energy_py

try:
    from exactsem import _energy
except ImportError:
    _energy = None


def _inputs(n, dims, permutations, seed):
    rng = np.random.default_rng(seed)
    pooled = rng.standard_normal((2 * n, dims))
    directions = rng.standard_normal((2 * dims, dims))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    proj = pooled @ directions.T
    order = np.ascontiguousarray(np.argsort(proj, axis=0, kind="stable").T)
    values = np.ascontiguousarray(np.take_along_axis(proj.T, order, axis=1))
    seeds = np.random.SeedSequence(seed).generate_state(permutations, dtype=np.uint64)
    return values, order, seeds


def _best(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(n, dims, permutations, repeat, seed=0):
    values, order, seeds = _inputs(n, dims, permutations, seed)
    N = 2 * n
    rows = []
    for name, mod in (("cython", _energy), ("python", _energy_py)):
        if mod is None:
            print(f"{name:>7}: not built")
            continue
        t_lab, labels = _best(lambda: mod.permutation_labels(seeds, N, n), repeat)
        t_stat, stats = _best(lambda: mod.permutation_energy(values, order, labels, n), repeat)
        rows.append((name, t_lab, t_stat, labels, stats))
        print(f"{name:>7}: labels {t_lab:7.3f} s   statistics {t_stat:7.3f} s")
    if len(rows) == 2:
        (_, l1, s1, lab1, st1), (_, l2, s2, lab2, st2) = rows
        print(f"speed-up: labels x{l2 / l1:.1f}, statistics x{s2 / s1:.1f}")
        print(f"labels identical: {np.array_equal(lab1, lab2)}; "
              f"max |stat diff| {np.abs(st1 - st2).max():.2e}")


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=50_000, help="draws per sample")
    ap.add_argument("--dims", type=int, default=2)
    ap.add_argument("--permutations", type=int, default=200)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    print(f"N = 2 x {args.n}, {2 * args.dims} projections, {args.permutations} permutations")
    run(args.n, args.dims, args.permutations, args.repeat)


if __name__ == "__main__":
    main()
