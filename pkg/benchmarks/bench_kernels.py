"""Compare the compiled and pure-Python trajectory kernels.

Usage::

    python benchmarks/bench_kernels.py [--M 1000] [--repeat 5]

Two timings per backend:

``kernel``
    ``walk_batch`` alone on a fixed block of uniforms (the hot loop).
``end-to-end``
    ``simulate_trajectories`` including generator setup and counting.

Both backends must produce identical count matrices; the script exits
nonzero if they do not.
"""
from __future__ import annotations

import argparse
import sys
import timeit

import numpy as np

from mdpagg import estimation
from mdpagg._walk_py import walk_batch as walk_python
from mdpagg.groundtruth import ChainParams, build_natural_tpm

try:
    from mdpagg._walk import walk_batch as walk_cython
except ImportError:  # extension not built
    walk_cython = None


def kernel_inputs(P, M, block, seed=0):
    cum = estimation.cumulative_rows(P)
    absorbing = estimation.absorbing_states(P).astype(np.uint8)
    rng = np.random.default_rng(seed)
    uniforms = rng.random((M, block))
    start = P.shape[0] - 2
    return cum, absorbing, start, uniforms


def time_kernel(walk, cum, absorbing, start, uniforms, repeat):
    M, block = uniforms.shape

    def run():
        states = np.full(M, start, dtype=np.int64)
        paths = np.empty((M, block), dtype=np.int64)
        lengths = np.empty(M, dtype=np.int64)
        walk(cum, absorbing, states, uniforms, paths, lengths)
        return states

    return min(timeit.repeat(run, number=1, repeat=repeat))


def time_end_to_end(walk, P, M, repeat):
    original = estimation.kernels.walk_batch
    estimation.kernels.walk_batch = walk
    try:
        counts = estimation.simulate_trajectories(P, M, 1)[1]
        best = min(
            timeit.repeat(lambda: estimation.simulate_trajectories(P, M, 1), number=1, repeat=repeat)
        )
    finally:
        estimation.kernels.walk_batch = original
    return best, counts


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--M", type=int, default=1000)
    parser.add_argument("--block", type=int, default=estimation.BLOCK)
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args(argv)

    P = build_natural_tpm(ChainParams())
    backends = [("python", walk_python)]
    if walk_cython is not None:
        backends.insert(0, ("cython", walk_cython))
    else:
        print("compiled extension not available; timing the Python kernel only")

    inputs = kernel_inputs(P, args.M, args.block)
    rows, counts = [], {}
    for name, walk in backends:
        k = time_kernel(walk, *inputs, args.repeat)
        e, counts[name] = time_end_to_end(walk, P, args.M, args.repeat)
        rows.append((name, k, e))

    print(f"M = {args.M} trajectories, block = {args.block}, best of {args.repeat}")
    print(f"{'backend':<8} {'kernel [ms]':>12} {'end-to-end [ms]':>16}")
    for name, k, e in rows:
        print(f"{name:<8} {1e3 * k:>12.2f} {1e3 * e:>16.2f}")
    if len(rows) == 2:
        print(f"speedup  {rows[1][1] / rows[0][1]:>12.1f}x {rows[1][2] / rows[0][2]:>15.1f}x")
        if not np.array_equal(counts["cython"], counts["python"]):
            print("backends disagree on transition counts", file=sys.stderr)
            return 1
        print("count matrices identical across backends")
    return 0


if __name__ == "__main__":
    sys.exit(main())
