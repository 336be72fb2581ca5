"""Numba kernels vs the numpy fallback on the hot loops.

    python3 benchmarks/bench_kernels.py [--rungs 9] [--repeat 5]

Times sector enumeration, bond-table construction and one H|v> apply on the
S^z = 0 sector of a 2 x rungs ladder plus two qubits (rungs = 9 gives 20
sites, 184756 states). First numba call is timed separately (JIT compile).
Results of both backends are checked for equality before timing.
"""
import argparse
import time

import numpy as np

from spinbus import kernels
from spinbus.model import LadderSpec, attach_qubits


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rungs", type=int, default=9)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    graph = attach_qubits(LadderSpec(args.rungs, 10.0, 1.0, "TypeA"))
    n = graph.n_sites
    bi, bj, bJ = graph.arrays()
    half = 0.5 * bJ
    print(f"{n} sites, {len(bJ)} bonds")

    results = {}
    for backend in (kernels.NUMPY, kernels.NUMBA):
        t0 = time.perf_counter()
        states = backend.enumerate_states(n, n // 2)
        diag, flips = backend.bond_tables(states, bi, bj, bJ)
        v = np.random.default_rng(0).standard_normal(states.size)
        out = np.empty_like(v)
        backend.apply(diag, flips, half, v, out)
        first = time.perf_counter() - t0
        row = {
            "first call": first,
            "enumerate": best_of(lambda: backend.enumerate_states(n, n // 2), args.repeat),
            "bond tables": best_of(lambda: backend.bond_tables(states, bi, bj, bJ), args.repeat),
            "apply": best_of(lambda: backend.apply(diag, flips, half, v, out), args.repeat),
        }
        results[backend.name] = (row, states, diag, flips, out.copy())

    _, s0, d0, f0, o0 = results["numpy"]
    _, s1, d1, f1, o1 = results["numba"]
    same = np.array_equal(s0, s1) and np.array_equal(d0, d1) and np.array_equal(f0, f1) and np.array_equal(o0, o1)
    print(f"dim {s0.size}, backends bit-identical: {same}")
    print(f"{'stage':<12} {'numpy [s]':>11} {'numba [s]':>11} {'speedup':>8}")
    for stage in ("enumerate", "bond tables", "apply", "first call"):
        a = results["numpy"][0][stage]
        b = results["numba"][0][stage]
        print(f"{stage:<12} {a:11.4f} {b:11.4f} {a / b:8.1f}")


if __name__ == "__main__":
    main()
