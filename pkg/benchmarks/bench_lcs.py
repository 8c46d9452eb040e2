#!/usr/bin/env python3
"""Benchmark the compiled LCS kernel against the pure-Python fallback.

Usage: python benchmarks/bench_lcs.py [--pairs N] [--repeat R]
"""

import argparse
import random
import time

from docstudy.metrics._lcs import lcs_length_python

try:
    from docstudy.metrics._lcs_fast import lcs_length as lcs_length_fast
except ImportError:
    lcs_length_fast = None


def make_pairs(n_pairs, length, vocab, rng):
    return [
        (
            [rng.randrange(vocab) for _ in range(length)],
            [rng.randrange(vocab) for _ in range(length)],
        )
        for _ in range(n_pairs)
    ]


def time_kernel(kernel, pairs, repeat):
    best = float("inf")
    checksum = 0
    for _ in range(repeat):
        start = time.perf_counter()
        checksum = sum(kernel(a, b) for a, b in pairs)
        best = min(best, time.perf_counter() - start)
    return best, checksum


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--pairs", type=int, default=50)
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    print(f"{'length':>8} {'python':>12} {'cython':>12} {'speedup':>9}")
    for length in (16, 64, 256, 1024):
        pairs = make_pairs(args.pairs, length, vocab=max(8, length // 8), rng=rng)
        py_time, py_sum = time_kernel(lcs_length_python, pairs, args.repeat)
        if lcs_length_fast is None:
            print(f"{length:>8} {py_time:>11.4f}s {'(not built)':>12} {'-':>9}")
            continue
        cy_time, cy_sum = time_kernel(lcs_length_fast, pairs, args.repeat)
        assert py_sum == cy_sum, "kernels disagree"
        print(f"{length:>8} {py_time:>11.4f}s {cy_time:>11.4f}s {py_time / cy_time:>8.1f}x")


if __name__ == "__main__":
    main()
