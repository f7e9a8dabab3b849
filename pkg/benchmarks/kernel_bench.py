#!/usr/bin/env python3
"""Time the jitted kernels against their pure-numpy fallbacks.

Compiles the loop variants directly (independent of TT_BACKEND) so both
flavours run in one process:

    python benchmarks/kernel_bench.py [--repeats 200]
"""

from __future__ import annotations

import argparse
import time

import numba
import numpy as np

from ttasr import kernels


def bench(fn, args, repeats):
    fn(*args)  # warm-up / compile
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()
    rng = np.random.default_rng(0)

    jit = numba.njit(cache=True, fastmath=True)
    cases = []

    # memory-layer step at the default config's sizes
    window = rng.standard_normal((11, 144)).astype(np.float32)
    taps = rng.standard_normal((11, 144)).astype(np.float32)
    out_proj = rng.standard_normal((400, 144)).astype(np.float32)
    bias = rng.standard_normal(400).astype(np.float32)
    x = rng.standard_normal(400).astype(np.float32)
    cases.append(("dfsmn_step (11x144 -> 400)",
                  jit(kernels._dfsmn_step_loops), kernels._dfsmn_step_np,
                  (window, taps, out_proj, bias, x)))

    q = rng.integers(-127, 128, size=(400, 144)).astype(np.int8)
    scale = (rng.random(400) + 0.1).astype(np.float32)
    v = rng.standard_normal(144).astype(np.float32)
    cases.append(("qmatvec (400x144 int8)",
                  jit(kernels._qmatvec_loops), kernels._qmatvec_np,
                  (q, scale, v)))

    ref = rng.integers(0, 30, size=40).astype(np.int32)
    hyp = rng.integers(0, 30, size=35).astype(np.int32)
    cases.append(("levenshtein_counts (40x35)",
                  jit(kernels._levenshtein_counts_loops),
                  kernels._levenshtein_counts_np, (ref, hyp)))

    print(f"{'kernel':<30} {'numba':>12} {'numpy':>12} {'speedup':>9}")
    for name, jitted, fallback, case_args in cases:
        t_jit = bench(jitted, case_args, args.repeats)
        t_np = bench(fallback, case_args, args.repeats)
        print(f"{name:<30} {t_jit * 1e6:>10.1f}us {t_np * 1e6:>10.1f}us "
              f"{t_np / t_jit:>8.1f}x")


if __name__ == "__main__":
    main()
