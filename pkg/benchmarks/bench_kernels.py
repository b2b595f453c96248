#!/usr/bin/env python3
"""Throughput comparison of the two stage-kernel lanes (pure numpy vs the
compiled extension) on realistic flow states.

Usage:
    python3 benchmarks/bench_kernels.py [--sizes 64,256,1024] [--repeats 200]

Each measurement times `repeats` evaluations of the full stage (geometry +
curvatures + admissibility + global term + rhs) on a perturbed sphere and
reports evaluations/second per lane plus the speedup.  The same arrays go to
both lanes, so the numbers are directly comparable.
"""

import argparse
import math
import time

import numpy as np

from hcflow import kernels
from hcflow.curvfn import CurvatureSpec
from hcflow.hypersurface import GraphPatch, quad_weights


def _case(backend, n, N):
    if backend == "fullcircle":
        theta = 2.0 * math.pi * np.arange(N) / N
    else:
        theta = math.pi * (np.arange(N) + 0.5) / N
    u = 1.0 + 0.1 * np.cos(2.0 * theta)
    patch = GraphPatch(backend=backend, n=n, a=1.0, u=u)
    W = quad_weights(patch)
    cot = np.cos(theta) / np.sin(theta) if backend == "axisym" else None
    return np.asarray(u), cot, W


def _time_lane(fn_pair, backend, n, N, repeats, spec):
    stage_full, stage_ax = fn_pair
    u, cot, W = _case(backend, n, N)
    fam = kernels.FAMILY_CODES[spec.family]
    p1 = float(spec.param1 or 0.0)
    p2 = float(spec.param2 or 0.0)
    args_full = (u, 1.0, spec.alpha, 1, fam, p1, p2, spec.c_F, W)
    args_ax = (u, cot, 1.0, n, spec.alpha, 1, fam, p1, p2, spec.c_F, W)

    def call():
        if backend == "fullcircle":
            return stage_full(*args_full)
        return stage_ax(*args_ax)

    out = call()  # warm-up + sanity
    assert out[0] == 0, "benchmark state must be admissible"
    start = time.perf_counter()
    for _ in range(repeats):
        call()
    return repeats / (time.perf_counter() - start)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", default="64,256,1024",
                    help="comma-separated grid sizes (default 64,256,1024)")
    ap.add_argument("--repeats", type=int, default=200)
    args = ap.parse_args()
    sizes = [int(s) for s in args.sizes.split(",")]

    lanes = kernels.available_lanes()
    if "cython" not in lanes:
        print("note: compiled lane not built; showing pure lane only")

    spec_h = CurvatureSpec(family="MeanH", n=2, alpha=1.0, param1=0.0, param2=0.0)
    spec_q = CurvatureSpec(family="ElemSymmetricQuotient", n=2, alpha=1.0,
                           param1=2.0, param2=1.0)
    cases = [("fullcircle", 1, CurvatureSpec(family="MeanH", n=1, alpha=0.0,
                                             param1=0.0, param2=0.0)),
             ("axisym", 2, spec_h),
             ("axisym", 2, spec_q)]

    header = f"{'case':<38}{'N':>6}" + "".join(f"{lane + ' ev/s':>15}" for lane in lanes)
    if len(lanes) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for backend, n, spec in cases:
        for N in sizes:
            rates = [_time_lane(kernels.get_stage_functions(lane), backend, n, N,
                                args.repeats, spec) for lane in lanes]
            label = f"{backend} n={n} {spec.family}"
            row = f"{label:<38}{N:>6}" + "".join(f"{r:>15.0f}" for r in rates)
            if len(rates) == 2:
                row += f"{rates[1] / rates[0]:>9.1f}x"
            print(row)


if __name__ == "__main__":
    main()
