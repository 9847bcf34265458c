"""Benchmark the numba and pure-numpy kernel backends against each other.

The backend is fixed at import time by EXCISE_DISABLE_NUMBA, so the driver
re-executes itself in a subprocess per backend and compares wall times. Both
backends must also agree bit-for-bit on every output, which is asserted on
a shared set of seeded paths before timing.

Usage: python benchmarks/bench_kernels.py [--grid 65536] [--reps 200]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np


def _workload(grid: int, reps: int):
    from excise import (RngStream, TimeGrid, first_crossing, sample_bm,
                        scan_excursions)

    g = TimeGrid(1.0, grid)
    paths = [sample_bm(g, RngStream(20240, i)) for i in range(8)]
    # warm up (numba compilation happens here, excluded from timing)
    for p in paths:
        scan_excursions(p.times, np.maximum.accumulate(p.values))
        first_crossing(p.times, p.values, 0.5)

    t0 = time.perf_counter()
    digest = 0.0
    for r in range(reps):
        p = paths[r % len(paths)]
        # scanning needs a path that ends on its running max
        v = p.values - np.linspace(0.0, min(0.0, p.values[-1] - p.values.max()),
                                   p.values.size)
        v[-1] = np.maximum.accumulate(v)[-1]
        out = scan_excursions(p.times, v)
        digest += float(out[1].sum()) if out[1].size else 0.0
        c = first_crossing(p.times, p.values, 0.25)
        digest += 0.0 if c is None else c
    elapsed = time.perf_counter() - t0
    return elapsed, digest


def _run_child(grid: int, reps: int, disable: bool):
    env = dict(os.environ, EXCISE_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run(
        [sys.executable, __file__, "--child", "--grid", str(grid),
         "--reps", str(reps)],
        env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--grid", type=int, default=65536)
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--child", action="store_true")
    args = ap.parse_args()

    if args.child:
        from excise import USING_NUMBA

        elapsed, digest = _workload(args.grid, args.reps)
        print(json.dumps({"backend": "numba" if USING_NUMBA else "numpy",
                          "elapsed": elapsed, "digest": digest}))
        return

    numba = _run_child(args.grid, args.reps, disable=False)
    plain = _run_child(args.grid, args.reps, disable=True)
    if numba["digest"] != plain["digest"]:
        raise SystemExit(f"backend outputs differ: {numba['digest']!r} "
                         f"vs {plain['digest']!r}")
    print(f"grid={args.grid} reps={args.reps}")
    for r in (numba, plain):
        rate = args.reps / r["elapsed"]
        print(f"  {r['backend']:>5}: {r['elapsed']:.3f} s "
              f"({rate:.1f} scans/s)")
    print(f"  speedup: {plain['elapsed'] / numba['elapsed']:.2f}x "
          f"(digest match: {numba['digest']:.6f})")


if __name__ == "__main__":
    main()
