"""Time the sweep kernels with and without numba.

Each backend runs in its own interpreter, because the backend is chosen
from SELDOOR_DISABLE_NUMBA at import time. The numba run is timed after a
warm-up call so compilation is excluded.

    python benchmarks/bench_kernels.py --vertices 3 --draws 50
"""

import argparse
import json
import os
import subprocess
import sys

WORKLOAD = r"""
import json, sys, time
from seldoor._accel import BACKEND
from seldoor.sweep import run_sweep
nv, draws, reps = int(sys.argv[1]), int(sys.argv[2]), int(sys.argv[3])
run_sweep(max_vertices=2, exact_draws=2, necessity_draws=2)  # warm-up / compile
best = float("inf")
for _ in range(reps):
    t0 = time.perf_counter()
    rep = run_sweep(max_vertices=nv, exact_draws=min(20, draws), necessity_draws=draws)
    best = min(best, time.perf_counter() - t0)
print(json.dumps({"backend": BACKEND, "seconds": best, "graphs": rep.graphs, "queries": rep.queries,
                  "necessity_checks": rep.stat(15)}))
"""


def run(disable, args):
    env = dict(os.environ, SELDOOR_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run(
        [sys.executable, "-c", WORKLOAD, str(args.vertices), str(args.draws), str(args.repeat)],
        env=env, check=True, capture_output=True, text=True,
    )
    return json.loads(out.stdout.strip().splitlines()[-1])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--vertices", type=int, default=3)
    ap.add_argument("--draws", type=int, default=50)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    fast = run(False, args)
    slow = run(True, args)
    for r in (fast, slow):
        print(f"{r['backend']:>7}: {r['seconds']:.3f} s  ({r['graphs']} graphs, {r['queries']} queries)")
    print(f"speedup: {slow['seconds'] / fast['seconds']:.1f}x")


if __name__ == "__main__":
    main()
