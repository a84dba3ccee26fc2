#!/usr/bin/env python3
"""Compare the jitted simplex kernel against the pure-numpy fallback.

Runs a fixed workload of LP relaxations and MILP certificates twice, in
child processes with CFCERT_PURE_NUMPY toggled, and prints both timings.

    python3 benchmarks/kernel_bench.py
"""

from __future__ import annotations

import json
import os
import subprocess
import sys
import time


def workload() -> dict:
    import numpy as np

    from cfcert._kernels import KERNEL_MODE
    from cfcert.milp import GE, LE, LinearProgram, branch_and_bound, encode_output_bound
    from cfcert.milp.simplex import simplex_solve
    from cfcert.models import Layer, ReluNetwork

    rng = np.random.default_rng(42)

    # warm-up triggers the jit compile outside the timed section
    warm = LinearProgram(c=[1.0], A=[[1.0]], rel=[GE], rhs=[0.0], lo=[0.0], hi=[10.0])
    simplex_solve(warm)

    t0 = time.perf_counter()
    for _ in range(40):
        n = 18
        A = rng.normal(size=(24, n))
        lp = LinearProgram(
            c=rng.normal(size=n),
            A=A,
            rel=[LE] * 24,
            rhs=np.abs(A).sum(axis=1) * 0.5,
            lo=np.zeros(n),
            hi=np.ones(n),
        )
        simplex_solve(lp)
    lp_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    for trial in range(12):
        g = np.random.default_rng(trial)
        net = ReluNetwork(
            layers=(
                Layer(weights=g.normal(size=(8, 4)), bias=g.normal(size=8) * 0.1),
                Layer(weights=g.normal(size=(1, 8)), bias=g.normal(size=1) * 0.1),
            )
        )
        x = g.uniform(0, 1, 4)
        for direction in ("min", "max"):
            enc = encode_output_bound(net, x, 0.08, 0, direction)
            branch_and_bound(enc.problem)
    milp_seconds = time.perf_counter() - t0

    return {"mode": KERNEL_MODE, "lp_seconds": lp_seconds, "milp_seconds": milp_seconds}


def main() -> int:
    if "--run" in sys.argv:
        print(json.dumps(workload()))
        return 0
    results = []
    for pure in ("0", "1"):
        env = dict(os.environ, CFCERT_PURE_NUMPY=pure)
        out = subprocess.run(
            [sys.executable, __file__, "--run"], env=env, capture_output=True, text=True, check=True
        )
        results.append(json.loads(out.stdout.strip().splitlines()[-1]))
    print(f"{'kernel':<8} {'40 LPs':>10} {'48 MILPs':>10}")
    for r in results:
        print(f"{r['mode']:<8} {r['lp_seconds']:>9.3f}s {r['milp_seconds']:>9.3f}s")
    a, b = results
    if a["mode"] != b["mode"]:
        speedup = b["milp_seconds"] / max(a["milp_seconds"], 1e-9)
        print(f"speedup ({a['mode']} over {b['mode']}): {speedup:.1f}x on the MILP batch")
    return 0


if __name__ == "__main__":
    sys.exit(main())
