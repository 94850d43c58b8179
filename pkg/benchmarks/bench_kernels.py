"""Compare the numba and pure-numpy kernel paths.

Part one times the two per-point kernels side by side in this process
(``geometry`` and ``graph_trace`` on random jets).  Part two times whole flow
steps in child processes with ``MCFLAB_NUMBA`` set to ``1`` and ``0``, since the
backend is fixed at import.

    python benchmarks/bench_kernels.py [--sizes 32 64 128] [--repeat 5] [--steps 200]
"""
import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

STEP_SCRIPT = """
import json, sys, time
from mcflab import _backend, model_spaces as ms
from mcflab.flow_engine import FlowConfig, StopRules, run
from mcflab.initial_maps import build_initial_map
N, steps = int(sys.argv[1]), int(sys.argv[2])
T = ms.flat_torus()
st = build_initial_map("RandomFourier", {"seed": 0, "max_mode": 2, "amplitude": 0.5}, T, T, ms.grid(T, N))
cfg = FlowConfig(t_end=1e9, output_stride=10**9, stop_rules=StopRules(max_steps=steps))
run(st, FlowConfig(t_end=1e9, output_stride=10**9, stop_rules=StopRules(max_steps=2)))  # warm-up / compile
t0 = time.perf_counter()
run(st, cfg)
print(json.dumps({"backend": _backend.BACKEND, "seconds": time.perf_counter() - t0}))
"""


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def bench_kernels(sizes, repeat):
    from mcflab import kernels

    rng = np.random.default_rng(0)
    rows = []
    for N in sizes:
        P = N * N
        M = rng.standard_normal((P, 2, 2))
        T = rng.standard_normal((P, 2, 2, 2))
        T = 0.5 * (T + np.swapaxes(T, -1, -2))
        kernels.geometry_loop(M[:4], T[:4], 1.0, 0.0)  # compile outside the timing
        kernels.graph_trace_loop(M[:4], T[:4])
        row = {
            "points": P,
            "geometry_numpy": best_of(lambda: kernels.geometry_numpy(M, T, 1.0, 0.0), repeat),
            "geometry_numba": best_of(lambda: kernels.geometry_loop(M, T, 1.0, 0.0), repeat),
            "trace_numpy": best_of(lambda: kernels.graph_trace_numpy(M, T), repeat),
            "trace_numba": best_of(lambda: kernels.graph_trace_loop(M, T), repeat),
        }
        rows.append(row)
    return rows


def bench_steps(N, steps):
    out = {}
    for flag in ("1", "0"):
        env = dict(os.environ, MCFLAB_NUMBA=flag)
        res = subprocess.run([sys.executable, "-c", STEP_SCRIPT, str(N), str(steps)], env=env,
                             capture_output=True, text=True, check=True)
        rec = json.loads(res.stdout.strip().splitlines()[-1])
        out[rec["backend"]] = rec["seconds"]
    return out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", type=int, nargs="+", default=[32, 64, 128])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--step-grid", type=int, default=64)
    args = p.parse_args(argv)

    from mcflab import _backend

    if not _backend.USE_NUMBA:
        print("numba disabled in this process; kernel comparison needs it", file=sys.stderr)
        return 1
    print(f"{'points':>8s} {'geom numpy':>11s} {'geom numba':>11s} {'speedup':>8s} "
          f"{'trace numpy':>12s} {'trace numba':>12s} {'speedup':>8s}")
    for r in bench_kernels(args.sizes, args.repeat):
        print(f"{r['points']:8d} {r['geometry_numpy'] * 1e3:9.2f}ms {r['geometry_numba'] * 1e3:9.2f}ms "
              f"{r['geometry_numpy'] / r['geometry_numba']:7.1f}x {r['trace_numpy'] * 1e3:10.2f}ms "
              f"{r['trace_numba'] * 1e3:10.2f}ms {r['trace_numpy'] / r['trace_numba']:7.1f}x")
    st = bench_steps(args.step_grid, args.steps)
    print(f"\n{args.steps} forward Euler steps on a {args.step_grid}^2 torus: "
          f"numba {st['numba']:.2f}s, numpy {st['numpy']:.2f}s ({st['numpy'] / st['numba']:.1f}x)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
