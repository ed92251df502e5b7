"""Time the numba and numpy stepping backends on the same gap run.

Usage: python benchmarks/bench_kernels.py [--nodes 6000] [--steps 5000]
"""

import argparse
import time

import numpy as np

from crimefront._accel import HAS_NUMBA
from crimefront._kernels import Stepper
from crimefront.kinetics import KineticsParams, g_shifted
from crimefront.pde_solver import GapLayout, alpha_on_grid


def setup(n_nodes, dx):
    params = KineticsParams.normalized(3.0, 0.2)
    x = -30.0 + dx * np.arange(n_nodes)
    s0 = 1.0 / (1.0 + np.exp((x + 12.0) / 0.25))
    alpha = alpha_on_grid(GapLayout.single(0.4), x, dx, params.alpha)
    return params, x, s0, g_shifted(s0, params), alpha


def run(backend, params, s0, u0, alpha, dx, dt, steps, repeat):
    best = np.inf
    for _ in range(repeat):
        s, u = s0.copy(), u0.copy()
        stepper = Stepper(alpha, dt, dx, params, backend=backend)
        t0 = time.perf_counter()
        stepper.advance(s, u, steps)
        best = min(best, time.perf_counter() - t0)
    return best, s


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--nodes", type=int, default=6000)
    ap.add_argument("--steps", type=int, default=5000)
    ap.add_argument("--dx", type=float, default=0.01)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    params, x, s0, u0, alpha = setup(args.nodes, args.dx)
    dt = args.dx
    results = {}
    backends = ["numpy"] + (["numba"] if HAS_NUMBA else [])
    if HAS_NUMBA:
        # compile outside the timed region
        run("numba", params, s0[:16], u0[:16], alpha[:16], args.dx, dt, 1, 1)
    for backend in backends:
        elapsed, s = run(backend, params, s0, u0, alpha, args.dx, dt, args.steps, args.repeat)
        results[backend] = (elapsed, s)
        rate = args.nodes * args.steps / elapsed / 1e6
        print(f"{backend:6s} {elapsed:8.3f} s  {rate:8.1f} Mnode-steps/s")
    if len(results) == 2:
        diff = np.max(np.abs(results["numba"][1] - results["numpy"][1]))
        print(f"speedup {results['numpy'][0] / results['numba'][0]:.1f}x, max |s_numba - s_numpy| = {diff:.2e}")


if __name__ == "__main__":
    main()
