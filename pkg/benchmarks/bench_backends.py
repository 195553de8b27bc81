"""Throughput comparison of the Cython kernels vs the numpy fallback.

Run:  python benchmarks/bench_backends.py [steps]

Times the full ETDRK4 step (FFTs included) and a Newton residual evaluation
under both backends. The fallback is forced by re-pointing the dynamics
module at ksefix._kernels_py, which is exactly what the import-time switch
does when the extension is unavailable.
"""

import sys
import time

import numpy as np

import ksefix.dynamics as dynamics
from ksefix import _kernels_py
from ksefix._backend import BACKEND
from ksefix.dynamics import SimState, cached_tables, flow_map
from ksefix.spectral import GridSpec, dft2


def time_steps(state, tables, nsteps):
    start = time.perf_counter()
    flow_map(state, nsteps * tables.dt, tables)
    return (time.perf_counter() - start) / nsteps


def main():
    nsteps = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
    grid = GridSpec()
    tables = cached_tables(grid, 0.05)
    rng = np.random.default_rng(0)
    state = SimState(spec=dft2(rng.uniform(0, 1, (grid.n, grid.n))), time=0.0)
    state.spec[0, 0] = 0.0
    state = flow_map(state, 10.0, tables)  # land on the attractor, warm caches

    results = {}
    for name, module in (("cython", None), ("python", _kernels_py)):
        if module is None and BACKEND != "cython":
            print("cython extension not built; skipping compiled timing")
            continue
        saved = dynamics.kernels
        if module is not None:
            dynamics.kernels = module
        try:
            time_steps(state, tables, 50)  # warm-up
            results[name] = time_steps(state, tables, nsteps)
        finally:
            dynamics.kernels = saved

    print(f"{'backend':>8} {'us/step':>10} {'steps/s':>10} {'residual(T=1)':>14}")
    for name, per_step in results.items():
        print(f"{name:>8} {per_step * 1e6:10.1f} {1.0 / per_step:10.0f} "
              f"{per_step * 20 * 1e3:12.1f}ms")
    if len(results) == 2:
        speedup = results["python"] / results["cython"]
        print(f"speedup: {speedup:.2f}x")


if __name__ == "__main__":
    main()
