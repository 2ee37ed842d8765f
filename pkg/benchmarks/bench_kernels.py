"""Compare the compiled and pure-Python RK4 kernels.

Usage: ``python benchmarks/bench_kernels.py [--steps 2000] [--depth 10]``
"""
import argparse
import time

import numpy as np

from fiberheom import kernels
from fiberheom.heom import IntegratorConfig, enumerate_hierarchy, evolve, liouvillian
from fiberheom.model import FiberParams, ModelConfig, build_baths


def time_kernel(backend, mat, x0, steps, repeats):
    best = float("inf")
    x = x0
    for _ in range(repeats):
        x = x0.copy()
        start = time.perf_counter()
        kernels.rk4_propagate(mat, x, 1e-3, steps, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, x


def time_trajectory(backend, cfg, depth):
    start = time.perf_counter()
    traj = evolve(cfg, IntegratorConfig(max_depth=depth), 25.0, backend=backend, keep_rdms=False)
    return time.perf_counter() - start, traj.concurrences[-1]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--steps", type=int, default=2000)
    parser.add_argument("--depth", type=int, default=10)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    cfg = ModelConfig(fiber=FiberParams.from_eta(0.1, 0.1))
    layout = enumerate_hierarchy(2, args.depth)
    mat = liouvillian(layout, np.zeros((4, 4)), build_baths(cfg))
    rng = np.random.default_rng(0)
    x0 = (rng.normal(size=mat.shape[0]) + 1j * rng.normal(size=mat.shape[0])) * 1e-2

    backends = ["python"] + (["compiled"] if kernels._compiled is not None else [])
    print(f"generator: {mat.shape[0]} unknowns, {mat.nnz} nonzeros; {args.steps} RK4 steps")
    results = {}
    for backend in backends:
        wall, x = time_kernel(backend, mat, x0, args.steps, args.repeats)
        results[backend] = x
        print(f"  {backend:9s} kernel  {wall * 1e3:9.1f} ms  ({wall / args.steps * 1e6:7.2f} us/step)")
    if len(results) == 2:
        diff = np.max(np.abs(results["python"] - results["compiled"]))
        print(f"  max |python - compiled| = {diff:.2e}")

    print("full trajectory (eta=0.1, L_c=100 m, 5 km):")
    walls = {}
    for backend in backends:
        wall, final = time_trajectory(backend, cfg, args.depth)
        walls[backend] = wall
        print(f"  {backend:9s} {wall:7.2f} s  final concurrence {final:.9e}")
    if len(walls) == 2:
        print(f"  speedup {walls['python'] / walls['compiled']:.2f}x")


if __name__ == "__main__":
    main()
