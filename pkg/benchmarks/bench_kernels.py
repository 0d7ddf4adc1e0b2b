"""Benchmark the numba lane against the numpy/scipy fallback.

Times the two hot kernels, grid shortest paths and Lax-Oleinik value
iteration, on a representative quasi-periodic workload.  Run with

    python benchmarks/bench_kernels.py [--half 8] [--h 0.1] [--sweeps 30]

The active lane in normal use follows HJMETRIC_NO_NUMBA; here both lanes
are invoked explicitly so one process produces the comparison.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from hjmetric import GOLDEN_RATIO, HamiltonianSpec, PotentialSpec, TorusEnvironment, build_graph
from hjmetric import _kernels
from hjmetric.effective import _action_setup


def timed(fn, repeats=3):
    best = float("inf")
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench_shortest(half: float, h: float) -> None:
    env = TorusEnvironment.quasiperiodic_2d(lam=GOLDEN_RATIO, seed=1)
    spec = HamiltonianSpec(env=env, form="eikonal", potential=PotentialSpec("product_quasiperiodic"))
    omega = env.sample_omega(0)
    graph = build_graph(spec, [[-half, half], [-half, half]], h=h, stencil_radius=3, a=0.5, omega=omega)
    init = np.full(graph.n_nodes, np.inf)
    init[graph.point_node([0.0, 0.0])] = 0.0
    print(f"shortest paths: {graph.n_nodes} nodes x {graph.offsets.shape[0]} offsets")

    t_np, (d_np, _) = timed(lambda: _kernels.shortest_numpy(graph.weights, graph.steps, init))
    print(f"  numpy/scipy lane : {t_np:8.3f} s")
    if _kernels.USE_NUMBA:
        _kernels.shortest_numba(graph.weights, graph.steps, init)  # warm the JIT
        t_nb, (d_nb, _) = timed(lambda: _kernels.shortest_numba(graph.weights, graph.steps, init))
        gap = float(np.nanmax(np.abs(d_nb - d_np)))
        print(f"  numba lane       : {t_nb:8.3f} s   speedup x{t_np / t_nb:5.1f}   max |diff| {gap:.2e}")
    else:
        print("  numba lane       : unavailable (HJMETRIC_NO_NUMBA set or numba missing)")


def bench_value_iteration(half: float, h: float, sweeps: int) -> None:
    env = TorusEnvironment.quasiperiodic_2d(lam=GOLDEN_RATIO, seed=1)
    spec = HamiltonianSpec(env=env, form="eikonal", potential=PotentialSpec("product_quasiperiodic"))
    omega = env.sample_omega(0)
    box, shape, lo, pts, offsets, cost, on_limit = _action_setup(
        spec, [[-half, half], [-half, half]], h, 1.0, 4, omega
    )
    u0 = np.full(pts.shape[0], np.inf)
    u0[int(np.ravel_multi_index(tuple(int(round(-l / h)) for l in lo), shape))] = 0.0
    print(f"value iteration: {pts.shape[0]} nodes x {offsets.shape[0]} steps x {sweeps} sweeps")

    t_np, (u_np, _) = timed(
        lambda: _kernels.value_iter_numpy(cost, offsets, shape, on_limit, sweeps, u0), repeats=2
    )
    print(f"  numpy lane       : {t_np:8.3f} s")
    if _kernels.USE_NUMBA:
        _kernels.value_iter_numba(cost, offsets, shape, on_limit, 1, u0)  # warm the JIT
        t_nb, (u_nb, _) = timed(
            lambda: _kernels.value_iter_numba(cost, offsets, shape, on_limit, sweeps, u0), repeats=2
        )
        both = np.isfinite(u_np) & np.isfinite(u_nb)
        gap = float(np.max(np.abs(u_nb[both] - u_np[both]))) if both.any() else 0.0
        print(f"  numba lane       : {t_nb:8.3f} s   speedup x{t_np / t_nb:5.1f}   max |diff| {gap:.2e}")
    else:
        print("  numba lane       : unavailable (HJMETRIC_NO_NUMBA set or numba missing)")


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--half", type=float, default=8.0, help="box half width")
    parser.add_argument("--h", type=float, default=0.1, help="grid spacing")
    parser.add_argument("--sweeps", type=int, default=30, help="value iteration sweeps")
    args = parser.parse_args()
    bench_shortest(args.half, args.h)
    bench_value_iteration(args.half, args.h, args.sweeps)


if __name__ == "__main__":
    main()
