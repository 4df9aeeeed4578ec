"""
Time the finite-difference weight kernels on graded meshes.

Compares the numba Fornberg kernel, its batched numpy twin (the path used
with ISOSHELL_DISABLE_NUMBA=1) and, for small meshes, the uncompiled
Fornberg loop.  Weights from the two main paths are checked to agree.

    python3 benchmarks/bench_stencils.py --sizes 500 2000 8000 --order 6
"""
import argparse
import time

import numpy as np

from isoshell import stencils
from isoshell._accel import ENABLE_NUMBA
from isoshell.hofid import Mesh, stencil_extent


def rows_for(nodes, p, nu):
    n = nodes.size - 1
    ext = [stencil_extent(i, n, p, nu) for i in range(1, n)]
    starts = np.array([i - s for i, (s, _) in zip(range(1, n), ext)])
    widths = np.array([s + r + 1 for s, r in ext])
    return starts, widths, nodes[1:n]


def best_of(func, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        func()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n\n")[1])
    parser.add_argument("--sizes", type=int, nargs="+", default=[500, 2000, 8000])
    parser.add_argument("--order", type=int, default=6)
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--python-limit", type=int, default=2000,
                        help="largest mesh timed with the uncompiled loop")
    args = parser.parse_args()
    if not ENABLE_NUMBA:
        parser.error("numba is disabled (ISOSHELL_DISABLE_NUMBA); nothing to compare")

    print(f"{'nodes':>7} {'nu':>3} {'numba [ms]':>11} {'numpy [ms]':>11} "
          f"{'python [ms]':>12} {'speedup':>8} {'max rel diff':>13}")
    for size in args.sizes:
        nodes = Mesh(np.linspace(0.0, 1.0, size) ** 2).nodes
        for nu in (1, 2):
            starts, widths, targets = rows_for(nodes, args.order, nu)
            call = lambda use: stencils.stencil_rows(nodes, starts, widths, targets, nu,
                                                     use_numba=use)
            a, b = call(True), call(False)   # also triggers compilation
            diff = np.max(np.abs(a - b)) / np.max(np.abs(b))
            t_jit = best_of(lambda: call(True), args.repeat)
            t_np = best_of(lambda: call(False), args.repeat)
            if size <= args.python_limit:
                out = np.zeros_like(a)
                t_py = best_of(lambda: stencils._fornberg_rows.py_func(
                    nodes, starts, widths, targets, nu, out), 1)
                py = f"{1e3 * t_py:12.2f}"
            else:
                py = f"{'-':>12}"
            print(f"{size:7d} {nu:3d} {1e3 * t_jit:11.3f} {1e3 * t_np:11.3f} {py} "
                  f"{t_np / t_jit:8.1f} {diff:13.2e}")


if __name__ == "__main__":
    main()
