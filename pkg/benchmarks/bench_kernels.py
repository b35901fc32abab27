"""Benchmark the compiled kernels against the pure-numpy fallback.

Times the CSR matrix-vector product (the conjugate-gradient inner loop) and
the exact |v| triangle integrals (the L1 norms of the lifting study) on a
sequence of mesh levels, plus one end-to-end interior solve.

Run:  python benchmarks/bench_kernels.py [max_level]
"""

import sys
import time

import numpy as np

from crbc import _kernels_py
from crbc.assembly import assemble_stiffness, dof_partition, split
from crbc.crfem import CRFunction, tri_vertex_values
from crbc.linalg import cg_solve
from crbc.mesh import refine_uniform, structured_unit_square

try:
    from crbc import _kernels
except ImportError:
    _kernels = None


def timeit(fn, *args, repeat=5):
    best = np.inf
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(max_level=7):
    if _kernels is None:
        print("compiled kernels unavailable; showing fallback timings only")
    backends = [("python", _kernels_py)]
    if _kernels is not None:
        backends.insert(0, ("compiled", _kernels))

    mesh = structured_unit_square(2)
    meshes = [mesh]
    for _ in range(max_level - 1):
        meshes.append(refine_uniform(meshes[-1]))

    rng = np.random.default_rng(0)
    print(f"{'level':>5} {'edges':>8} {'kernel':>22} "
          f"{'compiled':>12} {'python':>12} {'speedup':>8}")
    for level, m in enumerate(meshes[2:], start=3):
        A = assemble_stiffness(m)
        x = rng.standard_normal(m.n_edges)
        times = {}
        results = {}
        for name, impl in backends:
            times[name], results[name] = timeit(
                impl.csr_matvec, A.row_offsets, A.col_indices, A.values, x)
        _report(level, m.n_edges, "csr_matvec", times, results)

        v = CRFunction(m, rng.standard_normal(m.n_edges))
        vv = tri_vertex_values(v)
        a = np.ascontiguousarray(vv[:, 0])
        b = np.ascontiguousarray(vv[:, 1])
        c = np.ascontiguousarray(vv[:, 2])
        times = {}
        results = {}
        for name, impl in backends:
            times[name], results[name] = timeit(
                impl.tri_abs_integral, a, b, c, m.areas)
        _report(level, m.n_edges, "tri_abs_integral", times, results)

    # end-to-end: one interior stiffness solve on the finest level
    m = meshes[-1]
    A_II, _ = split(assemble_stiffness(m), dof_partition(m))
    b = rng.standard_normal(A_II.n_rows)
    t0 = time.perf_counter()
    result = cg_solve(A_II, b, tol=1e-10)
    dt = time.perf_counter() - t0
    print(f"\ninterior CG solve on level {max_level} "
          f"({A_II.n_rows} DOFs): {result.iterations} iterations, {dt:.2f} s "
          f"[{_active_backend()} backend]")


def _active_backend():
    from crbc.kernels import BACKEND
    return BACKEND


def _report(level, n_edges, kernel, times, results):
    if len(results) == 2:
        a, b = results["compiled"], results["python"]
        scale = max(np.abs(a).max(), 1e-300)
        assert np.abs(a - b).max() <= 1e-12 * scale, "backend mismatch"
    tc = times.get("compiled")
    tp = times.get("python")
    speedup = f"{tp / tc:8.1f}" if tc and tp else "     n/a"
    fmt = lambda t: f"{t * 1e3:10.3f}ms" if t is not None else "       n/a"
    print(f"{level:>5} {n_edges:>8} {kernel:>22} {fmt(tc):>12} {fmt(tp):>12} {speedup}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 7)
