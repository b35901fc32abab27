# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops.

Two kernels dominate the runtime of the solvers and studies: the CSR
matrix-vector product inside conjugate gradients, and the exact triangle
integrals of |v| for piecewise-affine v (sign-subdivision).  Both have a
numpy twin in ``_kernels_py`` with identical semantics.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def csr_matvec(const cnp.int64_t[::1] row_offsets,
               const cnp.int64_t[::1] col_indices,
               const cnp.float64_t[::1] values,
               const cnp.float64_t[::1] x):
    """y = A @ x for CSR data; per-row accumulation is strictly left-to-right."""
    cdef Py_ssize_t n = row_offsets.shape[0] - 1
    out_arr = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef Py_ssize_t i
    cdef cnp.int64_t j
    cdef double acc
    for i in range(n):
        acc = 0.0
        for j in range(row_offsets[i], row_offsets[i + 1]):
            acc += values[j] * x[col_indices[j]]
        out[i] = acc
    return out_arr


def tri_abs_integral(const cnp.float64_t[::1] va,
                     const cnp.float64_t[::1] vb,
                     const cnp.float64_t[::1] vc,
                     const cnp.float64_t[::1] area):
    """Per-triangle integral of |v| for affine v with vertex values (va, vb, vc).

    The affine function is split along its zero line, so the result is exact
    up to roundoff (no quadrature of the kink).
    """
    cdef Py_ssize_t n = va.shape[0]
    out_arr = np.empty(n, dtype=np.float64)
    cdef cnp.float64_t[::1] out = out_arr
    cdef Py_ssize_t i
    cdef double a, b, c, t, s, A
    for i in range(n):
        a = va[i]
        b = vb[i]
        c = vc[i]
        # sort a <= b <= c
        if a > b:
            t = a; a = b; b = t
        if b > c:
            t = b; b = c; c = t
        if a > b:
            t = a; a = b; b = t
        A = area[i]
        s = a + b + c
        if a >= 0.0:
            out[i] = A * s / 3.0
        elif c <= 0.0:
            out[i] = -A * s / 3.0
        elif b >= 0.0:
            # one negative vertex: negative cap similar to the full triangle
            out[i] = A * s / 3.0 - 2.0 * A * a * a * a / (3.0 * (a - b) * (a - c))
        else:
            # two negative vertices: positive cap at the c corner
            out[i] = 2.0 * A * c * c * c / (3.0 * (c - a) * (c - b)) - A * s / 3.0
    return out_arr
