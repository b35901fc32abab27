"""Minimal sparse/dense linear algebra for the edge-DOF systems.

Hand-built symmetric CSR storage and a Jacobi-preconditioned conjugate
gradient solver cover the SPD interior systems; a dense Cholesky path
(LAPACK via scipy) serves as the machine-precision oracle at small sizes.
"""

from __future__ import annotations

from collections import namedtuple

import numpy as np
import scipy.linalg

from . import kernels

__all__ = [
    "SparseMatrix",
    "spmv",
    "cg_solve",
    "dense_cholesky_solve",
    "CgResult",
    "ConvergenceError",
    "NotSPDError",
]

#: dense_cholesky_solve refuses systems larger than this by default
DENSE_ORACLE_CAP = 2000


class ConvergenceError(RuntimeError):
    """Iterative solver failed to reach its tolerance."""

    def __init__(self, message, iterations=None, residual=None):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class NotSPDError(ValueError):
    """A matrix required to be SPD is not (certified by a pivot failure)."""


CgResult = namedtuple("CgResult", ["x", "iterations", "residual"])


class SparseMatrix:
    """Compressed-sparse-row matrix with strictly increasing column indices.

    Instances are immutable after construction.  When ``symmetric=True`` the
    constructor verifies structural and numerical symmetry
    (max |A_ij - A_ji| <= 1e-13 max|A|).
    """

    __slots__ = ("n_rows", "n_cols", "row_offsets", "col_indices", "values",
                 "symmetric")

    def __init__(self, n_rows, n_cols, row_offsets, col_indices, values,
                 symmetric=False):
        row_offsets = np.ascontiguousarray(row_offsets, dtype=np.int64)
        col_indices = np.ascontiguousarray(col_indices, dtype=np.int64)
        values = np.ascontiguousarray(values, dtype=np.float64)
        if len(row_offsets) != n_rows + 1:
            raise ValueError("row_offsets must have n_rows + 1 entries")
        if row_offsets[0] != 0 or np.any(np.diff(row_offsets) < 0):
            raise ValueError("row_offsets must start at 0 and be nondecreasing")
        nnz = int(row_offsets[-1])
        if len(col_indices) != nnz or len(values) != nnz:
            raise ValueError("col_indices/values length must match row_offsets[-1]")
        if nnz and (col_indices.min() < 0 or col_indices.max() >= n_cols):
            raise ValueError("column index out of range")
        rows = np.repeat(np.arange(n_rows, dtype=np.int64), np.diff(row_offsets))
        if nnz > 1:
            same_row = rows[1:] == rows[:-1]
            if np.any(np.diff(col_indices)[same_row] <= 0):
                raise ValueError("column indices must be strictly increasing "
                                 "within each row")
        self.n_rows = int(n_rows)
        self.n_cols = int(n_cols)
        self.row_offsets = row_offsets
        self.col_indices = col_indices
        self.values = values
        self.symmetric = bool(symmetric)
        for arr in (self.row_offsets, self.col_indices, self.values):
            arr.flags.writeable = False
        if self.symmetric:
            self._check_symmetric()

    @classmethod
    def from_coo(cls, n_rows, n_cols, rows, cols, vals, symmetric=False):
        """Build CSR from triplets; duplicates are merged in input order."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=np.float64)
        order = np.lexsort((cols, rows))  # stable: duplicates keep input order
        rows, cols, vals = rows[order], cols[order], vals[order]
        if len(rows):
            first = np.ones(len(rows), dtype=bool)
            first[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.nonzero(first)[0]
            merged = np.add.reduceat(vals, starts)
            rows, cols, vals = rows[first], cols[first], merged
        row_offsets = np.zeros(n_rows + 1, dtype=np.int64)
        np.add.at(row_offsets, rows + 1, 1)
        np.cumsum(row_offsets, out=row_offsets)
        return cls(n_rows, n_cols, row_offsets, cols, vals, symmetric=symmetric)

    @property
    def nnz(self):
        return len(self.values)

    def _check_symmetric(self):
        if self.n_rows != self.n_cols:
            raise ValueError("symmetric flag on a non-square matrix")
        rows = np.repeat(np.arange(self.n_rows, dtype=np.int64),
                         np.diff(self.row_offsets))
        order = np.lexsort((rows, self.col_indices))
        t_rows = self.col_indices[order]
        t_cols = rows[order]
        if not (np.array_equal(t_rows, rows) and
                np.array_equal(t_cols, self.col_indices)):
            raise ValueError("matrix flagged symmetric is structurally "
                             "asymmetric")
        scale = np.abs(self.values).max() if self.nnz else 0.0
        if self.nnz and np.abs(self.values[order] - self.values).max() > 1e-13 * scale:
            raise ValueError("matrix flagged symmetric is numerically "
                             "asymmetric beyond 1e-13 * max|A|")

    def diagonal(self):
        d = np.zeros(min(self.n_rows, self.n_cols), dtype=np.float64)
        rows = np.repeat(np.arange(self.n_rows, dtype=np.int64),
                         np.diff(self.row_offsets))
        hit = rows == self.col_indices
        d[rows[hit]] = self.values[hit]
        return d

    def to_dense(self):
        out = np.zeros((self.n_rows, self.n_cols))
        rows = np.repeat(np.arange(self.n_rows, dtype=np.int64),
                         np.diff(self.row_offsets))
        out[rows, self.col_indices] = self.values
        return out

    def __repr__(self):
        return (f"SparseMatrix({self.n_rows}x{self.n_cols}, nnz={self.nnz}, "
                f"symmetric={self.symmetric})")


def spmv(A, x):
    """A @ x with a fixed per-row summation order (deterministic)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (A.n_cols,):
        raise ValueError(f"dimension mismatch: matrix is {A.n_rows}x{A.n_cols}, "
                         f"vector has shape {x.shape}")
    return kernels.csr_matvec(A.row_offsets, A.col_indices, A.values, x)


def cg_solve(A, b, tol=1e-10, max_iter=None, x0=None):
    """Jacobi-preconditioned conjugate gradients for SPD systems.

    Stops when ||b - A x||_2 <= tol ||b||_2.  Deterministic given inputs.

    Returns
    -------
    CgResult
        Fields ``x``, ``iterations``, ``residual``.

    Raises
    ------
    ConvergenceError
        After ``max_iter`` iterations above tolerance (the final residual is
        attached).
    NotSPDError
        On a zero diagonal entry (Jacobi preconditioner undefined).
    """
    b = np.asarray(b, dtype=np.float64)
    if A.n_rows != A.n_cols or b.shape != (A.n_rows,):
        raise ValueError("cg_solve needs a square matrix and a matching vector")
    if tol <= 0.0:
        raise ValueError("tol must be positive")
    n = A.n_rows
    if max_iter is None:
        max_iter = 10 * n + 100

    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return CgResult(np.zeros(n), 0, 0.0)

    diag = A.diagonal()
    if np.any(diag == 0.0):
        raise NotSPDError("zero diagonal entry; Jacobi preconditioner undefined")

    if x0 is None:
        x = np.zeros(n)
        r = b.copy()
    else:
        x = np.array(x0, dtype=np.float64)
        r = b - spmv(A, x)
    res = np.linalg.norm(r)
    if res <= tol * norm_b:
        return CgResult(x, 0, float(res))

    z = r / diag
    p = z.copy()
    rz = float(r @ z)
    for k in range(1, max_iter + 1):
        Ap = spmv(A, p)
        alpha = rz / float(p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        res = np.linalg.norm(r)
        if res <= tol * norm_b:
            return CgResult(x, k, float(res))
        z = r / diag
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError(
        f"CG did not converge in {max_iter} iterations "
        f"(relative residual {res / norm_b:.3e})",
        iterations=max_iter, residual=float(res))


def dense_cholesky_solve(A, b, max_dim=DENSE_ORACLE_CAP):
    """Solve an SPD dense system by Cholesky factorization (oracle path).

    Raises NotSPDError if a pivot fails (certifies non-SPD input) and
    ValueError above the size cap.
    """
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    n = A.shape[0]
    if n > max_dim:
        raise ValueError(f"dimension {n} exceeds the dense oracle cap {max_dim}")
    if b.shape != (n,):
        raise ValueError("right-hand side has wrong length")
    scale = max(np.abs(A).max(), 1.0)
    if np.abs(A - A.T).max() > 1e-12 * scale:
        raise ValueError("matrix is not symmetric")
    try:
        factor = scipy.linalg.cho_factor(A, lower=True, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise NotSPDError(f"Cholesky pivot failure: {exc}") from exc
    return scipy.linalg.cho_solve(factor, b, check_finite=False)
