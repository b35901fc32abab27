import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crbc.assembly import assemble_stiffness, dof_partition, split
from crbc.linalg import (ConvergenceError, NotSPDError, SparseMatrix, cg_solve,
                         dense_cholesky_solve, spmv)
from crbc.mesh import structured_unit_square


def dense_to_csr(A, symmetric=False):
    A = np.asarray(A, float)
    rows, cols = np.nonzero(A)
    return SparseMatrix.from_coo(A.shape[0], A.shape[1], rows, cols,
                                 A[rows, cols], symmetric=symmetric)


def interior_stiffness(n):
    mesh = structured_unit_square(n)
    A_II, _ = split(assemble_stiffness(mesh), dof_partition(mesh))
    return A_II


# -- SparseMatrix -----------------------------------------------------------

def test_from_coo_merges_duplicates():
    A = SparseMatrix.from_coo(2, 2, [0, 0, 1], [1, 1, 0], [2.0, 3.0, 4.0])
    assert A.nnz == 2
    assert A.to_dense().tolist() == [[0.0, 5.0], [4.0, 0.0]]


def test_column_order_enforced():
    with pytest.raises(ValueError, match="strictly increasing"):
        SparseMatrix(1, 3, [0, 2], [1, 1], [1.0, 2.0])


def test_symmetry_flag_checked():
    with pytest.raises(ValueError, match="asymmetric"):
        dense_to_csr([[1.0, 2.0], [3.0, 1.0]], symmetric=True)
    dense_to_csr([[1.0, 2.0], [2.0, 1.0]], symmetric=True)  # passes


def test_diagonal():
    A = dense_to_csr([[2.0, 1.0], [0.0, 5.0]])
    assert A.diagonal().tolist() == [2.0, 5.0]


# -- spmv --------------------------------------------------------------------

def test_spmv_identity(rng):
    A = dense_to_csr(np.eye(7))
    x = rng.standard_normal(7)
    assert np.array_equal(spmv(A, x), x)


def test_spmv_row_sums():
    A = dense_to_csr([[2.0, -1.0], [-1.0, 2.0]], symmetric=True)
    assert spmv(A, np.array([1.0, 1.0])).tolist() == [1.0, 1.0]


def test_spmv_symmetry_pairing(rng):
    A = interior_stiffness(4)
    x = rng.standard_normal(A.n_cols)
    y = rng.standard_normal(A.n_cols)
    lhs = float(spmv(A, x) @ y)
    rhs = float(x @ spmv(A, y))
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1.0)


def test_spmv_dimension_mismatch():
    A = dense_to_csr(np.eye(3))
    with pytest.raises(ValueError, match="mismatch"):
        spmv(A, np.ones(4))


def test_spmv_matches_dense(rng):
    dense = rng.standard_normal((6, 4))
    dense[rng.random((6, 4)) < 0.4] = 0.0
    A = dense_to_csr(dense)
    x = rng.standard_normal(4)
    assert np.allclose(spmv(A, x), dense @ x, atol=1e-14)


# -- cg_solve ----------------------------------------------------------------

def test_cg_zero_rhs():
    A = dense_to_csr(np.diag([1.0, 2.0]), symmetric=True)
    result = cg_solve(A, np.zeros(2))
    assert result.iterations == 0
    assert np.array_equal(result.x, np.zeros(2))


def test_cg_diagonal_solve():
    A = dense_to_csr(np.diag(np.arange(1.0, 6.0)), symmetric=True)
    result = cg_solve(A, np.ones(5), tol=1e-12)
    assert np.allclose(result.x, 1.0 / np.arange(1.0, 6.0), rtol=1e-10)


def test_cg_residual_recomputed(rng):
    # independent oracle: recompute the residual with spmv
    A = interior_stiffness(8)
    b = rng.standard_normal(A.n_rows)
    result = cg_solve(A, b, tol=1e-10)
    res = np.linalg.norm(b - spmv(A, result.x))
    assert res <= 1e-10 * np.linalg.norm(b)
    assert result.residual == pytest.approx(res, rel=1e-6)


def test_cg_warm_start(rng):
    A = interior_stiffness(4)
    b = rng.standard_normal(A.n_rows)
    exact = cg_solve(A, b, tol=1e-12)
    warm = cg_solve(A, b, tol=1e-10, x0=exact.x)
    assert warm.iterations == 0


def test_cg_nonconvergence_reports_residual(rng):
    A = interior_stiffness(4)
    b = rng.standard_normal(A.n_rows)
    with pytest.raises(ConvergenceError) as err:
        cg_solve(A, b, tol=1e-14, max_iter=2)
    assert err.value.residual > 0
    assert err.value.iterations == 2


def test_cg_zero_diagonal():
    A = dense_to_csr([[0.0, 1.0], [1.0, 0.0]], symmetric=True)
    with pytest.raises(NotSPDError, match="diagonal"):
        cg_solve(A, np.ones(2))


@settings(deadline=None, max_examples=25)
@given(st.integers(2, 8), st.integers(0, 10 ** 6))
def test_cg_matches_dense_solve(n, seed):
    r = np.random.default_rng(seed)
    B = r.standard_normal((n, n))
    dense = B @ B.T + n * np.eye(n)
    A = dense_to_csr(dense, symmetric=True)
    b = r.standard_normal(n)
    result = cg_solve(A, b, tol=1e-13)
    assert np.allclose(result.x, np.linalg.solve(dense, b), rtol=1e-7, atol=1e-9)


def test_cg_iteration_growth_bounded():
    # iterations grow no faster than O(1/h) across three refinements:
    # consecutive ratios <= 2.6; the rhs excites all modes so the counts are
    # in the asymptotic regime (tiny systems are dimension-capped)
    iters = []
    for n in (8, 16, 32, 64):
        A = interior_stiffness(n)
        b = np.random.default_rng(1).standard_normal(A.n_rows)
        iters.append(cg_solve(A, b, tol=1e-10).iterations)
    for a, c in zip(iters, iters[1:]):
        assert c / a <= 2.6, iters


# -- dense_cholesky_solve ------------------------------------------------------

def test_cholesky_1x1():
    assert dense_cholesky_solve(np.array([[4.0]]), np.array([2.0]))[0] == pytest.approx(0.5)


def test_cholesky_hilbert():
    # b built from the known solution: x = ones
    n = 4
    H = np.array([[1.0 / (i + j + 1) for j in range(n)] for i in range(n)])
    x = dense_cholesky_solve(H, H @ np.ones(n))
    assert np.allclose(x, 1.0, atol=1e-8)


def test_cholesky_not_spd():
    with pytest.raises(NotSPDError, match="pivot"):
        dense_cholesky_solve(np.array([[1.0, 2.0], [2.0, 1.0]]), np.ones(2))


def test_cholesky_cap():
    with pytest.raises(ValueError, match="cap"):
        dense_cholesky_solve(np.eye(11), np.ones(11), max_dim=10)


def test_cholesky_asymmetric_rejected():
    with pytest.raises(ValueError, match="symmetric"):
        dense_cholesky_solve(np.array([[1.0, 0.5], [0.0, 1.0]]), np.ones(2))


def test_cg_agrees_with_cholesky(rng):
    # the dual-route invariant on interior stiffness systems up to the cap
    for n in (4, 8, 16):
        A = interior_stiffness(n)
        assert A.n_rows <= 2000
        b = rng.standard_normal(A.n_rows)
        x_cg = cg_solve(A, b, tol=1e-12).x
        x_ch = dense_cholesky_solve(A.to_dense(), b)
        denom = np.linalg.norm(x_ch)
        assert np.linalg.norm(x_cg - x_ch) <= 1e-8 * denom
