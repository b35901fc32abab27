"""Backend equivalence: the compiled kernels and the numpy fallback must
compute the same things, and the selected backend must be importable."""

import numpy as np
import pytest

from crbc import _kernels_py
from crbc import kernels
from crbc.assembly import assemble_stiffness
from crbc.mesh import structured_unit_square

compiled = pytest.importorskip("crbc._kernels", reason="compiled kernels not built")


def csr_data(n=6, seed=3):
    r = np.random.default_rng(seed)
    dense = r.standard_normal((n, n + 2))
    dense[r.random(dense.shape) < 0.5] = 0.0
    rows, cols = np.nonzero(dense)
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.add.at(offsets, rows + 1, 1)
    np.cumsum(offsets, out=offsets)
    return offsets, cols.astype(np.int64), dense[rows, cols], dense


def test_backend_reported():
    assert kernels.BACKEND in ("compiled", "python")


def test_csr_matvec_backends_agree():
    offsets, cols, vals, dense = csr_data()
    x = np.random.default_rng(1).standard_normal(dense.shape[1])
    yc = compiled.csr_matvec(offsets, cols, vals, x)
    yp = _kernels_py.csr_matvec(offsets, cols, vals, x)
    scale = max(np.abs(yc).max(), 1.0)
    assert np.abs(yc - yp).max() <= 1e-13 * scale
    assert np.abs(yc - dense @ x).max() <= 1e-13 * scale


def test_csr_matvec_empty_rows():
    # row 1 empty
    offsets = np.array([0, 1, 1, 2], dtype=np.int64)
    cols = np.array([0, 1], dtype=np.int64)
    vals = np.array([3.0, 4.0])
    x = np.array([1.0, 2.0])
    for impl in (compiled, _kernels_py):
        assert impl.csr_matvec(offsets, cols, vals, x).tolist() == [3.0, 0.0, 8.0]


def test_csr_matvec_on_stiffness(rng):
    A = assemble_stiffness(structured_unit_square(6))
    x = rng.standard_normal(A.n_cols)
    yc = compiled.csr_matvec(A.row_offsets, A.col_indices, A.values, x)
    yp = _kernels_py.csr_matvec(A.row_offsets, A.col_indices, A.values, x)
    assert np.abs(yc - yp).max() <= 1e-13 * np.abs(yc).max()


def brute_abs_integral(a, b, c, area, k=256):
    """Independent oracle: centroid rule on k^2 congruent sub-triangles.

    Exact wherever the zero line does not cross a sub-triangle; the crossed
    strip contributes O(1/k^2)."""
    total = 0.0
    sub_area = area / k ** 2
    for i in range(k):
        # cells (i, j) on the reference simplex: upward sub-triangle centroid
        # at ((i + 1/3)/k, (j + 1/3)/k), downward at ((i + 2/3)/k, (j + 2/3)/k)
        u = (i + 1.0 / 3.0) / k
        v = (np.arange(k - i) + 1.0 / 3.0) / k
        vals = a * (1.0 - u - v) + b * u + c * v
        total += np.abs(vals).sum() * sub_area
        if k - i - 1 > 0:
            u = (i + 2.0 / 3.0) / k
            v = (np.arange(k - i - 1) + 2.0 / 3.0) / k
            vals = a * (1.0 - u - v) + b * u + c * v
            total += np.abs(vals).sum() * sub_area
    return total


@pytest.mark.parametrize("tri_vals", [
    (1.0, 2.0, 3.0),        # all positive
    (-1.0, -2.0, -0.5),     # all negative
    (-1.0, 1.0, 1.0),       # one negative (basis-function shape)
    (-2.0, -1.0, 3.0),      # two negative
    (0.0, 0.0, 1.0),        # zero line through an edge
    (-1.0, 0.0, 1.0),       # zero vertex
])
def test_tri_abs_integral_against_subdivision(tri_vals):
    a, b, c = (np.array([v]) for v in tri_vals)
    area = np.array([0.7])
    expected = brute_abs_integral(tri_vals[0], tri_vals[1], tri_vals[2], 0.7)
    for impl in (compiled, _kernels_py):
        got = impl.tri_abs_integral(a, b, c, area)[0]
        assert got == pytest.approx(expected, abs=5e-4, rel=1e-3)


def test_tri_abs_integral_basis_function_closed_form():
    # vertex values (-1, 1, 1): integral of |phi| is area/2
    a = np.array([-1.0]); b = np.array([1.0]); c = np.array([1.0])
    area = np.array([0.35])
    for impl in (compiled, _kernels_py):
        assert impl.tri_abs_integral(a, b, c, area)[0] == pytest.approx(0.175, rel=1e-14)


def test_tri_abs_integral_backends_agree(rng):
    n = 500
    a, b, c = rng.standard_normal((3, n))
    area = rng.random(n) + 0.1
    yc = compiled.tri_abs_integral(a, b, c, area)
    yp = _kernels_py.tri_abs_integral(a, b, c, area)
    assert np.abs(yc - yp).max() <= 1e-13 * np.abs(yc).max()


def test_pure_python_env_selection():
    import subprocess, sys
    out = subprocess.run(
        [sys.executable, "-c",
         "import crbc.kernels as k; print(k.BACKEND)"],
        env={"CRBC_PURE_PYTHON": "1", "PATH": "/usr/bin:/bin"},
        capture_output=True, text=True)
    assert out.stdout.strip() == "python"
