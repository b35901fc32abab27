import numpy as np
import pytest

from crbc.assembly import (assemble_load, assemble_mass,
                           assemble_stiffness, dof_partition, mass_diagonal,
                           split)
from crbc.crfem import cr_interpolate, norms
from crbc.linalg import dense_cholesky_solve, spmv
from crbc.mesh import Mesh, structured_unit_square
from crbc.stateops import StateOperator


def unit_right_mesh():
    return Mesh([(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)], [(0, 1, 2)])


# -- stiffness -----------------------------------------------------------------

def test_local_stiffness_unit_right():
    # symbolic oracle: gradients (2,2), (-2,0), (0,-2) on the unit right
    # triangle give the local matrix [[4,-2,-2],[-2,2,0],[-2,0,2]] in the
    # (edge opposite v0, v1, v2) ordering; the global edge order is
    # (0,1), (0,2), (1,2) = local 2, 1, 0
    K = assemble_stiffness(unit_right_mesh()).to_dense()
    grads = np.array([[2.0, 2.0], [-2.0, 0.0], [0.0, -2.0]])
    local = 0.5 * grads @ grads.T
    perm = [2, 1, 0]
    expected = local[np.ix_(perm, perm)]
    assert np.allclose(K, expected, atol=1e-14)
    assert np.allclose(expected, [[2, 0, -2], [0, 2, -2], [-2, -2, 4]])


def test_stiffness_constants_in_kernel():
    K = assemble_stiffness(structured_unit_square(3))
    assert np.abs(spmv(K, np.ones(K.n_cols))).max() <= 1e-12


def test_stiffness_symmetric_flag():
    K = assemble_stiffness(structured_unit_square(2))
    assert K.symmetric


def test_interior_stiffness_is_spd():
    # oracle factorization: dense Cholesky succeeds on the interior block
    mesh = structured_unit_square(4)
    A_II, _ = split(assemble_stiffness(mesh), dof_partition(mesh))
    dense_cholesky_solve(A_II.to_dense(), np.ones(A_II.n_rows))


def test_affine_fields_discretely_harmonic():
    # interior rows of K @ dofs vanish for globally affine fields
    mesh = structured_unit_square(3)
    K = assemble_stiffness(mesh)
    part = dof_partition(mesh)
    v = cr_interpolate(lambda x, y: 3.0 * x - 2.0 * y + 1.0, mesh)
    residual = spmv(K, v.dof)[part.interior_ids]
    assert np.abs(residual).max() <= 1e-12


def test_galerkin_orthogonality(hier, rng):
    # discrete harmonic extensions annihilate the zero-trace subspace up to
    # the linear-solve residual
    mesh = hier[3]
    op = StateOperator(mesh, cg_tol=1e-12)
    u = rng.standard_normal(mesh.n_boundary_edges)
    w, _ = op.harmonic(u)
    K = op.stiffness
    Kw = spmv(K, w.dof)
    wh = norms(w)["H1_broken"]
    for _ in range(25):
        z = np.zeros(mesh.n_edges)
        z[op.partition.interior_ids] = rng.standard_normal(op.partition.n_interior)
        vh = np.sqrt(float(z @ spmv(K, z)))
        assert abs(float(z @ Kw)) <= 1e-9 * wh * vh


# -- mass ------------------------------------------------------------------------

def test_local_mass_unit_right():
    M = assemble_mass(unit_right_mesh()).to_dense()
    assert np.allclose(M, np.eye(3) / 6.0, atol=1e-15)


def test_mass_structurally_diagonal():
    M = assemble_mass(structured_unit_square(3))
    assert M.nnz == M.n_rows
    rows = np.repeat(np.arange(M.n_rows), np.diff(M.row_offsets))
    assert np.array_equal(rows, M.col_indices)


def test_mass_total_is_area():
    mesh = structured_unit_square(3)
    assert mass_diagonal(mesh).sum() == pytest.approx(1.0, rel=1e-14)


def test_mass_quadratic_form_constant():
    mesh = structured_unit_square(4)
    v = np.ones(mesh.n_edges)
    M = assemble_mass(mesh)
    assert float(v @ spmv(M, v)) == pytest.approx(1.0, rel=1e-13)


def test_mass_diagonal_formula():
    mesh = structured_unit_square(2)
    d = mass_diagonal(mesh)
    for e in range(mesh.n_edges):
        tris = mesh.edge_tris[e]
        expected = sum(mesh.areas[t] for t in tris if t >= 0) / 3.0
        assert d[e] == pytest.approx(expected, rel=1e-15)


# -- load -------------------------------------------------------------------------

def test_load_zero_field():
    mesh = structured_unit_square(2)
    b = assemble_load(lambda x, y: np.zeros(np.broadcast(x, y).shape), mesh)
    assert np.array_equal(b, np.zeros(mesh.n_edges))


def test_load_constant_matches_mass():
    mesh = structured_unit_square(3)
    b = assemble_load(lambda x, y: np.ones(np.broadcast(x, y).shape), mesh)
    assert np.abs(b - mass_diagonal(mesh)).max() <= 1e-14


def test_load_affine_closed_form():
    # symbolic oracle: integral of (a.x + c) phi_e over T is
    # area * (l(P_j) + l(P_k)) / 6 with P_j, P_k the endpoints of edge e
    def field(x, y):
        return 2.0 * x - 1.0 * y + 0.5

    for mesh in (unit_right_mesh(), structured_unit_square(2)):
        b = assemble_load(field, mesh)
        expected = np.zeros(mesh.n_edges)
        for t in range(mesh.n_triangles):
            for i in range(3):
                e = mesh.tri_edges[t, i]
                pj, pk = mesh.vertices[mesh.edges[e]]
                expected[e] += mesh.areas[t] * (field(*pj) + field(*pk)) / 6.0
        assert np.abs(b - expected).max() <= 1e-14 * max(np.abs(expected).max(), 1.0)


# -- partition and split -----------------------------------------------------------

def test_partition_exact_disjoint():
    mesh = structured_unit_square(3)
    part = dof_partition(mesh)
    assert part.n_interior + part.n_boundary == mesh.n_edges
    assert len(np.intersect1d(part.interior_ids, part.boundary_ids)) == 0
    assert np.array_equal(np.sort(np.concatenate([part.interior_ids,
                                                  part.boundary_ids])),
                          np.arange(mesh.n_edges))


def test_split_single_interior_edge():
    # the 1x1 mesh has one interior edge (the diagonal); its stiffness
    # diagonal entry is the sum of the two hypotenuse contributions, 4 each
    mesh = structured_unit_square(1)
    part = dof_partition(mesh)
    A_II, A_IB = split(assemble_stiffness(mesh), part)
    assert part.n_interior == 1
    assert A_II.to_dense().tolist() == [[8.0]]
    assert A_IB.n_cols == 4


def test_split_blocks_reproduce_entries():
    mesh = structured_unit_square(2)
    K = assemble_stiffness(mesh)
    part = dof_partition(mesh)
    A_II, A_IB = split(K, part)
    dense = K.to_dense()
    assert np.array_equal(A_II.to_dense(),
                          dense[np.ix_(part.interior_ids, part.interior_ids)])
    assert np.array_equal(A_IB.to_dense(),
                          dense[np.ix_(part.interior_ids, part.boundary_ids)])
    assert A_II.symmetric


def test_split_matches_dirichlet_elimination(rng):
    # zero boundary data: the split interior system equals the full system
    # with Dirichlet rows eliminated
    mesh = structured_unit_square(2)
    K = assemble_stiffness(mesh)
    part = dof_partition(mesh)
    A_II, _ = split(K, part)
    b = rng.standard_normal(mesh.n_edges)
    full = K.to_dense()
    full[part.boundary_ids, :] = 0.0
    full[:, part.boundary_ids] = 0.0
    full[part.boundary_ids, part.boundary_ids] = 1.0
    rhs = b.copy()
    rhs[part.boundary_ids] = 0.0
    x_full = np.linalg.solve(full, rhs)
    x_int = np.linalg.solve(A_II.to_dense(), b[part.interior_ids])
    assert np.allclose(x_full[part.interior_ids], x_int, atol=1e-12)


def test_split_size_mismatch():
    mesh = structured_unit_square(2)
    part = dof_partition(mesh)
    other = assemble_stiffness(structured_unit_square(3))
    with pytest.raises(ValueError, match="partition"):
        split(other, part)
