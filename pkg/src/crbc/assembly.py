"""Assembly of the broken bilinear forms and load vectors on edge DOFs.

The stiffness matrix carries the elementwise gradient inner product, the
mass matrix is diagonal by the midpoint-basis orthogonality, and load
vectors against a general field use a fixed 6-point degree-4 triangle rule
so that data errors stay well below every rate studied.  Assembly order is
triangle-major and deterministic.
"""

from __future__ import annotations

import numpy as np

from .crfem import basis_gradients
from .linalg import SparseMatrix

__all__ = [
    "DofPartition",
    "dof_partition",
    "assemble_stiffness",
    "assemble_mass",
    "mass_diagonal",
    "assemble_load",
    "split",
    "triangle_quadrature",
    "TRI_QUAD_BARY",
    "TRI_QUAD_WEIGHTS",
    "TRI_QUAD_PHI",
]

# 6-point degree-4 rule on the reference triangle (barycentric nodes and
# weights normalized to sum to 1; multiply by the triangle area).  The second
# weight is slaved to the first so constants integrate exactly.
_QW1 = 0.109951743655322
_QA = 0.816847572980459
_QB = 0.091576213509771
_QC = 0.108103018168070
_QD = 0.445948490915965
TRI_QUAD_BARY = np.array([
    [_QA, _QB, _QB],
    [_QB, _QA, _QB],
    [_QB, _QB, _QA],
    [_QC, _QD, _QD],
    [_QD, _QC, _QD],
    [_QD, _QD, _QC],
])
TRI_QUAD_WEIGHTS = np.array([_QW1] * 3 + [1.0 / 3.0 - _QW1] * 3)
TRI_QUAD_BARY.flags.writeable = False
TRI_QUAD_WEIGHTS.flags.writeable = False

#: basis values phi_i = 1 - 2 lam_i at the quadrature nodes, (6, 3)
TRI_QUAD_PHI = 1.0 - 2.0 * TRI_QUAD_BARY
TRI_QUAD_PHI.flags.writeable = False


class DofPartition:
    """Interior/boundary split of the edge DOFs.

    ``interior_ids`` are in increasing global order, ``boundary_ids`` follow
    the boundary loop; ``interior_pos``/``boundary_pos`` map a global edge id
    to its position in the respective block (-1 if absent).
    """

    __slots__ = ("interior_ids", "boundary_ids", "interior_pos", "boundary_pos")

    def __init__(self, mesh):
        ne = mesh.n_edges
        self.boundary_ids = mesh.boundary_edge_ids.copy()
        self.interior_ids = np.nonzero(mesh.boundary_pos < 0)[0]
        self.interior_pos = np.full(ne, -1, dtype=np.int64)
        self.interior_pos[self.interior_ids] = np.arange(len(self.interior_ids))
        self.boundary_pos = mesh.boundary_pos.copy()
        if len(self.interior_ids) + len(self.boundary_ids) != ne:
            raise ValueError("partition does not cover all edges")
        for arr in (self.interior_ids, self.boundary_ids,
                    self.interior_pos, self.boundary_pos):
            arr.flags.writeable = False

    @property
    def n_interior(self):
        return len(self.interior_ids)

    @property
    def n_boundary(self):
        return len(self.boundary_ids)


def dof_partition(mesh):
    return DofPartition(mesh)


def assemble_stiffness(mesh):
    """Elementwise gradient-product matrix over all edge DOFs (symmetric).

    The local 3x3 block is area * grad(phi_i) . grad(phi_j), exact since the
    gradients are constant.
    """
    g = basis_gradients(mesh)  # (nt, 3, 2)
    local = np.einsum("tid,tjd->tij", g, g) * mesh.areas[:, None, None]
    te = mesh.tri_edges
    rows = np.repeat(te, 3, axis=1).ravel()          # i-major within a triangle
    cols = np.tile(te, (1, 3)).ravel()
    return SparseMatrix.from_coo(mesh.n_edges, mesh.n_edges,
                                 rows, cols, local.ravel(), symmetric=True)


def mass_diagonal(mesh):
    """Diagonal of the mass matrix: M_ee = (1/3) sum of incident areas."""
    d = np.zeros(mesh.n_edges)
    np.add.at(d, mesh.tri_edges.ravel(),
              np.repeat(mesh.areas / 3.0, 3))
    return d


def assemble_mass(mesh):
    """Mass matrix; diagonal because the local block is (area/3) * identity."""
    d = mass_diagonal(mesh)
    ne = mesh.n_edges
    return SparseMatrix(ne, ne, np.arange(ne + 1, dtype=np.int64),
                        np.arange(ne, dtype=np.int64), d, symmetric=True)


def triangle_quadrature(mesh):
    """Physical quadrature points (nt, 6, 2) and weights (nt, 6) of the fixed
    degree-4 rule; weights include the triangle areas."""
    p = mesh.vertices[mesh.triangles]  # (nt, 3, 2)
    points = np.einsum("qi,tid->tqd", TRI_QUAD_BARY, p)
    weights = mesh.areas[:, None] * TRI_QUAD_WEIGHTS[None, :]
    return points, weights


def assemble_load(f, mesh, quad=None):
    """Load vector b_e = integral of f * phi_e by the degree-4 rule.

    ``f`` must accept numpy arrays ``(x, y)``.  ``quad`` may carry the output
    of :func:`triangle_quadrature` to avoid recomputation.
    """
    points, weights = triangle_quadrature(mesh) if quad is None else quad
    fvals = np.asarray(f(points[..., 0], points[..., 1]), dtype=np.float64)
    if fvals.shape != weights.shape:
        fvals = np.broadcast_to(fvals, weights.shape)
    contrib = np.einsum("tq,qi->ti", weights * fvals, TRI_QUAD_PHI)
    b = np.zeros(mesh.n_edges)
    np.add.at(b, mesh.tri_edges.ravel(), contrib.ravel())
    return b


def split(A, partition):
    """Interior-interior and interior-boundary blocks of a global matrix.

    Returns (A_II, A_IB); A_IB columns follow the boundary-loop order.  The
    blocks reproduce the original entries exactly.
    """
    n = A.n_rows
    if A.n_cols != n or n != len(partition.interior_pos):
        raise ValueError("matrix size does not match the partition")
    rows = np.repeat(np.arange(n, dtype=np.int64), np.diff(A.row_offsets))
    cols = A.col_indices
    row_int = partition.interior_pos[rows]
    col_int = partition.interior_pos[cols]
    col_bdy = partition.boundary_pos[cols]

    in_rows = row_int >= 0
    mask_ii = in_rows & (col_int >= 0)
    mask_ib = in_rows & (col_bdy >= 0)
    n_i = partition.n_interior
    n_b = partition.n_boundary
    A_II = SparseMatrix.from_coo(n_i, n_i, row_int[mask_ii], col_int[mask_ii],
                                 A.values[mask_ii],
                                 symmetric=A.symmetric)
    A_IB = SparseMatrix.from_coo(n_i, n_b, row_int[mask_ib], col_bdy[mask_ib],
                                 A.values[mask_ib])
    return A_II, A_IB
