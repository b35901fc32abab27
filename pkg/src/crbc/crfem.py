"""Edge-midpoint nonconforming (Crouzeix-Raviart) space machinery.

A CRFunction is piecewise affine with one coefficient per edge, the value at
the edge midpoint; traces of neighbouring triangles agree at midpoints only,
so jumps have zero edge mean.  A BoundaryControl is piecewise constant on
the boundary edges, optionally with box bounds.

All operations are pure given the immutable mesh and coefficient arrays.
"""

from __future__ import annotations

import warnings

import numpy as np

from . import kernels

__all__ = [
    "CRFunction",
    "BoundaryControl",
    "local_basis",
    "basis_gradients",
    "cr_interpolate",
    "p0_project",
    "boundary_lifting",
    "trace_midpoint_values",
    "normal_derivative",
    "boundary_normal_derivatives",
    "jump_integral",
    "mean_trace",
    "tri_vertex_values",
    "evaluate_in_triangles",
    "norms",
    "boundary_norms",
]

#: offset of the 2-point Gauss nodes from an edge midpoint, in units of the
#: edge vector (degree-3 exact along the edge)
_GAUSS_OFFSET = 0.5 / np.sqrt(3.0)


class CRFunction:
    """Member of the edge-midpoint space: ``dof[e]`` is the value at the
    midpoint of edge ``e``."""

    __slots__ = ("mesh", "dof")

    def __init__(self, mesh, dof):
        dof = np.ascontiguousarray(dof, dtype=np.float64)
        if dof.shape != (mesh.n_edges,):
            raise ValueError(f"expected {mesh.n_edges} edge coefficients, "
                             f"got shape {dof.shape}")
        self.mesh = mesh
        self.dof = dof

    def copy(self):
        return CRFunction(self.mesh, self.dof.copy())

    def __repr__(self):
        return f"CRFunction(ne={len(self.dof)}, |dof|_max={np.abs(self.dof).max():.4g})"


class BoundaryControl:
    """Piecewise-constant boundary data: one value per boundary edge, in
    boundary-loop order, with optional box bounds (ua, ub)."""

    __slots__ = ("mesh", "value", "bounds")

    def __init__(self, mesh, value, bounds=None):
        value = np.ascontiguousarray(value, dtype=np.float64)
        nb = mesh.n_boundary_edges
        if value.shape != (nb,):
            raise ValueError(f"expected {nb} boundary values, got shape {value.shape}")
        if bounds is not None:
            ua, ub = float(bounds[0]), float(bounds[1])
            if not ua < ub:
                raise ValueError(f"invalid bounds: ua={ua} must be < ub={ub}")
            if not (ua < 0.0 < ub):
                warnings.warn(f"bounds ({ua}, {ub}) do not straddle zero",
                              UserWarning, stacklevel=2)
            if np.any(value < ua) or np.any(value > ub):
                raise ValueError("boundary values violate the box bounds")
            bounds = (ua, ub)
        self.mesh = mesh
        self.value = value
        self.bounds = bounds

    def copy(self):
        return BoundaryControl(self.mesh, self.value.copy(), self.bounds)

    def __repr__(self):
        return (f"BoundaryControl(nb={len(self.value)}, bounds={self.bounds})")


def local_basis(coords, lam):
    """Values and gradients of the three edge-midpoint basis functions.

    Parameters
    ----------
    coords : (3, 2) array
        Triangle vertices, counter-clockwise.
    lam : (3,) array
        Barycentric point (nonnegative, summing to 1).

    Returns
    -------
    values : (3,) array
        phi_i = 1 - 2 lam_i (basis function of the edge opposite vertex i).
    grads : (3, 2) array
        Constant gradients.
    """
    coords = np.asarray(coords, dtype=np.float64)
    lam = np.asarray(lam, dtype=np.float64)
    if lam.shape != (3,) or np.any(lam < -1e-14) or abs(lam.sum() - 1.0) > 1e-12:
        raise ValueError("lam must be barycentric: nonnegative, summing to 1")
    d1 = coords[1] - coords[0]
    d2 = coords[2] - coords[0]
    twice_area = d1[0] * d2[1] - d1[1] * d2[0]
    if twice_area <= 0.0:
        raise ValueError("degenerate or clockwise triangle")
    values = 1.0 - 2.0 * lam
    grads = np.empty((3, 2))
    for i in range(3):
        d = coords[(i + 2) % 3] - coords[(i + 1) % 3]
        grads[i] = -2.0 * np.array([-d[1], d[0]]) / twice_area
    return values, grads


def basis_gradients(mesh):
    """Gradients of the three local basis functions on every triangle:
    (nt, 3, 2) array, row i for the edge opposite local vertex i."""
    p = mesh.vertices[mesh.triangles]
    g = np.empty((mesh.n_triangles, 3, 2))
    twice_area = 2.0 * mesh.areas
    for i in range(3):
        d = p[:, (i + 2) % 3] - p[:, (i + 1) % 3]
        g[:, i, 0] = 2.0 * d[:, 1] / twice_area
        g[:, i, 1] = -2.0 * d[:, 0] / twice_area
    return g


def _edge_gauss_points(mesh, edge_ids):
    ev = mesh.vertices[mesh.edges[edge_ids]]
    mid = (ev[:, 0] + ev[:, 1]) / 2.0
    half = (ev[:, 1] - ev[:, 0]) * _GAUSS_OFFSET
    return mid - half, mid + half


def cr_interpolate(f, mesh):
    """Interpolate a pointwise-evaluable field: dof_e = mean of f over edge e,
    by 2-point Gauss quadrature (exact for cubics along the edge).

    ``f`` must accept numpy arrays ``(x, y)`` and return finite values.
    """
    p1, p2 = _edge_gauss_points(mesh, np.arange(mesh.n_edges))
    vals = 0.5 * (np.asarray(f(p1[:, 0], p1[:, 1]), dtype=np.float64)
                  + np.asarray(f(p2[:, 0], p2[:, 1]), dtype=np.float64))
    if not np.all(np.isfinite(vals)):
        raise ValueError("field returned non-finite values on an edge; "
                         "only pointwise-evaluable (continuous) inputs are supported")
    return CRFunction(mesh, vals)


def p0_project(g, mesh, bounds=None):
    """Edgewise boundary mean: value_e = mean of g over boundary edge e,
    by 2-point Gauss quadrature."""
    p1, p2 = _edge_gauss_points(mesh, mesh.boundary_edge_ids)
    vals = 0.5 * (np.asarray(g(p1[:, 0], p1[:, 1]), dtype=np.float64)
                  + np.asarray(g(p2[:, 0], p2[:, 1]), dtype=np.float64))
    if not np.all(np.isfinite(vals)):
        raise ValueError("boundary field returned non-finite values")
    return BoundaryControl(mesh, vals, bounds=bounds)


def boundary_lifting(u):
    """The piecewise-affine function carrying the control values on boundary
    edges and zero on all interior edges; supported on the boundary strip."""
    mesh = u.mesh
    dof = np.zeros(mesh.n_edges)
    dof[mesh.boundary_edge_ids] = u.value
    return CRFunction(mesh, dof)


def trace_midpoint_values(v):
    """Boundary midpoint values of v, in boundary-loop order."""
    return v.dof[v.mesh.boundary_edge_ids].copy()


def tri_gradients(v):
    """Constant gradient of v on each triangle, (nt, 2)."""
    g = basis_gradients(v.mesh)
    d = v.dof[v.mesh.tri_edges]  # (nt, 3)
    return np.einsum("ti,tid->td", d, g)


def tri_vertex_values(v):
    """Values of v at the triangle corners, (nt, 3): the affine function with
    midpoint values (m0, m1, m2) takes m_j + m_k - m_i at vertex i."""
    d = v.dof[v.mesh.tri_edges]
    s = d.sum(axis=1, keepdims=True)
    return s - 2.0 * d


def normal_derivative(v, edge_id):
    """Outward normal derivative of v on a boundary edge (constant there)."""
    mesh = v.mesh
    pos = int(mesh.boundary_pos[edge_id])
    if pos < 0:
        raise ValueError(f"edge {edge_id} is not a boundary edge")
    t = int(mesh.boundary_tris[pos])
    grad = tri_gradients(v)[t]
    return float(mesh.boundary_normals[pos] @ grad)


def boundary_normal_derivatives(v):
    """Outward normal derivative on every boundary edge, in loop order."""
    mesh = v.mesh
    grads = tri_gradients(v)[mesh.boundary_tris]
    return np.sum(grads * mesh.boundary_normals, axis=1)


def _endpoint_trace_values(v, edge_id, tri_id):
    """Values at the two edge endpoints of the trace of v from triangle tri_id."""
    mesh = v.mesh
    vertex_vals = tri_vertex_values(v)[tri_id]
    tri = mesh.triangles[tri_id]
    a, b = mesh.edges[edge_id]
    ia = int(np.nonzero(tri == a)[0][0])
    ib = int(np.nonzero(tri == b)[0][0])
    return vertex_vals[ia], vertex_vals[ib]


def jump_integral(v, edge_id):
    """Integral over an interior edge of the trace jump (plus side = lower
    triangle index).  Exact for the affine traces (trapezoid rule)."""
    mesh = v.mesh
    tp, tm = mesh.edge_tris[edge_id]
    if tm < 0:
        raise ValueError(f"edge {edge_id} is not an interior edge")
    pa, pb = _endpoint_trace_values(v, edge_id, int(tp))
    ma, mb = _endpoint_trace_values(v, edge_id, int(tm))
    return 0.5 * mesh.edge_lengths[edge_id] * ((pa - ma) + (pb - mb))


def mean_trace(v, edge_id):
    """Integral over an interior edge of the trace average."""
    mesh = v.mesh
    tp, tm = mesh.edge_tris[edge_id]
    if tm < 0:
        raise ValueError(f"edge {edge_id} is not an interior edge")
    pa, pb = _endpoint_trace_values(v, edge_id, int(tp))
    ma, mb = _endpoint_trace_values(v, edge_id, int(tm))
    return 0.25 * mesh.edge_lengths[edge_id] * (pa + pb + ma + mb)


def evaluate_in_triangles(v, tri_ids, points):
    """Evaluate v inside given triangles at given points (vectorized).

    The evaluation uses the affine representation on each listed triangle;
    points are expected to lie in (or on the boundary of) their triangle.
    """
    mesh = v.mesh
    tri_ids = np.asarray(tri_ids, dtype=np.int64)
    points = np.asarray(points, dtype=np.float64)
    p = mesh.vertices[mesh.triangles[tri_ids]]  # (m, 3, 2)
    d1 = p[:, 1] - p[:, 0]
    d2 = p[:, 2] - p[:, 0]
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
    r = points - p[:, 0]
    mu1 = (r[:, 0] * d2[:, 1] - r[:, 1] * d2[:, 0]) / det
    mu2 = (d1[:, 0] * r[:, 1] - d1[:, 1] * r[:, 0]) / det
    lam = np.stack((1.0 - mu1 - mu2, mu1, mu2), axis=1)
    dofs = v.dof[mesh.tri_edges[tri_ids]]
    return np.sum(dofs * (1.0 - 2.0 * lam), axis=1)


def _l2_sq(v):
    d = v.dof[v.mesh.tri_edges]
    return float(np.sum(v.mesh.areas / 3.0 * np.sum(d * d, axis=1)))


def _broken_h1_sq(v):
    g = tri_gradients(v)
    return float(np.sum(v.mesh.areas * np.sum(g * g, axis=1)))


def _l1(v):
    vv = tri_vertex_values(v)
    parts = kernels.tri_abs_integral(
        np.ascontiguousarray(vv[:, 0]), np.ascontiguousarray(vv[:, 1]),
        np.ascontiguousarray(vv[:, 2]), v.mesh.areas)
    return float(parts.sum())


def norms(v):
    """L2(Omega), L1(Omega) and broken-H1 of a CRFunction.

    L2 uses the midpoint rule (exact for the quadratic integrand); L1 splits
    each triangle along the zero line of the affine function (exact); the
    broken-H1 seminorm is the square root of the elementwise gradient energy.
    """
    return {
        "L2_Omega": np.sqrt(_l2_sq(v)),
        "L1_Omega": _l1(v),
        "H1_broken": np.sqrt(_broken_h1_sq(v)),
    }


def boundary_norms(u):
    """L2(Gamma) and L1(Gamma) of a piecewise-constant boundary function."""
    ell = u.mesh.edge_lengths[u.mesh.boundary_edge_ids]
    return {
        "L2_Gamma": float(np.sqrt(np.sum(ell * u.value ** 2))),
        "L1_Gamma": float(np.sum(ell * np.abs(u.value))),
    }
