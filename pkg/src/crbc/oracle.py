"""Independent brute-force references for the main build.

Everything here recomputes a quantity the fast path produces, by a different
route: the reduced objective as an explicit dense quadratic (column-built),
a cyclic coordinate-descent box-QP solver, central finite differences, and
Monte-Carlo integration of |v|.  None of it shares code with the path it
checks beyond the state solves themselves.
"""

from __future__ import annotations

import numpy as np

from .crfem import BoundaryControl, evaluate_in_triangles
from .linalg import ConvergenceError
from .stateops import StateOperator, reduced_functional

__all__ = [
    "DenseQP",
    "build_dense_qp",
    "box_qp_solve",
    "qp_objective",
    "qp_gradient",
    "central_difference",
    "fd_gradient",
    "mc_integrate_abs",
    "QP_BOUNDARY_CAP",
]

#: build_dense_qp refuses meshes with more boundary edges than this
QP_BOUNDARY_CAP = 256


class DenseQP:
    """The reduced objective as an explicit quadratic
    j(u) = (1/2) u^T H u + g0^T u + const over the boundary-edge values."""

    __slots__ = ("H", "g0", "const", "bounds", "lengths")

    def __init__(self, H, g0, const, bounds, lengths):
        self.H = H
        self.g0 = g0
        self.const = const
        self.bounds = bounds
        self.lengths = lengths

    @property
    def n(self):
        return len(self.g0)


def build_dense_qp(problem, op=None, cap=QP_BOUNDARY_CAP):
    """Assemble the dense quadratic column by column via states of
    boundary-edge indicators: H_ef = (S chi_e, S chi_f) + alpha |e| delta_ef."""
    mesh = problem.mesh
    nb = mesh.n_boundary_edges
    if nb > cap:
        raise ValueError(f"{nb} boundary edges exceed the oracle cap {cap}")
    op = op or StateOperator(mesh, cg_tol=problem.cg_tol)
    W = np.empty((mesh.n_edges, nb))
    indicator = np.zeros(nb)
    for e in range(nb):
        indicator[e] = 1.0
        w, _ = op.harmonic(indicator)
        W[:, e] = w.dof
        indicator[e] = 0.0
    ell = op.boundary_lengths
    G = W.T @ (op.mass_diag[:, None] * W)
    H = G + problem.alpha * np.diag(ell)
    b = op.load(problem.y_d)
    g0 = -(W.T @ b)
    yd_quad = op.field_quad_values(problem.y_d)
    const = 0.5 * op.quad_integral(yd_quad * yd_quad)
    return DenseQP(H, g0, const, problem.bounds, ell)


def qp_objective(qp, u):
    u = np.asarray(u, dtype=np.float64)
    return 0.5 * float(u @ (qp.H @ u)) + float(qp.g0 @ u) + qp.const


def qp_gradient(qp, u):
    return qp.H @ np.asarray(u, dtype=np.float64) + qp.g0


def box_qp_solve(qp, tol=1e-12, max_iter=100000):
    """Cyclic coordinate descent with exact clamped per-coordinate minimizers.

    Converges for SPD H; stops when the largest coordinate change in a full
    sweep is at most ``tol``.
    """
    ua, ub = qp.bounds
    H = qp.H
    diag = np.diag(H).copy()
    if np.any(diag <= 0.0):
        raise ValueError("QP Hessian has a non-positive diagonal entry")
    u = np.clip(np.zeros(qp.n), ua, ub)
    for sweep in range(1, max_iter + 1):
        max_change = 0.0
        for e in range(qp.n):
            partial = float(H[e] @ u) - diag[e] * u[e] + qp.g0[e]
            new = min(ub, max(ua, -partial / diag[e]))
            change = abs(new - u[e])
            if change > max_change:
                max_change = change
            u[e] = new
        if max_change <= tol:
            return u
    raise ConvergenceError(
        f"coordinate descent did not converge in {max_iter} sweeps "
        f"(last sweep moved {max_change:.3e})",
        iterations=max_iter, residual=max_change)


def central_difference(fun, u, step):
    """Central finite differences of a scalar function of a vector."""
    u = np.asarray(u, dtype=np.float64)
    g = np.empty(len(u))
    for e in range(len(u)):
        saved = u[e]
        u[e] = saved + step
        plus = fun(u)
        u[e] = saved - step
        minus = fun(u)
        u[e] = saved
        g[e] = (plus - minus) / (2.0 * step)
    return g


def fd_gradient(problem, u, step=1e-5, op=None):
    """Central differences of the reduced objective per edge coefficient.

    Requires u strictly feasible by at least ``step`` when the problem has
    bounds, so every perturbed evaluation stays admissible.
    """
    if step <= 0.0:
        raise ValueError("step must be positive")
    values = (u.value if isinstance(u, BoundaryControl) else
              np.asarray(u, dtype=np.float64)).copy()
    ua, ub = problem.bounds
    if np.any(values - step < ua) or np.any(values + step > ub):
        raise ValueError("infeasible perturbation: u must be strictly "
                         f"feasible by at least the step {step}")
    op = op or StateOperator(problem.mesh, cg_tol=problem.cg_tol)

    def fun(vals):
        return reduced_functional(vals, problem.y_d, problem.alpha, op=op)

    return central_difference(fun, values, step)


def mc_integrate_abs(v, samples, seed):
    """Monte-Carlo estimate of the integral of |v| over the domain.

    Samples are placed per triangle proportionally to area, uniformly within
    each triangle.  Returns (estimate, standard_error).
    """
    samples = int(samples)
    if samples < 10 ** 5:
        raise ValueError("at least 1e5 samples are required")
    mesh = v.mesh
    rng = np.random.default_rng(seed)
    total_area = float(mesh.areas.sum())
    counts = rng.multinomial(samples, mesh.areas / total_area)
    tri_idx = np.repeat(np.arange(mesh.n_triangles, dtype=np.int64), counts)
    r1 = rng.random(samples)
    r2 = rng.random(samples)
    s = np.sqrt(r1)
    p = mesh.vertices[mesh.triangles[tri_idx]]
    pts = ((1.0 - s)[:, None] * p[:, 0]
           + (s * (1.0 - r2))[:, None] * p[:, 1]
           + (s * r2)[:, None] * p[:, 2])
    vals = np.abs(evaluate_in_triangles(v, tri_idx, pts))
    estimate = total_area * float(vals.mean())
    stderr = total_area * float(vals.std(ddof=1)) / np.sqrt(samples)
    return estimate, stderr
