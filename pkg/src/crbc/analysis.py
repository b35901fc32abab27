"""Convergence-study harness: inter-level transfer, error norms, EOC tables.

Mesh level L means the 2x2 structured unit-square mesh refined L-1 times
(an n = 2^L grid).  "Exact" continuous quantities are realized as fine-grid
references with a mandatory gap of at least two levels; every emitted table
records that gap in its metadata.  All randomness is seeded, so reruns are
byte-identical.
"""

from __future__ import annotations

import numpy as np

from . import crfem
from .crfem import BoundaryControl, CRFunction, p0_project
from .mesh import refine_uniform, structured_unit_square
from .linalg import ConvergenceError
from .solver import OcpProblem, kkt_fixed_point_solve, projected_gradient_solve
from .stateops import StateOperator, boundary_lifting_l1_ratio

__all__ = [
    "ConvergenceRecord",
    "StudyAborted",
    "eoc_values",
    "prolong",
    "prolong_control",
    "error_against_reference",
    "mesh_hierarchy",
    "study_control_convergence",
    "study_superconvergence",
    "study_lifting_stability",
    "records_to_csv",
    "records_to_plot_data",
]


class ConvergenceRecord:
    """One study level: mesh size, named errors, named EOC values (None for
    the first level or exact-zero errors)."""

    __slots__ = ("level", "h", "errors", "eoc")

    def __init__(self, level, h, errors=None, eoc=None):
        self.level = level
        self.h = h
        self.errors = dict(errors or {})
        self.eoc = dict(eoc or {})

    def __repr__(self):
        return (f"ConvergenceRecord(level={self.level}, h={self.h:.4g}, "
                f"errors={self.errors}, eoc={self.eoc})")


class StudyAborted(RuntimeError):
    """A level's solver failed; carries the partial table."""

    def __init__(self, message, records):
        super().__init__(message)
        self.records = records


def eoc_values(errors, hs):
    """EOC_i = log(e_i/e_{i+1}) / log(h_i/h_{i+1}); the first entry and any
    pair with a non-positive error give None (exact cases produce zeros)."""
    errors = list(errors)
    hs = list(hs)
    if len(errors) != len(hs) or len(errors) < 2:
        raise ValueError("need equally many errors and mesh sizes, at least 2")
    if any(h <= 0 for h in hs):
        raise ValueError("mesh sizes must be positive")
    out = [None]
    for i in range(1, len(errors)):
        if errors[i - 1] <= 0.0 or errors[i] <= 0.0:
            out.append(None)
        else:
            out.append(float(np.log(errors[i - 1] / errors[i])
                             / np.log(hs[i - 1] / hs[i])))
    return out


def prolong(v, fine_mesh):
    """Evaluate a coarse CR function at the fine edge midpoints.

    Each fine midpoint is evaluated on one coarse triangle: fine edges inside
    a coarse triangle are unambiguous; fine edges on a coarse edge use the
    trace from the incident coarse triangle with the lower index.
    """
    if fine_mesh.parent is not v.mesh:
        raise ValueError("fine mesh is not the recorded child of the "
                         "function's mesh")
    t0 = fine_mesh.edge_tris[:, 0]
    t1 = fine_mesh.edge_tris[:, 1]
    p0 = fine_mesh.parent_tri[t0]
    p1 = np.where(t1 >= 0, fine_mesh.parent_tri[np.maximum(t1, 0)], p0)
    owner = np.minimum(p0, p1)
    vals = crfem.evaluate_in_triangles(v, owner, fine_mesh.edge_midpoints)
    return CRFunction(fine_mesh, vals)


def prolong_control(u, fine_mesh):
    """Inject piecewise-constant boundary data to the refined boundary (each
    coarse boundary edge passes its value to its two halves)."""
    if fine_mesh.parent is not u.mesh:
        raise ValueError("fine mesh is not the recorded child of the "
                         "control's mesh")
    pe = fine_mesh.parent_edge[fine_mesh.boundary_edge_ids]
    pos = u.mesh.boundary_pos[pe]
    if np.any(pos < 0):
        raise ValueError("fine boundary edge without a coarse boundary parent")
    return BoundaryControl(fine_mesh, u.value[pos], bounds=u.bounds)


def _chain(coarse_mesh, fine_mesh):
    """Meshes from fine down to coarse following parent links (inclusive)."""
    chain = [fine_mesh]
    m = fine_mesh
    while m is not coarse_mesh:
        if m.parent is None:
            raise ValueError("meshes are not in a parent-child refinement chain")
        m = m.parent
        chain.append(m)
    return chain


def error_against_reference(v, v_ref, norm_name):
    """Prolong v to the reference mesh (at least 2 levels finer) and return
    the named norm of the difference there."""
    is_control = isinstance(v, BoundaryControl)
    chain = _chain(v.mesh, v_ref.mesh)
    gap = len(chain) - 1
    if gap < 2:
        raise ValueError(f"reference must be at least 2 levels finer (gap={gap})")
    w = v
    for mesh in reversed(chain[:-1]):
        w = prolong_control(w, mesh) if is_control else prolong(w, mesh)
    if is_control:
        diff = BoundaryControl(v_ref.mesh, w.value - v_ref.value)
        return crfem.boundary_norms(diff)[norm_name]
    diff = CRFunction(v_ref.mesh, w.dof - v_ref.dof)
    return crfem.norms(diff)[norm_name]


def mesh_hierarchy(max_level):
    """Levels 1..max_level by successive red refinement of the 2x2 base mesh;
    index 0 is unused."""
    if max_level < 1:
        raise ValueError("max_level must be at least 1")
    hier = [None, structured_unit_square(2)]
    for _ in range(max_level - 1):
        hier.append(refine_uniform(hier[-1]))
    return hier


def study_control_convergence(y_d, alpha, bounds, levels, ref_level, *,
                              solver="pg", solver_tol=1e-9, cg_tol=1e-12,
                              max_iter=20000, seed=0, hierarchy=None,
                              keep_solutions=False):
    """Solve the control problem on each level and measure control and state
    errors against the reference-level solution.

    The solves cascade: every level starts from the previous level's control
    injected to the finer boundary, which does not change the (unique)
    minimizers, only the cost of reaching them.

    Returns a list of ConvergenceRecord with errors ``control_L2_Gamma`` and
    ``state_L2_Omega`` and their EOC columns; raises StudyAborted with the
    partial table if a level fails.
    """
    levels = sorted(levels)
    if ref_level < levels[-1] + 2:
        raise ValueError("reference level must be at least 2 above the "
                         "largest study level")
    hier = hierarchy or mesh_hierarchy(ref_level)
    solve = {"pg": projected_gradient_solve,
             "fp": kkt_fixed_point_solve}[solver]

    solutions = {}
    u_prev = None
    records = []
    for lvl in range(1, ref_level + 1):
        problem = OcpProblem(hier[lvl], y_d, alpha, bounds,
                             solver_tol=solver_tol, cg_tol=cg_tol,
                             max_iter=max_iter)
        u0 = prolong_control(u_prev, hier[lvl]) if u_prev is not None else None
        try:
            sol = solve(problem, u0)
        except ConvergenceError as exc:
            raise StudyAborted(f"solver failed on level {lvl}: {exc}",
                               records) from exc
        if not sol.converged:
            raise StudyAborted(
                f"solver did not converge on level {lvl} "
                f"(residual {sol.projected_gradient_norm:.3e})", records)
        if lvl in levels or lvl == ref_level:
            solutions[lvl] = sol
        if lvl in levels:
            records.append(ConvergenceRecord(lvl, hier[lvl].h_max))
        u_prev = sol.u

    ref = solutions[ref_level]
    for rec in records:
        sol = solutions[rec.level]
        rec.errors["control_L2_Gamma"] = error_against_reference(
            sol.u, ref.u, "L2_Gamma")
        rec.errors["state_L2_Omega"] = error_against_reference(
            sol.y, ref.y, "L2_Omega")
    _fill_eoc(records)
    if keep_solutions:
        return records, solutions
    return records


def _p0_coarse_datum(hier, seed):
    """A fixed piecewise-constant datum on the level-1 boundary, injected
    unchanged to every finer level."""
    base = hier[1]
    rng = np.random.default_rng(np.random.SeedSequence([seed, 101]))
    values = rng.uniform(-1.0, 1.0, base.n_boundary_edges)
    data = {1: BoundaryControl(base, values)}
    for lvl in range(2, len(hier)):
        data[lvl] = prolong_control(data[lvl - 1], hier[lvl])
    return data


def study_superconvergence(data_kind, levels, ref_level, *, seed=0,
                           cg_tol=1e-10, hierarchy=None):
    """State-equation error study for a fixed boundary datum.

    data_kind 'smooth' uses the trace of the harmonic field x^2 - y^2
    (projected edgewise per level); 'piecewise-constant' uses a fixed seeded
    level-1 datum injected to every level.  Errors are L2(Omega) distances
    between each level's state and the reference-level state of the same
    datum.
    """
    levels = sorted(levels)
    if ref_level < levels[-1] + 2:
        raise ValueError("reference level must be at least 2 above the "
                         "largest study level")
    hier = hierarchy or mesh_hierarchy(ref_level)

    if data_kind == "smooth":
        def g(x, y):
            return x * x - y * y
        data = {lvl: p0_project(g, hier[lvl])
                for lvl in levels + [ref_level]}
    elif data_kind == "piecewise-constant":
        data = _p0_coarse_datum(hier, seed)
    else:
        raise ValueError("data_kind must be 'smooth' or 'piecewise-constant'")

    states = {}
    for lvl in levels + [ref_level]:
        op = StateOperator(hier[lvl], cg_tol=cg_tol)
        w, _ = op.harmonic(data[lvl])
        states[lvl] = w

    records = []
    for lvl in levels:
        err = error_against_reference(states[lvl], states[ref_level],
                                      "L2_Omega")
        records.append(ConvergenceRecord(lvl, hier[lvl].h_max,
                                         {"superconv_L2": err}))
    _fill_eoc(records)
    return records


def study_lifting_stability(levels, *, seed=0, hierarchy=None):
    """Ratios ||lifting(u)||_L1 / (h ||u||_L1(Gamma)) for three data
    families: constant one, seeded random signs, single-edge indicator.
    Boundedness of the ratios across levels is the stability statement;
    there is no rate, hence no EOC column.
    """
    levels = sorted(levels)
    if len(levels) < 3:
        raise ValueError("lifting study needs at least 3 levels")
    hier = hierarchy or mesh_hierarchy(levels[-1])
    records = []
    for lvl in levels:
        mesh = hier[lvl]
        nb = mesh.n_boundary_edges
        rng = np.random.default_rng(np.random.SeedSequence([seed, 202, lvl]))
        const = BoundaryControl(mesh, np.ones(nb))
        signs = BoundaryControl(mesh, rng.choice([-1.0, 1.0], nb))
        one_edge = np.zeros(nb)
        one_edge[0] = 1.0
        indicator = BoundaryControl(mesh, one_edge)
        records.append(ConvergenceRecord(lvl, mesh.h_max, {
            "ratio_const": boundary_lifting_l1_ratio(const),
            "ratio_random": boundary_lifting_l1_ratio(signs),
            "ratio_indicator": boundary_lifting_l1_ratio(indicator),
        }))
    return records


def _fill_eoc(records):
    if len(records) < 2:
        return
    hs = [r.h for r in records]
    for name in records[0].errors:
        errs = [r.errors[name] for r in records]
        for rec, value in zip(records, eoc_values(errs, hs)):
            rec.eoc[name] = value


def _fmt(x):
    return format(float(x), ".17g")


def records_to_csv(records, metadata):
    """CSV with '#'-prefixed metadata lines, one row per level.

    Columns: level, h, the error names, then eoc_<name> for every error that
    carries EOC values (empty cells where the EOC is undefined).
    """
    lines = [f"# {key} = {value}" for key, value in metadata.items()]
    if not records:
        lines.append("level,h")
        return "\n".join(lines) + "\n"
    error_names = list(records[0].errors)
    eoc_names = [n for n in error_names if any(n in r.eoc for r in records)]
    header = ["level", "h"] + error_names + [f"eoc_{n}" for n in eoc_names]
    lines.append(",".join(header))
    for rec in records:
        row = [str(rec.level), _fmt(rec.h)]
        row += [_fmt(rec.errors[n]) for n in error_names]
        for n in eoc_names:
            val = rec.eoc.get(n)
            row.append("" if val is None else _fmt(val))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def records_to_plot_data(records, name, metadata):
    """Two-column plot data (log10 h, log10 error) for one error name;
    non-positive entries are skipped (exact cases produce zeros)."""
    lines = [f"# {key} = {value}" for key, value in metadata.items()]
    lines.append(f"# columns: log10_h log10_{name}")
    for rec in records:
        err = rec.errors.get(name)
        if err is not None and err > 0.0:
            lines.append(f"{_fmt(np.log10(rec.h))} {_fmt(np.log10(err))}")
    return "\n".join(lines) + "\n"
