"""Command-line interface: single solves, convergence studies, gradient
checks, mesh inspection.

Configuration is a flat key-value text file with command-line overrides
(last wins).  Every emitted file starts with a '#' metadata block holding
the fully resolved configuration and its hash; runs with equal hashes
produce byte-identical files.  Exit codes: 0 success, 1 configuration or
input error, 2 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import hashlib
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .fields import get_field
from .linalg import ConvergenceError
from .mesh import MeshError, read_mesh, refine_uniform, structured_unit_square, write_mesh
from .oracle import fd_gradient, QP_BOUNDARY_CAP
from .solver import OcpProblem, kkt_fixed_point_solve, projected_gradient_solve
from .stateops import StateOperator, adjoint_identity_residual, reduced_gradient

__all__ = ["main"]

DEFAULTS = {
    "domain": "unit-square",
    "mesh_file": "",
    "level": "3",
    "levels": "5",
    "ref": "7",
    "yd": "product",
    "alpha": "0.01",
    "ua": "-0.5",
    "ub": "0.5",
    "solver": "pg",
    "solver_tol": "1e-9",
    "cg_tol": "1e-12",
    "max_iter": "20000",
    "seed": "0",
    "out": "out",
    "superconv_data": "smooth",
    "dump": "0",
    "corrupt_gradient": "0",  # test hook: gradcheck adds 1e-3 to one edge
}

GRADCHECK_MISMATCH_TOL = 1e-6
GRADCHECK_IDENTITY_TOL = 1e-9


class ConfigError(ValueError):
    pass


def _read_config_file(path):
    out = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def resolve_config(args):
    """defaults <- config file <- command-line flags (last wins)."""
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(_read_config_file(args.config))
    for key in DEFAULTS:
        value = getattr(args, key, None)
        if value is not None:
            cfg[key] = str(value)
    return cfg


def _as_float(cfg, key):
    try:
        return float(cfg[key])
    except ValueError:
        raise ConfigError(f"{key} must be a number, got {cfg[key]!r}") from None


def _as_int(cfg, key):
    try:
        return int(cfg[key])
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {cfg[key]!r}") from None


def validate(cfg, *, for_study=False):
    alpha = _as_float(cfg, "alpha")
    if alpha <= 0.0:
        raise ConfigError(f"alpha must be positive, got {alpha}")
    ua = _as_float(cfg, "ua")
    ub = _as_float(cfg, "ub")
    if not ua < ub:
        raise ConfigError(f"bounds invalid: ua={ua} must be < ub={ub}")
    level = _as_int(cfg, "level")
    if level < 1:
        raise ConfigError(f"level must be >= 1, got {level}")
    levels = _as_int(cfg, "levels")
    ref = _as_int(cfg, "ref")
    if for_study and ref < levels + 2:
        raise ConfigError(f"ref must be at least levels + 2, got ref={ref}, "
                          f"levels={levels}")
    if cfg["solver"] not in ("pg", "fp"):
        raise ConfigError(f"solver must be 'pg' or 'fp', got {cfg['solver']!r}")
    if cfg["superconv_data"] not in ("smooth", "piecewise-constant"):
        raise ConfigError("superconv_data must be 'smooth' or "
                          f"'piecewise-constant', got {cfg['superconv_data']!r}")
    get_field(cfg["yd"])
    _as_float(cfg, "solver_tol")
    _as_float(cfg, "cg_tol")
    _as_int(cfg, "max_iter")
    _as_int(cfg, "seed")


def canonical_config(cfg):
    # the output directory does not influence any computed value, so it is
    # excluded: equal configurations produce byte-identical files wherever
    # they are written
    keys = sorted(k for k in cfg if k != "out")
    return "\n".join(f"{key} = {cfg[key]}" for key in keys) + "\n"


def config_metadata(cfg):
    meta = {key: cfg[key] for key in sorted(cfg) if key != "out"}
    digest = hashlib.sha256(canonical_config(cfg).encode()).hexdigest()
    meta["config_hash"] = digest
    return meta


def build_mesh(cfg):
    if cfg["mesh_file"]:
        mesh = read_mesh(Path(cfg["mesh_file"]).read_text())
    else:
        if cfg["domain"] != "unit-square":
            raise ConfigError(f"unknown domain {cfg['domain']!r}")
        mesh = structured_unit_square(2)
    for _ in range(_as_int(cfg, "level") - 1):
        mesh = refine_uniform(mesh)
    return mesh


def build_problem(cfg, mesh):
    return OcpProblem(
        mesh, get_field(cfg["yd"]), _as_float(cfg, "alpha"),
        (_as_float(cfg, "ua"), _as_float(cfg, "ub")),
        solver_tol=_as_float(cfg, "solver_tol"),
        cg_tol=_as_float(cfg, "cg_tol"),
        max_iter=_as_int(cfg, "max_iter"))


def _write(out_dir, name, text):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / name).write_text(text)


def _metadata_block(meta):
    return "".join(f"# {key} = {value}\n" for key, value in meta.items())


def _fmt(x):
    return format(float(x), ".17g")


def cmd_solve(cfg):
    mesh = build_mesh(cfg)
    problem = build_problem(cfg, mesh)
    solve = projected_gradient_solve if cfg["solver"] == "pg" else kkt_fixed_point_solve
    sol = solve(problem)
    lower, upper = sol.active_set_sizes()
    meta = config_metadata(cfg)
    lines = [
        f"solver = {sol.solver}",
        f"converged = {int(sol.converged)}",
        f"iterations = {sol.iterations}",
        f"objective = {_fmt(sol.objective)}",
        f"projected_gradient_norm = {_fmt(sol.projected_gradient_norm)}",
        f"vi_residual = {_fmt(sol.vi_residual)}",
        f"active_lower = {lower}",
        f"active_upper = {upper}",
        f"n_boundary_edges = {mesh.n_boundary_edges}",
        f"n_edges = {mesh.n_edges}",
        f"h_max = {_fmt(mesh.h_max)}",
    ]
    _write(cfg["out"], "summary.txt", _metadata_block(meta) + "\n".join(lines) + "\n")
    if cfg["dump"] not in ("0", ""):
        for name, arr in (("u.dat", sol.u.value), ("y.dat", sol.y.dof),
                          ("p.dat", sol.p.dof)):
            body = "".join(_fmt(v) + "\n" for v in arr)
            _write(cfg["out"], name, _metadata_block(meta) + body)
    print(f"solve: converged={sol.converged} iterations={sol.iterations} "
          f"objective={sol.objective:.12g}")
    return 0 if sol.converged else 2


def _emit_study(cfg, records, csv_name="study.csv"):
    meta = config_metadata(cfg)
    _write(cfg["out"], csv_name, analysis.records_to_csv(records, meta))
    if records:
        for name in records[0].errors:
            _write(cfg["out"], f"plot_{name}.dat",
                   analysis.records_to_plot_data(records, name, meta))


def cmd_study_control(cfg):
    levels = list(range(1, _as_int(cfg, "levels") + 1))
    try:
        records = analysis.study_control_convergence(
            get_field(cfg["yd"]), _as_float(cfg, "alpha"),
            (_as_float(cfg, "ua"), _as_float(cfg, "ub")),
            levels, _as_int(cfg, "ref"), solver=cfg["solver"],
            solver_tol=_as_float(cfg, "solver_tol"),
            cg_tol=_as_float(cfg, "cg_tol"),
            max_iter=_as_int(cfg, "max_iter"), seed=_as_int(cfg, "seed"))
    except analysis.StudyAborted as exc:
        _emit_study(cfg, exc.records)
        print(f"study-control: aborted: {exc}", file=sys.stderr)
        return 2
    _emit_study(cfg, records)
    print(f"study-control: {len(records)} levels written to {cfg['out']}")
    return 0


def cmd_study_superconv(cfg):
    levels = list(range(1, _as_int(cfg, "levels") + 1))
    records = analysis.study_superconvergence(
        cfg["superconv_data"], levels, _as_int(cfg, "ref"),
        seed=_as_int(cfg, "seed"), cg_tol=_as_float(cfg, "cg_tol"))
    _emit_study(cfg, records)
    print(f"study-superconv: {len(records)} levels written to {cfg['out']}")
    return 0


def cmd_study_lifting(cfg):
    levels = list(range(1, _as_int(cfg, "levels") + 1))
    records = analysis.study_lifting_stability(levels, seed=_as_int(cfg, "seed"))
    _emit_study(cfg, records)
    print(f"study-lifting: {len(records)} levels written to {cfg['out']}")
    return 0


def cmd_gradcheck(cfg):
    mesh = build_mesh(cfg)
    if mesh.n_boundary_edges > QP_BOUNDARY_CAP:
        raise ConfigError(
            f"level {cfg['level']} has {mesh.n_boundary_edges} boundary edges, "
            f"above the gradcheck cap {QP_BOUNDARY_CAP}")
    problem = build_problem(cfg, mesh)
    ua, ub = problem.bounds
    # evaluate at zero when it is strictly feasible (the gradient of the
    # quadratic objective is equally well checked at any point), else at the
    # box midpoint; zero data then reports an exactly zero mismatch
    step = 1e-5
    if ua + step < 0.0 < ub - step:
        values = np.zeros(mesh.n_boundary_edges)
    else:
        values = np.full(mesh.n_boundary_edges, 0.5 * (ua + ub))

    op = StateOperator(mesh, cg_tol=problem.cg_tol)
    g = reduced_gradient(values, problem.y_d, problem.alpha, op=op)
    if cfg["corrupt_gradient"] not in ("0", ""):
        g = g.copy()
        g[0] += 1e-3
    fd = fd_gradient(problem, values, step=step, op=op)
    scale = max(1.0, float(np.abs(g).max()))
    mismatch = float(np.abs(g - fd).max()) / scale
    # the identity is vacuous at u = 0 (every term vanishes with the state),
    # so it is checked at a nonzero interior constant
    u_id = np.full(mesh.n_boundary_edges, 0.5 * (ua + ub) + 0.4 * (ub - ua))
    identity = adjoint_identity_residual(u_id, problem.y_d, op=op)
    print(f"max_relative_mismatch = {mismatch:.6e}")
    print(f"identity_residual = {identity:.6e}")
    ok = mismatch <= GRADCHECK_MISMATCH_TOL and identity <= GRADCHECK_IDENTITY_TOL
    return 0 if ok else 2


def cmd_mesh_info(cfg):
    mesh = build_mesh(cfg)
    print(f"vertices = {mesh.n_vertices}")
    print(f"triangles = {mesh.n_triangles}")
    print(f"edges = {mesh.n_edges}")
    print(f"boundary_edges = {mesh.n_boundary_edges}")
    print(f"interior_edges = {mesh.n_interior_edges}")
    print(f"h_max = {_fmt(mesh.h_max)}")
    print(f"min_angle_deg = {_fmt(np.degrees(mesh.min_angle))}")
    if cfg["out"] and cfg["dump"] not in ("0", ""):
        _write(cfg["out"], "mesh.txt", write_mesh(mesh))
    return 0


COMMANDS = {
    "solve": (cmd_solve, False),
    "study-control": (cmd_study_control, True),
    "study-superconv": (cmd_study_superconv, True),
    "study-lifting": (cmd_study_lifting, False),
    "gradcheck": (cmd_gradcheck, False),
    "mesh-info": (cmd_mesh_info, False),
}


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="crbc",
        description="Boundary control of the Laplace equation with "
                    "edge-midpoint nonconforming elements: solves and "
                    "convergence studies.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key-value config file")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--level", type=int, default=None)
        p.add_argument("--levels", type=int, default=None)
        p.add_argument("--ref", type=int, default=None)
        p.add_argument("--alpha", type=float, default=None)
        p.add_argument("--ua", type=float, default=None)
        p.add_argument("--ub", type=float, default=None)
        p.add_argument("--solver", choices=("pg", "fp"), default=None)
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--yd", default=None)
        p.add_argument("--mesh-file", dest="mesh_file", default=None)
        p.add_argument("--solver-tol", dest="solver_tol", type=float, default=None)
        p.add_argument("--cg-tol", dest="cg_tol", type=float, default=None)
        p.add_argument("--max-iter", dest="max_iter", type=int, default=None)
        p.add_argument("--superconv-data", dest="superconv_data",
                       choices=("smooth", "piecewise-constant"), default=None)
        p.add_argument("--dump", action="store_const", const="1", default=None,
                       help="also write DOF/mesh dumps")
        p.add_argument("--corrupt-gradient", dest="corrupt_gradient",
                       action="store_const", const="1", default=None,
                       help=argparse.SUPPRESS)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    handler, for_study = COMMANDS[args.command]
    try:
        cfg = resolve_config(args)
        validate(cfg, for_study=for_study)
        return handler(cfg)
    except (ConfigError, MeshError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ConvergenceError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
