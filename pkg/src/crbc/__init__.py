"""Boundary control of the Laplace equation on convex polygons, discretized
with edge-midpoint nonconforming elements for the state/adjoint and
piecewise constants for the control, plus the convergence-study harness
that verifies the expected rates at desk scale."""

from .analysis import (ConvergenceRecord, eoc_values, error_against_reference,
                       mesh_hierarchy, prolong, prolong_control,
                       study_control_convergence, study_lifting_stability,
                       study_superconvergence)
from .assembly import (DofPartition, assemble_load, assemble_mass,
                       assemble_stiffness, dof_partition, mass_diagonal, split)
from .crfem import (BoundaryControl, CRFunction, boundary_lifting,
                    boundary_norms, cr_interpolate, jump_integral, local_basis,
                    mean_trace, normal_derivative, norms, p0_project)
from .kernels import BACKEND as KERNEL_BACKEND
from .linalg import (CgResult, ConvergenceError, NotSPDError, SparseMatrix,
                     cg_solve, dense_cholesky_solve, spmv)
from .mesh import (Mesh, MeshError, MeshFormatError, read_mesh, refine_uniform,
                   structured_unit_square, write_mesh)
from .oracle import (DenseQP, box_qp_solve, build_dense_qp, fd_gradient,
                     mc_integrate_abs)
from .solver import (LineSearchError, OcpProblem, OptimalSolution, clamp,
                     kkt_fixed_point_solve, projected_gradient_solve,
                     vi_residual)
from .stateops import (StateOperator, StateSolveReport, discrete_harmonic,
                       reduced_functional, reduced_gradient, solve_adjoint)

__version__ = "0.1.0"
