"""Isogeometric analysis on extended Loop subdivision surfaces.

Second-, fourth- and sixth-order Laplace-Beltrami problems are discretized
with the limit basis functions of a triangular control mesh and compared
against linear finite elements on the same surface.
"""

from .assembly import LinearSystem, SystemBlocks, assemble, build_system, dump_matrix
from .baseline import LinearFemSpace, assemble_linear
from .basis import (
    BasisEval,
    PatchBasis,
    PatchContext,
    basis_functions,
    basis_support,
    evaluate,
    patch_context,
    prepare_analysis_mesh,
    regular_basis,
)
from .generators import generate_test_mesh
from .geometry import SurfaceSample, sample_surface, surface_area, surface_integral, tangential_gradient
from .harness import ConvergenceReport, SuiteConfig, iga_errors, l2_error, run_suite
from .manufactured import manufactured
from .mesh import ControlMesh, MeshError, RingNeighborhood, load_mesh, save_mesh
from .quadrature import QuadratureRule, quadrature
from .solver import SolveReport, SolverError, solve
from .subdivision import fit_control_values, limit_matrix, limit_position, limit_positions, loop_alpha, subdivide

__version__ = "0.1.0"

__all__ = [
    "BasisEval",
    "ControlMesh",
    "ConvergenceReport",
    "LinearFemSpace",
    "LinearSystem",
    "MeshError",
    "PatchBasis",
    "PatchContext",
    "QuadratureRule",
    "RingNeighborhood",
    "SolveReport",
    "SolverError",
    "SuiteConfig",
    "SurfaceSample",
    "SystemBlocks",
    "assemble",
    "assemble_linear",
    "basis_functions",
    "basis_support",
    "build_system",
    "dump_matrix",
    "evaluate",
    "fit_control_values",
    "generate_test_mesh",
    "iga_errors",
    "l2_error",
    "limit_matrix",
    "limit_position",
    "limit_positions",
    "load_mesh",
    "loop_alpha",
    "manufactured",
    "patch_context",
    "prepare_analysis_mesh",
    "quadrature",
    "regular_basis",
    "run_suite",
    "sample_surface",
    "save_mesh",
    "solve",
    "subdivide",
    "surface_area",
    "surface_integral",
    "tangential_gradient",
]
