"""DG solver with polynomial boundary-data reconstruction on curved domains.

A discontinuous Galerkin discretization (symmetric interior penalty
diffusion + upwind advection) of 2D advection-diffusion-reaction problems
on curved domains meshed with straight-sided triangles.  Transferring the
Dirichlet data from the curved boundary onto the polygonal mesh boundary
node by node caps convergence at second order; constraining the trial
space to match the data at projected points of the *physical* boundary
restores the optimal order N+1.  Both the one-shot constrained formulation
and the iterative solve/reconstruct variant are provided, along with a
refinement-study CLI (``dgrod``).
"""

from .analysis import ConvergenceReport, convergence_order, dg_norm_error, l2_error
from .assembly import (DGSystemSpec, SolveResult, solve_classical,
                       solve_rod_global, solve_rod_iterative)
from .basis import (AffineMap, NodalBasis, QuadratureRule, edge_quadrature,
                    nodal_basis, volume_quadrature)
from .geometry import BoundaryHit, CurvedDomain, annulus, disk, ray_boundary_intersect, rose
from .mesh import (MeshQualityReport, Triangulation, generate_annulus_mesh,
                   generate_disk_mesh, generate_rose_mesh, read_gmsh, validate)
from .problems import ManufacturedProblem, check_wellposedness, make_case, make_patch_problem
from .rodspace import (BoundaryConstraintSet, build_boundary_constraints,
                       elimination_map, projected_points, rod_reconstruct)
from .study import RunConfig, run_convergence_study, run_patch_test, write_outputs

__version__ = "0.1.0"

__all__ = [
    "AffineMap", "BoundaryConstraintSet", "BoundaryHit", "ConvergenceReport",
    "CurvedDomain", "DGSystemSpec", "ManufacturedProblem", "MeshQualityReport",
    "NodalBasis", "QuadratureRule", "RunConfig", "SolveResult", "Triangulation",
    "annulus", "build_boundary_constraints", "check_wellposedness",
    "convergence_order", "dg_norm_error", "disk", "edge_quadrature",
    "elimination_map", "generate_annulus_mesh", "generate_disk_mesh",
    "generate_rose_mesh", "l2_error", "make_case", "make_patch_problem",
    "nodal_basis", "projected_points", "ray_boundary_intersect", "read_gmsh",
    "rod_reconstruct", "rose", "run_convergence_study", "run_patch_test",
    "solve_classical", "solve_rod_global", "solve_rod_iterative", "validate",
    "volume_quadrature", "write_outputs",
]
