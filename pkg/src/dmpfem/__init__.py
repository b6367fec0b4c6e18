"""Finite elements for anisotropic diffusion with decay, with discrete maximum
principles enforced through box-constrained quadratic programming."""
from .assembly import (
    AssembledSystem,
    assemble,
    check_mmatrix_conditions,
    critical_h_1d,
    element_matrices,
)
from .kernels import BACKEND
from .mesh import (
    Mesh,
    build_interval_mesh,
    build_square_with_hole_mesh,
    build_unit_square_quad_mesh,
    build_unit_square_tri_mesh,
    load_mesh,
    perturb_interior_nodes,
    save_mesh,
)
from .model import (
    BenchmarkCase,
    ProblemSpec,
    benchmark_catalog,
    exact_solution_1d,
    exact_solution_2d_isotropic,
    lepotier_tensor,
    make_case,
    rotated_anisotropic_tensor,
)
from .qp import clip, dmp_bounds_from_data, solve_box_qp, solve_constrained, solve_galerkin

__version__ = "0.1.0"
