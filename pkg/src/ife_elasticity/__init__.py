"""Immersed finite element spaces for planar elasticity interface problems."""

from .errors import (
    ConvergenceError,
    DegenerateGeometryError,
    HypothesisViolation,
    IFEError,
    SingularConstruction,
)
from .mesh import CartesianMesh, DofMap, build_dof_map, build_mesh
from .geometry import (
    Ellipse,
    InterfaceElementData,
    JumpMatrices,
    LameField,
    LevelSetInterface,
    LineInterface,
    build_jump_matrices,
    check_unisolvence_bound,
    classify_element,
    find_edge_intersection,
    make_interface,
    select_F0,
)
from .space import (
    IFEShapeSet,
    IFESpace,
    VectorPoly,
    build_space,
    check_fundamental_identity,
    construct_ife_shapes,
    evaluate,
    standard_shapes,
)
from .assembly import GlobalField, LinearSystem, apply_dirichlet, assemble, solve_cg
from .exact import ExactSolution, elliptic_power_solution
from .norms import error_norms, interpolate
from .convergence import ConvergenceConfig, ConvergenceRecord, run_convergence

__version__ = "0.1.0"
