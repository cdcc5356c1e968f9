from .assembly import ProblemKind, StiffnessSystem, assemble
from .loads import CoupleField, load_vector
from .morley import MorleySpace
from .solvers import (
    BoundaryForce,
    Solution,
    bilinear,
    boundary_force,
    check_rigid_equilibrium,
    evaluate_hessian,
    galerkin_residual,
    lifting,
    solve,
    solve_cavity,
    solve_intermediate,
    solve_reference,
    solve_rigid,
)

__all__ = [
    "ProblemKind", "StiffnessSystem", "assemble", "CoupleField", "load_vector", "MorleySpace",
    "BoundaryForce", "Solution", "bilinear", "boundary_force", "check_rigid_equilibrium",
    "evaluate_hessian", "galerkin_residual", "lifting", "solve", "solve_cavity",
    "solve_intermediate", "solve_reference", "solve_rigid",
]
