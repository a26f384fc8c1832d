from .laplace_pde import LaplaceGrid, grid_error_estimate, solve_laplace_pde
from .weak_solution import (
    WeakSolutionEstimate,
    infinite_pop_weak_solution,
    mc_weak_solution,
)
from .yule_tree import (
    MarkedTree,
    propagate_marks,
    random_binary_tree,
    sample_inhomogeneous_yule,
    tree_brackets,
)

__all__ = [
    "LaplaceGrid",
    "MarkedTree",
    "WeakSolutionEstimate",
    "grid_error_estimate",
    "infinite_pop_weak_solution",
    "mc_weak_solution",
    "propagate_marks",
    "random_binary_tree",
    "sample_inhomogeneous_yule",
    "solve_laplace_pde",
    "tree_brackets",
]
