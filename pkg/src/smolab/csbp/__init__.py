from .branching_extinction import (
    DEFAULT_DEPTH_CAP,
    ExtinctionEstimate,
    branching_extinction_mc,
)
from .feller import (
    ShiftedMechanism,
    extinction_time_cdf,
    feller_laplace_exponent,
    feller_transition_sample,
    tree_branching_laplace_mc,
)
from .profile_ode import (
    ProfileSolution,
    bound_holds,
    is_nonincreasing,
    profile_mean_for_rate,
    profile_solve,
)

__all__ = [
    "DEFAULT_DEPTH_CAP",
    "ExtinctionEstimate",
    "ProfileSolution",
    "ShiftedMechanism",
    "bound_holds",
    "branching_extinction_mc",
    "extinction_time_cdf",
    "feller_laplace_exponent",
    "feller_transition_sample",
    "is_nonincreasing",
    "profile_mean_for_rate",
    "profile_solve",
    "tree_branching_laplace_mc",
]
