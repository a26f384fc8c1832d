from .branching_mechanism import (
    ALGEBRAIC_RTOL,
    ODE_ORACLE_RTOL,
    BranchingMechanism,
    FlowEvaluator,
    MechanismKind,
    integrate_flow,
)

__all__ = [
    "ALGEBRAIC_RTOL",
    "ODE_ORACLE_RTOL",
    "BranchingMechanism",
    "FlowEvaluator",
    "MechanismKind",
    "integrate_flow",
]
