from .empirical import EmpiricalMeasure, GeneticComposition, empirical, rescale
from .fenwick import FenwickTree
from .nested_kingman import (
    GeneInitialization,
    TrajectoryRecord,
    cdi_speed_estimate,
    initialization_gap,
    kingman_block_counts,
    simulate_nested,
    species_curve,
)

__all__ = [
    "EmpiricalMeasure",
    "FenwickTree",
    "GeneInitialization",
    "GeneticComposition",
    "TrajectoryRecord",
    "cdi_speed_estimate",
    "empirical",
    "initialization_gap",
    "kingman_block_counts",
    "rescale",
    "simulate_nested",
    "species_curve",
]
