"""
Shared fixtures for the smolab test suite.

Read more about conftest.py under:
- https://docs.pytest.org/en/stable/fixture.html
- https://docs.pytest.org/en/stable/writing_plugins.html
"""
from pathlib import Path
from typing import Any, Callable, Dict

import numpy as np
import pytest

from smolab.harness.config import ExperimentConfig, load_config
from smolab.mechanism import BranchingMechanism

# Sizes small enough for every harness check to run in seconds.
TINY_OVERRIDES: Dict[str, Any] = {
    "n": 200,
    "k_cap": 20,
    "coalescent_replicates": 4,
    "kingman_n": 2000,
    "kingman_replicates": 3,
    "speed_n": 20,
    "speed_species_ratio": 50.0,
    "speed_k_cap": 2,
    "speed_replicates": 4,
    "speed_rtol": 10.0,
    "measure_n": 60,
    "measure_replicates": 4,
    "pde_n_lambda": 41,
    "pde_lambda_max": 100.0,
    "mc_replicates": 200,
    "tree_replicates": 200,
    "n_random_trees": 2,
    "profile_x_max": 30.0,
    "profile_tol": 1e-8,
    "extinction_replicates": 50,
    "upsilon_replicates": 60,
    "upsilon_tol": 0.05,
    "upsilon_k_max": 10,
    "picard_ensemble": 200,
    "picard_iterations": 2,
    "picard_long_horizon": 5.0,
    "cpp_replicates": 60,
    "dust_deltas": "0.01",
    "dust_replicates": 60,
}


@pytest.fixture
def quadratic() -> BranchingMechanism:
    """The Feller mechanism ``psi(x) = x^2``."""
    return BranchingMechanism.stable(1.0, 2.0)


@pytest.fixture
def rng() -> np.random.Generator:
    """Generator with a fixed seed."""
    return np.random.default_rng(20240601)


@pytest.fixture
def tiny_config(tmp_path: Path) -> Callable[..., ExperimentConfig]:
    """Factory of quick-profile configs shrunk to test sizes, writing into tmp_path.

    Keyword arguments override any configuration key.
    """

    def make(**overrides: Any) -> ExperimentConfig:
        values = {**TINY_OVERRIDES, "seed": 7, "out": str(tmp_path / "out")}
        values.update(overrides)
        return load_config(profile="quick", overrides=values)

    return make
