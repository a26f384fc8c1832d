import json
import math
from pathlib import Path

import numpy as np
import pytest

from smolab.csbp import (
    ProfileSolution,
    bound_holds,
    is_nonincreasing,
    profile_mean_for_rate,
    profile_solve,
)
from smolab.mechanism import BranchingMechanism
from smolab.misc.errors import DomainError
from smolab.misc.utils import read_csv


@pytest.fixture(scope="module")
def solution() -> ProfileSolution:
    return profile_solve(BranchingMechanism.stable(1.0, 2.0))


class TestProfileSolve:
    """Class for testing the shooting solver of the profile equation."""

    @staticmethod
    def test_boundary_values(solution: ProfileSolution) -> None:
        """h(0) = 1 and h vanishes at the end of the grid."""
        assert solution.h[0] == 1.0, "h starts at 1."
        assert solution.h[-1] < 1e-6, "h decays to 0."
        assert solution.x[0] == 0.0 and solution.x[-1] == 40.0, "Default grid."

    @staticmethod
    def test_shape(solution: ProfileSolution) -> None:
        """h is non-increasing and sits below exp(-x (beta/c)^beta)."""
        assert is_nonincreasing(solution), "h should be non-increasing."
        assert bound_holds(solution), "h should respect the exponential bound."

    @staticmethod
    def test_mean(solution: ProfileSolution) -> None:
        """E(Upsilon) = -h'(0) exceeds (beta/c)^beta = 1 and is finite."""
        assert math.isfinite(solution.e_upsilon), "Finite mean."
        assert solution.e_upsilon > 1.0, "The bound forces a slope steeper than -1."
        assert solution.summary()["e_upsilon"] == solution.e_upsilon, "Summary mean."

    @staticmethod
    def test_residual_small(solution: ProfileSolution) -> None:
        """The grid solution satisfies the equation away from the origin."""
        inside = solution.x[1:-1] > 0.5
        residual = np.abs(solution.residual()[inside])
        assert residual.max() < 1e-2, f"Residual {residual.max()} too large."

    @staticmethod
    def test_rate_rescaling(solution: ProfileSolution) -> None:
        """Solving at c = 2 matches the c^-beta rescaling of the c = 1 mean."""
        direct = profile_solve(BranchingMechanism.stable(2.0, 2.0), x_max=40.0)
        assert direct.e_upsilon == pytest.approx(
            profile_mean_for_rate(solution, 2.0), rel=1e-4
        ), "E(Upsilon) should halve when c doubles."

    @staticmethod
    def test_invalid_requests() -> None:
        """gamma != 2 and grids ending before 1 are rejected."""
        with pytest.raises(DomainError):
            profile_solve(BranchingMechanism.stable(1.0, 1.5))
        with pytest.raises(DomainError):
            profile_solve(BranchingMechanism.stable(1.0, 2.0), x_max=0.5)

    @staticmethod
    def test_export(solution: ProfileSolution, tmp_path: Path) -> None:
        """The grid goes to CSV and the diagnostics to JSON."""
        solution.export(tmp_path / "profile.csv", tmp_path / "profile.json")
        rows = read_csv(tmp_path / "profile.csv")
        assert list(rows[0]) == ["x", "h"], f"Unexpected header {list(rows[0])}."
        assert len(rows) == solution.x.size, "One row per grid point."
        with open(tmp_path / "profile.json") as f:
            summary = json.load(f)
        assert "bisections" in summary and "e_upsilon" in summary, "Diagnostics missing."
