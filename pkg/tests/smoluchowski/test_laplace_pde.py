import numpy as np
import pytest

from smolab.mechanism import BranchingMechanism
from smolab.misc.errors import DomainError, StabilityError
from smolab.smoluchowski import (
    LaplaceGrid,
    grid_error_estimate,
    mc_weak_solution,
    solve_laplace_pde,
)


def unit_mass(lam: np.ndarray) -> np.ndarray:
    return np.exp(-lam)


class TestLaplaceGrid:
    """Class for testing the lambda grid and its interpolation."""

    @staticmethod
    def test_initial_grid() -> None:
        """The first node is lambda = 0 with u = 1."""
        grid = LaplaceGrid.initial(unit_mass, 1.0, n_lambda=21)
        assert grid.lambdas[0] == 0.0 and grid.lambdas.size == 22, "0 plus 21 nodes."
        assert grid.values.shape == (1, 22), "One recorded row."
        assert grid.final[0] == 1.0, "u(0) = 1."

    @staticmethod
    def test_interpolation_at_nodes() -> None:
        """Interpolation reproduces node values and pins u(t, 0) = 1."""
        grid = LaplaceGrid.initial(unit_mass, 1.0, n_lambda=21)
        lam = grid.lambdas[5]
        assert grid.at(0.0, lam) == pytest.approx(np.exp(-lam)), "Node value."
        assert grid.at(0.0, 0.0) == 1.0, "u(t, 0) = 1."
        below = grid.at(0.0, 0.5 * grid.lambdas[1])
        assert grid.final[1] <= below <= 1.0, "Linear below the first positive node."

    @staticmethod
    def test_unrecorded_time() -> None:
        """Only recorded times can be read."""
        grid = LaplaceGrid.initial(unit_mass, 1.0, n_lambda=21)
        with pytest.raises(DomainError):
            grid.at(0.5, 1.0)

    @staticmethod
    def test_delta_zero_needs_start_time() -> None:
        """The infinite-population equation is singular at t = 0."""
        with pytest.raises(DomainError):
            LaplaceGrid.initial(unit_mass, 0.0)
        grid = LaplaceGrid.initial(unit_mass, 0.0, t0=0.5, n_lambda=21)
        assert grid.times[0] == 0.5, "Start time recorded."

    @staticmethod
    def test_values_must_be_laplace_transforms() -> None:
        """Values outside [0, 1] are rejected."""
        with pytest.raises(DomainError):
            LaplaceGrid.initial(lambda lam: 2.0 + 0.0 * lam, 1.0, n_lambda=21)


class TestSolveLaplacePde:
    """Class for testing the explicit finite-difference solver."""

    @staticmethod
    def test_shape_and_band(quadratic: BranchingMechanism) -> None:
        """u stays in [0, 1], pinned at lambda = 0 and non-increasing in lambda."""
        grid = solve_laplace_pde(
            LaplaceGrid.initial(unit_mass, 1.0, n_lambda=61),
            quadratic,
            1.0,
            record_times=[0.5],
        )
        assert np.allclose(grid.times, [0.0, 0.5, 1.0]), "Start plus two records."
        assert np.all(grid.values[:, 0] == 1.0), "u(t, 0) = 1."
        assert np.all((grid.values >= 0) & (grid.values <= 1)), "u stays in [0, 1]."
        assert np.all(np.diff(grid.values, axis=1) <= 1e-12), "u decreases in lambda."
        assert grid.dt > 0, "Time step is recorded."

    @staticmethod
    def test_zero_mass_is_stationary(quadratic: BranchingMechanism) -> None:
        """u = 1 (no mass) solves the equation."""
        grid = solve_laplace_pde(
            LaplaceGrid.initial(lambda lam: np.ones_like(lam), 1.0, n_lambda=41),
            quadratic,
            0.5,
        )
        assert np.allclose(grid.final, 1.0), "u = 1 must stay 1."

    @staticmethod
    def test_no_coalescence_limit(quadratic: BranchingMechanism) -> None:
        """With a huge delta the unit mass only follows the flow: u = exp(-lambda / 2)."""
        grid = solve_laplace_pde(
            LaplaceGrid.initial(unit_mass, 1e9, n_lambda=121), quadratic, 1.0
        )
        probes = np.array([0.2, 1.0, 5.0])
        assert np.allclose(grid.at(1.0, probes), np.exp(-probes / 2.0), atol=5e-3), (
            "Without coalescence u(1, lambda) is exp(-lambda flow(1, 1))."
        )

    @staticmethod
    def test_unstable_step_detected(quadratic: BranchingMechanism) -> None:
        """A time step far above the stability limit raises."""
        with pytest.raises(StabilityError):
            solve_laplace_pde(
                LaplaceGrid.initial(unit_mass, 1.0, n_lambda=61),
                quadratic,
                1.0,
                safety=5.0,
            )

    @staticmethod
    def test_invalid_requests(quadratic: BranchingMechanism) -> None:
        """Non-Feller mechanisms and record times before the start are rejected."""
        grid = LaplaceGrid.initial(unit_mass, 1.0, n_lambda=21)
        with pytest.raises(DomainError):
            solve_laplace_pde(grid, BranchingMechanism.stable(1.0, 1.5), 1.0)
        with pytest.raises(DomainError):
            solve_laplace_pde(grid, quadratic, 1.0, record_times=[0.0])
        with pytest.raises(DomainError):
            solve_laplace_pde(grid, quadratic, 0.0)

    @staticmethod
    def test_grid_error_estimate(quadratic: BranchingMechanism) -> None:
        """Coarse and fine runs agree to a percent."""
        grid, errors = grid_error_estimate(
            unit_mass,
            1.0,
            quadratic,
            [0.5, 1.0],
            [0.2, 1.0, 5.0],
            n_lambda=61,
            lambda_max=100.0,
        )
        assert errors.shape == (2, 3), "One error per time and lambda."
        assert np.all(errors < 2e-2), f"Grid errors too large: {errors}."
        assert np.allclose(grid.times, [0.0, 0.5, 1.0]), "Coarse grid times."

    @staticmethod
    @pytest.mark.slow
    def test_agrees_with_random_trees(quadratic: BranchingMechanism) -> None:
        """Grid and random-tree Monte Carlo estimate the same transform."""
        probes = [0.2, 1.0, 5.0]
        grid, errors = grid_error_estimate(
            unit_mass, 1.0, quadratic, [1.0], probes, n_lambda=121
        )
        estimate = mc_weak_solution(
            1.0, 1.0, lambda rng, size: np.ones(size), quadratic, probes, 20_000, 3
        )
        for j, lam in enumerate(probes):
            tolerance = 4.0 * estimate.stderrs[j] + errors[0, j]
            assert abs(estimate.means[j] - grid.at(1.0, lam)) <= tolerance, (
                f"Routes disagree at lambda = {lam}."
            )
