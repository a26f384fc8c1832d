import math

import numpy as np
import pytest

from smolab.csbp import (
    ShiftedMechanism,
    extinction_time_cdf,
    feller_laplace_exponent,
    feller_transition_sample,
    tree_branching_laplace_mc,
)
from smolab.mechanism import BranchingMechanism
from smolab.misc.errors import DomainError, UnsupportedMechanismError
from smolab.smoluchowski import MarkedTree, propagate_marks, random_binary_tree


class TestShiftedMechanism:
    """Class for testing the shifted Feller mechanism."""

    @staticmethod
    def test_critical_coefficients(quadratic: BranchingMechanism) -> None:
        """Without shift u_t(lambda) = lambda / (1 + c t lambda)."""
        assert ShiftedMechanism(quadratic).feller_coefficients(2.0) == (1.0, 2.0), (
            "r = 0 should give (1, c t)."
        )

    @staticmethod
    def test_small_shift_continuity(quadratic: BranchingMechanism) -> None:
        """Coefficients are continuous as r goes to 0."""
        a, b = ShiftedMechanism(quadratic, 1e-9).feller_coefficients(2.0)
        assert a == pytest.approx(1.0) and b == pytest.approx(2.0), "Limit r -> 0."

    @staticmethod
    def test_phi(quadratic: BranchingMechanism) -> None:
        """phi(t) = 1/t without shift; the supercritical limit is (r/c)^beta."""
        assert math.isclose(ShiftedMechanism(quadratic).phi(4.0), 0.25), "phi(4) = 1/4."
        assert ShiftedMechanism(quadratic).phi(math.inf) == 0.0, "Critical CSBP dies."
        sm = ShiftedMechanism.supercritical(quadratic)
        assert sm.r == 1.0, "The supercritical shift is beta."
        assert math.isclose(sm.phi(math.inf), 1.0), "Ultimate extinction rate is 1."
        assert sm.phi(1.0) > sm.phi(math.inf), "phi decreases in time."

    @staticmethod
    def test_invalid_arguments(quadratic: BranchingMechanism) -> None:
        """Non-finite shifts and non-positive times are rejected."""
        with pytest.raises(DomainError):
            ShiftedMechanism(quadratic, math.nan)
        with pytest.raises(DomainError):
            ShiftedMechanism(quadratic).phi(0.0)
        with pytest.raises(DomainError):
            ShiftedMechanism(quadratic).feller_coefficients(-1.0)

    @staticmethod
    def test_non_feller() -> None:
        """Exact transitions exist only for gamma = 2."""
        sm = ShiftedMechanism(BranchingMechanism.stable(1.0, 1.5))
        with pytest.raises(UnsupportedMechanismError):
            sm.feller_coefficients(1.0)
        with pytest.raises(UnsupportedMechanismError):
            feller_transition_sample(sm, 1.0, 1.0, 0)


class TestFellerTransitions:
    """Class for testing closed-form exponents and exact sampling."""

    @staticmethod
    def test_extinction_time_cdf(quadratic: BranchingMechanism) -> None:
        """P(extinct by t) = exp(-x / t) for the critical CSBP."""
        sm = ShiftedMechanism(quadratic)
        assert math.isclose(extinction_time_cdf(sm, 2.0, 1.0), math.exp(-2.0)), (
            "Extinction by time 1 from mass 2."
        )
        with pytest.raises(DomainError):
            extinction_time_cdf(sm, 0.0, 1.0)

    @staticmethod
    def test_laplace_exponent(quadratic: BranchingMechanism) -> None:
        """The exponent equals the flow of lambda, and a/b at lambda = inf."""
        sm = ShiftedMechanism(quadratic)
        values = feller_laplace_exponent(sm, 1.0, np.array([0.0, 1.0, math.inf]))
        assert np.allclose(values, [0.0, 0.5, 1.0]), f"Unexpected exponent {values}."
        assert math.isclose(feller_laplace_exponent(sm, 1.0, 1.0), 0.5), "Scalar call."

    @staticmethod
    def test_sample_matches_laplace(quadratic: BranchingMechanism) -> None:
        """E[exp(-lambda Z_t)] matches exp(-x u_t(lambda)) for exact samples."""
        for r in (0.0, 1.0):
            sm = ShiftedMechanism(quadratic, r)
            z = feller_transition_sample(sm, 2.0, 1.0, 11, size=20000)
            estimate = np.exp(-z).mean()
            expected = math.exp(-2.0 * feller_laplace_exponent(sm, 1.0, 1.0))
            assert estimate == pytest.approx(expected, abs=0.015), (
                f"Laplace transform mismatch for r = {r}."
            )
            assert z.mean() == pytest.approx(2.0 * math.exp(r), rel=0.05), (
                "E[Z_t] = x exp(r t)."
            )

    @staticmethod
    def test_sample_zero_mass(quadratic: BranchingMechanism) -> None:
        """Zero stays at zero, and vector inputs keep their shape."""
        z = feller_transition_sample(ShiftedMechanism(quadratic), np.zeros(5), 1.0, 3)
        assert z.shape == (5,) and np.all(z == 0.0), "Zero is absorbing."

    @staticmethod
    def test_sample_invalid_mass(quadratic: BranchingMechanism) -> None:
        """Negative and infinite masses are rejected."""
        for x in (-1.0, math.inf):
            with pytest.raises(DomainError):
                feller_transition_sample(ShiftedMechanism(quadratic), x, 1.0, 0)


class TestTreeBranchingDuality:
    """Class for testing CSBP masses running down a fixed tree."""

    @staticmethod
    def test_two_leaf_tree(quadratic: BranchingMechanism) -> None:
        """E_1[exp(-Z_1 - Z_2)] = exp(-0.8) on the tree branching at 1/2."""
        tree = MarkedTree.from_nested(1.0, (0.5, "leaf", "leaf"))
        mean, stderr = tree_branching_laplace_mc(tree, 1.0, [1.0, 1.0], quadratic, 20000, 5)
        assert abs(mean - math.exp(-0.8)) < 4 * stderr + 1e-3, (
            f"Estimate {mean} +- {stderr} departs from exp(-0.8)."
        )

    @staticmethod
    def test_random_tree(quadratic: BranchingMechanism, rng: np.random.Generator) -> None:
        """The estimate agrees with exp(-x F) for marks propagated to the root."""
        tree = random_binary_tree(4, 2.0, rng)
        lambdas = [0.5, 1.0, 2.0, 0.25]
        mean, stderr = tree_branching_laplace_mc(tree, 0.7, lambdas, quadratic, 20000, rng)
        expected = math.exp(-0.7 * propagate_marks(tree, lambdas, quadratic))
        assert abs(mean - expected) < 4 * stderr + 1e-3, "Duality with the flow fails."

    @staticmethod
    def test_argument_checks(quadratic: BranchingMechanism) -> None:
        """One non-negative lambda per leaf and at least two replicates."""
        tree = MarkedTree.from_nested(1.0, (0.5, "leaf", "leaf"))
        with pytest.raises(DomainError):
            tree_branching_laplace_mc(tree, 1.0, [1.0], quadratic, 10, 0)
        with pytest.raises(DomainError):
            tree_branching_laplace_mc(tree, 1.0, [1.0, -1.0], quadratic, 10, 0)
        with pytest.raises(DomainError):
            tree_branching_laplace_mc(tree, 1.0, [1.0, 1.0], quadratic, 1, 0)
