import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smolab.mechanism import BranchingMechanism, FlowEvaluator
from smolab.misc.errors import DomainError
from smolab.smoluchowski import (
    MarkedTree,
    propagate_marks,
    random_binary_tree,
    sample_inhomogeneous_yule,
    tree_brackets,
)


class TestMarkedTree:
    """Class for testing tree construction and validation."""

    @staticmethod
    def test_from_nested() -> None:
        """A three-leaf nested description gives five particles."""
        tree = MarkedTree.from_nested(1.0, (0.2, "leaf", (0.6, "leaf", "leaf")))
        assert tree.n_particles == 5, "Root, two children and two grandchildren."
        assert tree.n_leaves == 3, "Three leaves."
        assert tree.branch_times() == [0.2, 0.6], "Branch times sorted."
        assert len(tree.leaves) == 3 and tree.leaves[0] == 1, "Leaves left to right."

    @staticmethod
    def test_leaves_must_reach_horizon() -> None:
        """Ultrametric trees have every leaf at the horizon."""
        with pytest.raises(DomainError):
            MarkedTree(1.0, (0.0,), (0.5,), ((),))

    @staticmethod
    def test_children_born_at_branch_time() -> None:
        """A child born after its parent's branch time is rejected."""
        with pytest.raises(DomainError):
            MarkedTree(1.0, (0.0, 0.3, 0.4), (0.3, 1.0, 1.0), ((1, 2), (), ()))


class TestPropagateMarks:
    """Class for testing mark propagation from leaves to root."""

    @staticmethod
    def test_single_branch(quadratic: BranchingMechanism) -> None:
        """One leaf just follows the flow."""
        tree = MarkedTree.from_nested(2.0, "leaf")
        assert math.isclose(propagate_marks(tree, [1.0], quadratic), 1.0 / 3.0), (
            "flow(1, 2) = 1/3 for psi(x) = x^2."
        )

    @staticmethod
    def test_two_leaves(quadratic: BranchingMechanism) -> None:
        """flow(2 flow(1, 1/2), 1/2) = 0.8."""
        tree = MarkedTree.from_nested(1.0, (0.5, "leaf", "leaf"))
        assert math.isclose(propagate_marks(tree, [1.0, 1.0], quadratic), 0.8), (
            "Two unit leaves merging at 1/2 should give 0.8."
        )

    @staticmethod
    def test_star_tree_is_upper_bracket(quadratic: BranchingMechanism) -> None:
        """Branching at time 0 makes the root value the sum of the leaf flows."""
        tree = MarkedTree.from_nested(1.0, (0.0, "leaf", "leaf"))
        value = propagate_marks(tree, [1.0, 3.0], quadratic)
        _, upper = tree_brackets(tree, [1.0, 3.0], quadratic)
        assert math.isclose(value, upper), "The star tree attains the upper bracket."

    @staticmethod
    def test_infinite_marks(quadratic: BranchingMechanism) -> None:
        """Infinite leaf marks come down from infinity."""
        tree = MarkedTree.from_nested(1.0, (0.0, "leaf", "leaf"))
        value = propagate_marks(tree, [math.inf, math.inf], quadratic)
        assert math.isclose(value, 2.0 * FlowEvaluator(quadratic).phi(1.0)), (
            "Two infinite marks on the star tree give 2 phi(T)."
        )

    @staticmethod
    @pytest.mark.parametrize("marks", [[1.0], [1.0, -1.0], [1.0, math.nan]])
    def test_invalid_marks(quadratic: BranchingMechanism, marks: list) -> None:
        """Wrong counts, negative and NaN marks are rejected."""
        tree = MarkedTree.from_nested(1.0, (0.5, "leaf", "leaf"))
        with pytest.raises(DomainError):
            propagate_marks(tree, marks, quadratic)

    @staticmethod
    @settings(max_examples=40, deadline=None)
    @given(
        n_leaves=st.integers(min_value=1, max_value=8),
        gamma=st.floats(min_value=1.2, max_value=3.0),
        seed=st.integers(min_value=0, max_value=2**32 - 1),
    )
    def test_brackets_hold(n_leaves: int, gamma: float, seed: int) -> None:
        """flow(sum w, T) <= F(tree, w) <= sum flow(w, T) on random trees."""
        m = BranchingMechanism.stable(1.0, gamma)
        rng = np.random.default_rng(seed)
        tree = random_binary_tree(n_leaves, 1.5, rng)
        marks = rng.exponential(1.0, tree.n_leaves)
        value = propagate_marks(tree, marks, m)
        lower, upper = tree_brackets(tree, marks, m)
        slack = 1e-12 * max(upper, 1.0)
        assert lower - slack <= value <= upper + slack, (
            f"Root value {value} outside [{lower}, {upper}]."
        )


class TestSampling:
    """Class for testing random tree samplers."""

    @staticmethod
    def test_random_binary_tree() -> None:
        """The tree has the requested number of leaves below the horizon."""
        tree = random_binary_tree(4, 2.0, 0)
        assert tree.n_leaves == 4, "Four leaves requested."
        assert all(0 <= t < 2.0 for t in tree.branch_times()), "Branch times in (0, T)."

    @staticmethod
    def test_yule_needs_positive_delta() -> None:
        """delta = 0 trees have infinitely many leaves."""
        with pytest.raises(DomainError):
            sample_inhomogeneous_yule(1.0, 0.0, 0)

    @staticmethod
    def test_yule_leaf_count_mean() -> None:
        """Leaves are geometric with mean (T + delta) / delta."""
        rng = np.random.default_rng(1)
        counts = [sample_inhomogeneous_yule(1.0, 1.0, rng).n_leaves for _ in range(4000)]
        assert abs(np.mean(counts) - 2.0) < 0.12, f"Mean leaf count {np.mean(counts)}."

    @staticmethod
    def test_yule_deterministic() -> None:
        """Same seed, same tree."""
        a = sample_inhomogeneous_yule(2.0, 0.5, 42)
        b = sample_inhomogeneous_yule(2.0, 0.5, 42)
        assert a == b, "Trees drawn with the same seed should be equal."
