import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from ..mechanism import BranchingMechanism, FlowEvaluator
from ..misc.errors import DomainError
from ..misc.random import as_generator

_logger = logging.getLogger(__name__)

# Nested description: "leaf" or (branch_time, left, right)
NestedTree = Union[str, Tuple[float, "NestedTree", "NestedTree"]]


@dataclass(frozen=True)
class MarkedTree:
    """Finite binary ultrametric tree embedded in time ``[0, horizon]``.

    Each particle (edge) lives from ``start`` to ``end``; particle 0 is the root,
    born at time 0. An internal particle ends at its branch time and has two
    children born at that time; a leaf ends at ``horizon``. Children always have
    larger ids than their parent, and leaves are ordered left to right.

    Attributes:
        horizon (float): Depth ``T`` of every leaf.
        start (tuple): Birth time of each particle.
        end (tuple): Branch time of each particle, ``horizon`` for leaves.
        children (tuple): Pair of child ids per particle, empty for leaves.
    """

    horizon: float
    start: tuple
    end: tuple
    children: tuple

    def __post_init__(self) -> None:
        if not self.horizon > 0:
            raise DomainError(f"Tree depth must be positive, got {self.horizon}")
        if self.start[0] != 0.0:
            raise DomainError("The root particle is born at time 0")
        for p, kids in enumerate(self.children):
            if kids:
                if len(kids) != 2 or min(kids) <= p:
                    raise DomainError("Internal particles have two later-indexed children")
                if self.end[p] >= self.horizon:
                    raise DomainError("Branch times must lie before the horizon")
                for k in kids:
                    if self.start[k] != self.end[p]:
                        raise DomainError("Children are born at their parent's branch time")
                    if self.children[k] and not self.end[k] > self.start[k]:
                        raise DomainError("Branch times increase strictly root to leaf")
            elif self.end[p] != self.horizon:
                raise DomainError("Every leaf sits at the horizon (ultrametric tree)")

    @property
    def n_particles(self) -> int:
        return len(self.start)

    @property
    def leaves(self) -> List[int]:
        """Leaf particle ids, left to right."""
        out, stack = [], [0]
        while stack:
            p = stack.pop()
            kids = self.children[p]
            if kids:
                stack.extend(reversed(kids))
            else:
                out.append(p)
        return out

    @property
    def n_leaves(self) -> int:
        return sum(1 for kids in self.children if not kids)

    def branch_times(self) -> List[float]:
        return sorted(self.end[p] for p, kids in enumerate(self.children) if kids)

    @classmethod
    def from_nested(cls, horizon: float, spec: NestedTree) -> "MarkedTree":
        """Build a tree from a nested description.

        ``"leaf"`` is a single branch; ``(t, left, right)`` branches at time ``t``.
        For example ``(0.0, "leaf", "leaf")`` is the two-leaf star tree.
        """
        start: List[float] = [0.0]
        end: List[float] = [0.0]
        children: List[tuple] = [()]
        pending = [(0, spec)]
        while pending:
            p, node = pending.pop(0)
            if node == "leaf":
                end[p] = float(horizon)
                continue
            t, left, right = node  # type: ignore[misc]
            end[p] = float(t)
            ids = []
            for sub in (left, right):
                start.append(float(t))
                end.append(float(horizon))
                children.append(())
                ids.append(len(start) - 1)
                pending.append((ids[-1], sub))
            children[p] = tuple(ids)
        return cls(float(horizon), tuple(start), tuple(end), tuple(children))


def _grow(horizon: float, branch_time_of, rng: np.random.Generator) -> MarkedTree:
    start: List[float] = [0.0]
    end: List[float] = [0.0]
    children: List[tuple] = [()]
    queue = [0]
    while queue:
        p = queue.pop(0)
        tau = branch_time_of(start[p], rng)
        if tau >= horizon:
            end[p] = horizon
            continue
        end[p] = tau
        ids = []
        for _ in range(2):
            start.append(tau)
            end.append(horizon)
            children.append(())
            ids.append(len(start) - 1)
        children[p] = tuple(ids)
        queue.extend(ids)
    return MarkedTree(horizon, tuple(start), tuple(end), tuple(children))


def sample_inhomogeneous_yule(
    horizon: float, delta: float, rng: np.random.Generator | int
) -> MarkedTree:
    """Sample a pure-birth tree with branching rate ``1 / (T - t + delta)``.

    The survival function of a particle born at ``s`` is
    ``(T - t + delta) / (T - s + delta)``, which is inverted exactly.

    Args:
        horizon (float): Stopping time ``T``.
        delta (float): Inverse population size, strictly positive.
        rng (np.random.Generator | int): Random stream or integer seed.

    Returns:
        MarkedTree: Tree with all leaves at ``T``.

    Raises:
        DomainError: If ``delta <= 0``; the infinite-population tree has infinitely
            many leaves and is only reached through the self-similar profile.
    """
    if not delta > 0:
        raise DomainError(
            "delta = 0 trees have infinitely many leaves; use the self-similar route"
        )
    if not horizon > 0:
        raise DomainError(f"Horizon must be positive, got {horizon}")
    generator = as_generator(rng)

    def branch_time(s: float, g: np.random.Generator) -> float:
        u = 1.0 - g.random()
        return horizon + delta - u * (horizon - s + delta)

    return _grow(float(horizon), branch_time, generator)


def random_binary_tree(
    n_leaves: int, horizon: float, rng: np.random.Generator | int
) -> MarkedTree:
    """Random ultrametric tree with ``n_leaves`` leaves and uniform branch times.

    ``n_leaves - 1`` branch times are uniform on ``(0, horizon)``; at each one a
    uniformly chosen live particle splits.
    """
    if n_leaves < 1:
        raise DomainError(f"Need at least one leaf, got {n_leaves}")
    generator = as_generator(rng)
    times = np.sort(generator.uniform(0.0, horizon, size=n_leaves - 1))
    start: List[float] = [0.0]
    end: List[float] = [float(horizon)]
    children: List[tuple] = [()]
    live = [0]
    for t in times:
        p = live.pop(int(generator.integers(len(live))))
        end[p] = float(t)
        ids = []
        for _ in range(2):
            start.append(float(t))
            end.append(float(horizon))
            children.append(())
            ids.append(len(start) - 1)
        children[p] = tuple(ids)
        live.extend(ids)
    return MarkedTree(float(horizon), tuple(start), tuple(end), tuple(children))


def propagate_marks(
    tree: MarkedTree, leaf_marks: Sequence[float], mechanism: BranchingMechanism
) -> float:
    """Propagate leaf marks to the root.

    Marks follow ``dx/dt = -psi(x)`` along each particle (from leaf to root) and
    add up where two particles merge. ``math.inf`` marks are allowed.

    Args:
        tree (MarkedTree): The tree.
        leaf_marks (Sequence[float]): One mark per leaf, in leaf order.
        mechanism (BranchingMechanism): Depletion function.

    Returns:
        float: Root value ``F(tree, marks)``.

    Raises:
        DomainError: If a mark is negative or NaN, or counts do not match.
    """
    leaves = tree.leaves
    if len(leaf_marks) != len(leaves):
        raise DomainError(f"Expected {len(leaves)} leaf marks, got {len(leaf_marks)}")
    flow = FlowEvaluator(mechanism).flow_scalar
    at_end = [0.0] * tree.n_particles
    for leaf, mark in zip(leaves, leaf_marks):
        mark = float(mark)
        if math.isnan(mark) or mark < 0:
            raise DomainError(f"Marks must be non-negative, got {mark}")
        at_end[leaf] = mark
    at_start = [0.0] * tree.n_particles
    for p in range(tree.n_particles - 1, -1, -1):
        kids = tree.children[p]
        if kids:
            at_end[p] = at_start[kids[0]] + at_start[kids[1]]
        at_start[p] = flow(at_end[p], tree.end[p] - tree.start[p])
    return at_start[0]


def tree_brackets(
    tree: MarkedTree, leaf_marks: Sequence[float], mechanism: BranchingMechanism
) -> Tuple[float, float]:
    """Closed-form brackets on the root value of :func:`propagate_marks`.

    The lower bracket merges all leaves at the leaves' level, the upper one merges
    them at the root (star tree).

    Returns:
        Tuple[float, float]: ``(flow(sum marks, T), sum flow(mark_i, T))``.
    """
    flow = FlowEvaluator(mechanism).flow_scalar
    marks = [float(w) for w in leaf_marks]
    lower = flow(math.fsum(marks), tree.horizon)
    upper = math.fsum(flow(w, tree.horizon) for w in marks)
    return lower, upper
