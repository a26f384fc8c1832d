import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..mechanism import BranchingMechanism
from ..misc.errors import DomainError
from ..misc.random import run_replicates
from .yule_tree import propagate_marks, sample_inhomogeneous_yule

_logger = logging.getLogger(__name__)

MarkSampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True)
class WeakSolutionEstimate:
    """Monte Carlo estimate of ``<mu_T, exp(-lambda .)>`` at a set of probes.

    Attributes:
        horizon (float): Time ``T`` of the estimate.
        probes (np.ndarray): Laplace arguments.
        samples (np.ndarray): Root values, one per replicate.
        means (np.ndarray): Sample mean of ``exp(-lambda F)`` per lambda.
        stderrs (np.ndarray): Standard error of each mean.
    """

    horizon: float
    probes: np.ndarray
    samples: np.ndarray
    means: np.ndarray
    stderrs: np.ndarray

    @classmethod
    def from_samples(
        cls, horizon: float, probes: Sequence[float], samples: np.ndarray
    ) -> "WeakSolutionEstimate":
        lam = np.asarray(probes, dtype=float)
        if np.any(lam < 0):
            raise DomainError("Laplace probes must be non-negative")
        x = np.asarray(samples, dtype=float)
        with np.errstate(invalid="ignore"):
            values = np.exp(-np.outer(x, lam))
        # exp(-0 * inf) is 1
        values[:, lam == 0] = 1.0
        n = x.size
        stderr = values.std(axis=0, ddof=1) / np.sqrt(n) if n > 1 else np.zeros(lam.size)
        return cls(float(horizon), lam, x, values.mean(axis=0), stderr)

    def csv_rows(self) -> list:
        return [
            (float(l), float(m), float(s))
            for l, m, s in zip(self.probes, self.means, self.stderrs)
        ]

    def mean_mass(self) -> float:
        return float(np.mean(self.samples))


def mc_weak_solution(
    horizon: float,
    delta: float,
    mark_sampler: MarkSampler,
    mechanism: BranchingMechanism,
    probes: Sequence[float],
    replicates: int,
    seed: int,
    workers: int = 1,
) -> WeakSolutionEstimate:
    """Finite-population weak solution through random trees.

    Each replicate samples a tree with branching rate ``1/(T - t + delta)``, marks
    its leaves i.i.d. from the initial distribution and propagates the marks to
    the root.

    Args:
        horizon (float): Time ``T``.
        delta (float): Inverse population size, strictly positive.
        mark_sampler (MarkSampler): ``(rng, size) -> marks`` from ``nu``.
        mechanism (BranchingMechanism): Depletion function.
        probes (Sequence[float]): Laplace arguments.
        replicates (int): Number of trees.
        seed (int): Seed of the run.
        workers (int): Worker pool size.

    Returns:
        WeakSolutionEstimate: Samples of the root value and Laplace estimates.
    """
    if not delta > 0:
        raise DomainError("The finite-population route needs delta > 0")
    if replicates < 1:
        raise DomainError(f"Need at least one replicate, got {replicates}")

    def task(rng: np.random.Generator) -> float:
        tree = sample_inhomogeneous_yule(horizon, delta, rng)
        marks = np.asarray(mark_sampler(rng, tree.n_leaves), dtype=float)
        return propagate_marks(tree, marks, mechanism)

    samples = np.asarray(run_replicates(task, seed, replicates, workers))
    _logger.info(
        f"Weak solution at T = {horizon}, delta = {delta}: mean mass "
        f"{samples.mean():.6g} over {replicates} trees"
    )
    return WeakSolutionEstimate.from_samples(horizon, probes, samples)


def infinite_pop_weak_solution(
    horizon: float,
    mechanism: BranchingMechanism,
    probes: Sequence[float],
    upsilon_samples: np.ndarray,
    replicates: int | None = None,
) -> WeakSolutionEstimate:
    """Infinite-population solution from the self-similar profile.

    The mass at time ``T`` is ``T^(-beta) Upsilon``, with ``Upsilon`` drawn from a
    bank of profile samples for the same mechanism.

    Args:
        horizon (float): Time ``T > 0``.
        mechanism (BranchingMechanism): Depletion function, fixes ``beta``.
        probes (Sequence[float]): Laplace arguments.
        upsilon_samples (np.ndarray): Profile samples.
        replicates (int | None): Use only the first ``replicates`` samples.

    Returns:
        WeakSolutionEstimate: Scaled samples and Laplace estimates.
    """
    if not horizon > 0:
        raise DomainError(f"Horizon must be positive, got {horizon}")
    bank = np.asarray(upsilon_samples, dtype=float)
    if bank.size == 0:
        raise DomainError("The profile bank is empty; run the upsilon-bank step first")
    if replicates is not None:
        if replicates > bank.size:
            raise DomainError(
                f"Bank holds {bank.size} samples, {replicates} were requested"
            )
        bank = bank[:replicates]
    samples = horizon ** (-mechanism.beta) * bank
    return WeakSolutionEstimate.from_samples(horizon, probes, samples)
