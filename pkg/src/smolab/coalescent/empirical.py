from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..misc.errors import DomainError

WEIGHT_ATOL = 1e-12


@dataclass(frozen=True)
class GeneticComposition:
    """Gene-lineage counts per species of a nested coalescent state.

    Attributes:
        species (tuple): One count per species, each at least 1.
    """

    species: tuple

    def __post_init__(self) -> None:
        if any(int(k) != k or k < 1 for k in self.species):
            raise DomainError("Every species carries at least one gene lineage")

    @classmethod
    def from_counts(cls, counts: Sequence[int]) -> "GeneticComposition":
        return cls(tuple(int(k) for k in counts))

    @property
    def n_species(self) -> int:
        return len(self.species)

    @property
    def n_genes(self) -> int:
        return int(sum(self.species))


@dataclass(frozen=True)
class EmpiricalMeasure:
    """Weighted atoms on ``[0, inf)``.

    Atoms are stored sorted by mass with merged duplicates; weights sum to one.

    Attributes:
        masses (np.ndarray): Distinct non-negative atom locations, increasing.
        weights (np.ndarray): Matching non-negative weights.
    """

    masses: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        if self.masses.shape != self.weights.shape:
            raise DomainError("Masses and weights must have the same shape")
        if np.any(self.masses < 0) or np.any(self.weights < 0):
            raise DomainError("Masses and weights must be non-negative")
        if abs(float(self.weights.sum()) - 1.0) > WEIGHT_ATOL:
            raise DomainError(f"Weights sum to {self.weights.sum()}, expected 1")

    @classmethod
    def from_atoms(
        cls, masses: Sequence[float], weights: Sequence[float]
    ) -> "EmpiricalMeasure":
        """Build a normalized measure, merging atoms with equal mass."""
        m = np.asarray(masses, dtype=float)
        w = np.asarray(weights, dtype=float)
        if m.size == 0:
            raise DomainError("A measure needs at least one atom")
        uniq, inverse = np.unique(m, return_inverse=True)
        merged = np.bincount(inverse, weights=w, minlength=uniq.size)
        return cls(uniq, merged / merged.sum())

    def moment(self, k: int) -> float:
        """Return ``int x^k`` against the measure."""
        return float(np.sum(self.weights * self.masses**k))

    def laplace(self, lam: float) -> float:
        """Return ``int exp(-lam x)`` against the measure."""
        return float(np.sum(self.weights * np.exp(-lam * self.masses)))

    def as_dict(self) -> dict:
        return {float(m): float(w) for m, w in zip(self.masses, self.weights)}


def empirical(composition: GeneticComposition) -> EmpiricalMeasure:
    """Empirical distribution of gene counts per species, weight ``1/s`` each.

    Args:
        composition (GeneticComposition): Current nested state, ``s >= 1``.

    Returns:
        EmpiricalMeasure: Unrescaled measure on the integer counts.
    """
    counts = np.asarray(composition.species, dtype=float)
    if counts.size == 0:
        raise DomainError("Empirical measure needs at least one species")
    return EmpiricalMeasure.from_atoms(counts, np.full(counts.size, 1.0 / counts.size))


def rescale(measure: EmpiricalMeasure, n: int) -> EmpiricalMeasure:
    """Divide every atom mass by ``n``; weights are unchanged."""
    if n < 1:
        raise DomainError(f"Rescaling factor must be >= 1, got {n}")
    return EmpiricalMeasure(measure.masses / n, measure.weights.copy())
