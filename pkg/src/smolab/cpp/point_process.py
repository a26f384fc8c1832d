import logging
from dataclasses import dataclass

import numpy as np

from ..misc.errors import DomainError
from ..misc.random import as_generator

_logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CppSample:
    """Brownian coalescent point process restricted to ``(0, L] x [floor, inf)``.

    Points have intensity ``dl dt / t^2``. Each point ``(l, t)`` is a branch of
    height ``t`` that merges into the nearest taller branch on its left; the
    eternal branch sits at ``l = 0``.

    Attributes:
        length (float): Window length ``L``.
        floor (float): Smallest height represented.
        l (np.ndarray): Positions, increasing.
        t (np.ndarray): Heights, aligned with ``l``.
    """

    length: float
    floor: float
    l: np.ndarray
    t: np.ndarray

    def __post_init__(self) -> None:
        if not (self.length > 0 and self.floor > 0):
            raise DomainError("Window length and floor must be positive")
        if self.l.shape != self.t.shape:
            raise DomainError("Positions and heights must be aligned")

    @property
    def n_points(self) -> int:
        return int(self.l.size)

    def first_taller(self, height: float) -> int:
        """Index of the left-most point taller than ``height``, or -1."""
        idx = np.flatnonzero(self.t > height)
        return int(idx[0]) if idx.size else -1

    def refine(self, new_floor: float, rng: np.random.Generator) -> "CppSample":
        """Add the points with height in ``[new_floor, floor)``.

        The added band has intensity ``L (1/new_floor - 1/floor)``; its heights
        have ``1/t`` uniform on ``(1/floor, 1/new_floor]``.
        """
        if not 0 < new_floor <= self.floor:
            raise DomainError(f"New floor {new_floor} must lie in (0, {self.floor}]")
        if new_floor == self.floor:
            return self
        inv_lo, inv_hi = 1.0 / self.floor, 1.0 / new_floor
        n = rng.poisson(self.length * (inv_hi - inv_lo))
        l_new = self.length * (1.0 - rng.random(n))
        t_new = 1.0 / (inv_hi - (inv_hi - inv_lo) * rng.random(n))
        return self._merge(self.length, new_floor, l_new, t_new)

    def extend(self, rng: np.random.Generator) -> "CppSample":
        """Double the window by sampling ``(L, 2L]`` independently."""
        n = rng.poisson(self.length / self.floor)
        l_new = self.length + self.length * (1.0 - rng.random(n))
        t_new = self.floor / (1.0 - rng.random(n))
        _logger.debug(f"CPP window extended to {2.0 * self.length}")
        return self._merge(2.0 * self.length, self.floor, l_new, t_new)

    def truncate(self, length: float) -> "CppSample":
        """Keep the points with ``l <= length``."""
        if not 0 < length <= self.length:
            raise DomainError(f"Truncation {length} must lie in (0, {self.length}]")
        keep = self.l <= length
        return CppSample(float(length), self.floor, self.l[keep], self.t[keep])

    def _merge(
        self, length: float, floor: float, l_new: np.ndarray, t_new: np.ndarray
    ) -> "CppSample":
        l_all = np.concatenate((self.l, l_new))
        t_all = np.concatenate((self.t, t_new))
        order = np.argsort(l_all, kind="stable")
        return CppSample(float(length), float(floor), l_all[order], t_all[order])


def sample_cpp(
    length: float, floor: float, rng: np.random.Generator | int
) -> CppSample:
    """Sample a Brownian CPP on ``(0, length] x [floor, inf)``.

    ``N ~ Poisson(length / floor)`` points with uniform positions and heights
    ``floor / U``.

    Args:
        length (float): Window length ``L``.
        floor (float): Height floor.
        rng (np.random.Generator | int): Random stream or integer seed.

    Returns:
        CppSample: Points sorted by position.
    """
    if not (length > 0 and floor > 0):
        raise DomainError("Window length and floor must be positive")
    generator = as_generator(rng)
    n = generator.poisson(length / floor)
    l = length * (1.0 - generator.random(n))
    t = floor / (1.0 - generator.random(n))
    order = np.argsort(l, kind="stable")
    return CppSample(float(length), float(floor), l[order], t[order])


def scale_cpp(cpp: CppSample, tau: float) -> CppSample:
    """Image of ``cpp`` under ``(l, t) -> (tau l, tau t)``; equal in law to a fresh CPP."""
    if not tau > 0:
        raise DomainError(f"Scale must be positive, got {tau}")
    return CppSample(tau * cpp.length, tau * cpp.floor, tau * cpp.l, tau * cpp.t)
