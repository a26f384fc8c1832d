import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..mechanism import BranchingMechanism
from ..misc.errors import DomainError, UnsupportedMechanismError
from ..misc.random import as_generator
from ..smoluchowski.yule_tree import MarkedTree

_logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ShiftedMechanism:
    """CSBP mechanism ``psi(lambda) - r lambda`` built on a stable ``psi``.

    ``r = 0`` is the plain CSBP and ``r = beta`` the supercritical process used by
    the branching particle system.

    Attributes:
        base (BranchingMechanism): Stable mechanism ``c x^gamma``.
        r (float): Linear shift.
    """

    base: BranchingMechanism
    r: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.r):
            raise DomainError(f"Shift must be finite, got {self.r}")

    @classmethod
    def supercritical(cls, base: BranchingMechanism) -> "ShiftedMechanism":
        """The ``r = beta`` shift of ``base``."""
        return cls(base, base.beta)

    @property
    def c(self) -> float:
        return self.base.c

    @property
    def beta(self) -> float:
        return self.base.beta

    def phi(self, t: float) -> float:
        """Limit of the Laplace exponent as ``lambda -> inf`` after time ``t``.

        ``(r / c / (1 - exp(-r t / beta)))^beta``, or ``(beta / (c t))^beta`` when
        ``r = 0``. ``t = inf`` is allowed.
        """
        if not t > 0:
            raise DomainError(f"Time must be positive, got {t}")
        c, beta, r = self.c, self.beta, self.r
        if r == 0.0:
            return 0.0 if math.isinf(t) else (beta / (c * t)) ** beta
        if math.isinf(t):
            return (r / c) ** beta if r > 0 else 0.0
        return (r / c / -math.expm1(-r * t / beta)) ** beta

    def feller_coefficients(self, t: float) -> Tuple[float, float]:
        """Coefficients ``(a, b)`` of ``u_t(lambda) = a lambda / (1 + b lambda)``.

        ``a = exp(r t)`` and ``b = c (exp(r t) - 1) / r``, tending to ``(1, c t)`` as
        ``r -> 0``.
        """
        _require_feller(self.base)
        if not t > 0:
            raise DomainError(f"Transition time must be positive, got {t}")
        if self.r == 0.0:
            return 1.0, self.c * t
        return math.exp(self.r * t), self.c * math.expm1(self.r * t) / self.r


def _require_feller(base: BranchingMechanism) -> None:
    if not base.is_feller:
        raise UnsupportedMechanismError(
            f"Exact CSBP transitions need gamma = 2, got gamma = {base.gamma}"
        )


def extinction_time_cdf(sm: ShiftedMechanism, x: float, t: float) -> float:
    """Probability that the CSBP started at ``x`` is extinct by time ``t``.

    Args:
        sm (ShiftedMechanism): Mechanism with shift ``r``.
        x (float): Initial mass, positive.
        t (float): Time, positive (``math.inf`` gives the ultimate extinction).

    Returns:
        float: ``exp(-x phi_r(t))``.
    """
    if not x > 0:
        raise DomainError(f"Initial mass must be positive, got {x}")
    return math.exp(-x * sm.phi(t))


def feller_laplace_exponent(
    sm: ShiftedMechanism, t: float, lam: float | np.ndarray
) -> float | np.ndarray:
    """Closed-form Laplace exponent ``u_t(lambda)`` of the Feller CSBP.

    ``E_x[exp(-lambda Z_t)] = exp(-x u_t(lambda))`` where ``u`` solves
    ``du/dt = -(c u^2 - r u)`` from ``lambda``.
    """
    lam_arr = np.asarray(lam, dtype=float)
    if np.any(lam_arr < 0):
        raise DomainError("Laplace arguments must be non-negative")
    a, b = sm.feller_coefficients(t)
    with np.errstate(invalid="ignore"):
        out = np.where(np.isinf(lam_arr), a / b, a * lam_arr / (1.0 + b * lam_arr))
    return float(out) if out.ndim == 0 else out


def feller_transition_sample(
    sm: ShiftedMechanism,
    x: float | np.ndarray,
    t: float,
    rng: np.random.Generator | int,
    size: Optional[int] = None,
) -> float | np.ndarray:
    """Exact sample of ``Z_t`` given ``Z_0 = x`` for the Feller CSBP.

    The fractional-linear exponent makes ``Z_t`` a compound Poisson sum: a
    ``Poisson(x a / b)`` number of exponential jumps of mean ``b``.

    Args:
        sm (ShiftedMechanism): Mechanism with ``gamma = 2``.
        x (float | np.ndarray): Initial mass(es), non-negative.
        t (float): Transition time, positive.
        rng (np.random.Generator | int): Random stream or integer seed.
        size (Optional[int]): Number of samples for a scalar ``x``.

    Returns:
        float | np.ndarray: Sample(s) of ``Z_t``.

    Raises:
        UnsupportedMechanismError: If ``gamma != 2``.
        DomainError: If ``t <= 0`` or ``x < 0``.
    """
    a, b = sm.feller_coefficients(t)
    x_arr = np.asarray(x, dtype=float)
    if np.any(np.isnan(x_arr)) or np.any(x_arr < 0) or np.any(np.isinf(x_arr)):
        raise DomainError(f"Initial mass must be finite and non-negative, got {x}")
    generator = as_generator(rng)
    shape = size if (size is not None and x_arr.ndim == 0) else x_arr.shape
    n_jumps = generator.poisson(x_arr * a / b, size=shape)
    # numpy returns 0 for shape-0 gamma draws
    out = generator.gamma(n_jumps, b)
    return float(out) if np.ndim(out) == 0 else out


def tree_branching_laplace_mc(
    tree: MarkedTree,
    x: float,
    lambdas: Sequence[float],
    mechanism: BranchingMechanism,
    replicates: int,
    rng: np.random.Generator | int,
) -> Tuple[float, float]:
    """Estimate ``E_x[exp(-<lambda, Z_T>)]`` for CSBP masses running down a tree.

    The root particle starts with mass ``x``; at each branch time the mass is
    duplicated and both copies evolve independently until the leaves.

    Args:
        tree (MarkedTree): Fixed tree.
        x (float): Root mass, non-negative.
        lambdas (Sequence[float]): One Laplace argument per leaf.
        mechanism (BranchingMechanism): Feller mechanism.
        replicates (int): Number of runs.
        rng (np.random.Generator | int): Random stream or integer seed.

    Returns:
        Tuple[float, float]: Sample mean and its standard error.
    """
    leaves = tree.leaves
    lam = np.asarray(lambdas, dtype=float)
    if lam.shape != (len(leaves),) or np.any(lam < 0):
        raise DomainError(f"Expected {len(leaves)} non-negative Laplace arguments")
    if replicates < 2:
        raise DomainError(f"Need at least two replicates, got {replicates}")
    sm = ShiftedMechanism(mechanism)
    generator = as_generator(rng)
    mass_end = [np.empty(0)] * tree.n_particles
    parent = {k: p for p, kids in enumerate(tree.children) for k in kids}
    for p in range(tree.n_particles):
        z = np.full(replicates, float(x)) if p == 0 else mass_end[parent[p]]
        duration = tree.end[p] - tree.start[p]
        mass_end[p] = (
            feller_transition_sample(sm, z, duration, generator) if duration > 0 else z
        )
    exponent = sum(l * mass_end[leaf] for l, leaf in zip(lam, leaves))
    values = np.exp(-exponent)
    return float(values.mean()), float(values.std(ddof=1) / math.sqrt(replicates))
