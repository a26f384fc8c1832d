import logging
import math
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from ..misc.errors import DomainError
from ..misc.random import run_replicates
from .feller import ShiftedMechanism

_logger = logging.getLogger(__name__)

DEFAULT_DEPTH_CAP = 60
# Below this survival probability a line is scored extinct without sampling.
NEGLIGIBLE = 1e-12
_NEGLIGIBLE_LOG = -math.log(NEGLIGIBLE)


@dataclass(frozen=True)
class ExtinctionEstimate:
    """Bracketed Monte Carlo estimate of the total-extinction probability ``h(x)``.

    ``lower`` scores every unresolved line as surviving, ``upper`` replaces it by
    the bound ``exp(-y (beta/c)^beta)`` on its extinction probability.

    Attributes:
        x (float): Initial mass.
        lower (float): Mean of the lower bracket.
        upper (float): Mean of the upper bracket.
        stderr (float): Larger of the two standard errors.
        n_capped (int): Replicates that hit the depth cap.
        flagged (bool): True when the bracket is wider than the requested tolerance.
    """

    x: float
    lower: float
    upper: float
    stderr: float
    n_capped: int
    flagged: bool

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    @property
    def status(self) -> str:
        return "inconclusive" if self.flagged else "ok"

    def as_dict(self) -> dict:
        return {
            "x": self.x,
            "lower": self.lower,
            "upper": self.upper,
            "stderr": self.stderr,
            "n_capped": self.n_capped,
            "status": self.status,
        }


def _zero_truncated_poisson(mean: float, rng: np.random.Generator) -> int:
    if mean > 1.0:
        while True:
            n = int(rng.poisson(mean))
            if n > 0:
                return n
    # Inverse CDF on (P(N = 0), 1].
    u = math.exp(-mean) + (1.0 - math.exp(-mean)) * (1.0 - rng.random())
    k, p = 0, math.exp(-mean)
    cdf = p
    while cdf < u:
        k += 1
        p *= mean / k
        cdf += p
        if p == 0.0:
            break
    return max(k, 1)


def _extinction_replicate(
    sm: ShiftedMechanism, x: float, depth_cap: int, rng: np.random.Generator
) -> Tuple[float, float, bool]:
    """One run of the branching particle system.

    Returns:
        Tuple[float, float, bool]: lower and upper bracket values and whether the
        depth cap was hit.
    """
    bound_rate = (sm.beta / sm.c) ** sm.beta
    # Extinction of the pending lines is at most exp(-bound_rate * pending_mass).
    stack = [(float(x), 0)]
    pending_mass = float(x)
    capped_mass = 0.0
    capped = False
    while stack:
        if bound_rate * (pending_mass + capped_mass) > _NEGLIGIBLE_LOG:
            return 0.0, math.exp(-bound_rate * (pending_mass + capped_mass)), capped
        mass, depth = stack.pop()
        pending_mass -= mass
        if depth >= depth_cap:
            capped = True
            capped_mass += mass
            continue
        tau = rng.exponential(1.0)
        a, b = sm.feller_coefficients(tau)
        jumps_mean = mass * a / b
        if rng.random() < math.exp(-jumps_mean) or -math.expm1(-jumps_mean) < NEGLIGIBLE:
            continue
        child = float(rng.gamma(_zero_truncated_poisson(jumps_mean, rng), b))
        stack.append((child, depth + 1))
        stack.append((child, depth + 1))
        pending_mass += 2.0 * child
    if capped:
        return 0.0, math.exp(-bound_rate * capped_mass), True
    return 1.0, 1.0, False


def branching_extinction_mc(
    sm: ShiftedMechanism,
    x: float,
    replicates: int,
    seed: int,
    depth_cap: int = DEFAULT_DEPTH_CAP,
    tolerance: float = 1e-2,
    workers: int = 1,
) -> ExtinctionEstimate:
    """Estimate the total-extinction probability of the branching CSBP.

    Particles branch at rate 1, duplicating their mass; masses follow the Feller
    CSBP with shift ``r``. Lines are explored depth first on an explicit stack.

    Args:
        sm (ShiftedMechanism): Feller mechanism, normally with ``r = beta``.
        x (float): Initial mass, positive.
        replicates (int): Number of runs, at least 2.
        seed (int): Seed of the run.
        depth_cap (int): Maximal number of branchings followed on a line.
        tolerance (float): Largest acceptable bracket width.
        workers (int): Worker pool size.

    Returns:
        ExtinctionEstimate: Brackets, flagged when wider than ``tolerance``.
    """
    if not x > 0:
        raise DomainError(f"Initial mass must be positive, got {x}")
    if depth_cap < 10:
        raise DomainError(f"depth_cap must be at least 10, got {depth_cap}")
    if replicates < 2:
        raise DomainError(f"Need at least two replicates, got {replicates}")
    sm.feller_coefficients(1.0)

    def task(rng: np.random.Generator) -> Tuple[float, float, bool]:
        return _extinction_replicate(sm, x, depth_cap, rng)

    runs = np.asarray(run_replicates(task, seed, replicates, workers), dtype=float)
    lower, upper = runs[:, 0], runs[:, 1]
    stderr = max(lower.std(ddof=1), upper.std(ddof=1)) / math.sqrt(replicates)
    estimate = ExtinctionEstimate(
        x=float(x),
        lower=float(lower.mean()),
        upper=float(upper.mean()),
        stderr=float(stderr),
        n_capped=int(runs[:, 2].sum()),
        flagged=bool(upper.mean() - lower.mean() > tolerance),
    )
    if estimate.flagged:
        _logger.warning(
            f"Extinction bracket [{estimate.lower:.4g}, {estimate.upper:.4g}] wider "
            f"than {tolerance}; reported as inconclusive"
        )
    return estimate
