import logging
import math
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np
from scipy.stats import wasserstein_distance

from ..mechanism import BranchingMechanism, FlowEvaluator
from ..misc.errors import DomainError
from ..misc.random import as_generator

_logger = logging.getLogger(__name__)

MIN_ENSEMBLE = 100
DEFAULT_GRID = 256
MAX_GRID = 4096


@dataclass(frozen=True)
class PicardResult:
    """Final iterate of the McKean-Vlasov fixed-point iteration.

    Attributes:
        delta (float): Inverse population size.
        times (np.ndarray): Grid, from 0 to the horizon.
        ensemble (np.ndarray): Trajectories, shape ``(ensemble_size, n_grid)``.
        distances (List[float]): Wasserstein-1 distances between the horizon
            marginals of successive iterates.
    """

    delta: float
    times: np.ndarray
    ensemble: np.ndarray
    distances: List[float]

    @property
    def final(self) -> np.ndarray:
        return self.ensemble[:, -1]

    def marginal(self, t: float) -> np.ndarray:
        return self.ensemble[:, int(np.argmin(np.abs(self.times - t)))]


def _clock_grid(delta: float, horizon: float, n_grid: int) -> np.ndarray:
    """Grid uniform in the jump clock ``s = log((t + delta) / delta)``."""
    s = np.linspace(0.0, math.log1p(horizon / delta), n_grid)
    t = delta * np.expm1(s)
    t[-1] = horizon
    return t


def _iterate(
    previous: Optional[np.ndarray],
    x0: np.ndarray,
    times: np.ndarray,
    delta: float,
    evaluator: FlowEvaluator,
    rng: np.random.Generator,
) -> np.ndarray:
    """Apply the fixed-point map once; ``previous`` supplies the jump sizes."""
    n, n_grid = x0.size, times.size
    if previous is None:
        return evaluator.flow(x0[:, None], np.broadcast_to(times, (n, n_grid)))
    s_step = math.log1p(times[-1] / delta) / (n_grid - 1)
    values = np.empty((n, n_grid))
    cur_x, cur_t, cur_s = x0.copy(), np.zeros(n), np.zeros(n)
    active = np.arange(n)
    while active.size:
        next_s = cur_s[active] + rng.exponential(size=active.size)
        next_t = delta * np.expm1(next_s)
        seg = (times[None, :] >= cur_t[active, None]) & (times[None, :] < next_t[:, None])
        rows, cols = np.nonzero(seg)
        who = active[rows]
        values[who, cols] = evaluator.flow(cur_x[who], times[cols] - cur_t[who])
        jumping = next_t <= times[-1]
        idx = active[jumping]
        if idx.size:
            nearest = np.minimum(np.rint(next_s[jumping] / s_step).astype(int), n_grid - 1)
            donors = rng.integers(previous.shape[0], size=idx.size)
            sizes = previous[donors, nearest]
            cur_x[idx] = evaluator.flow(cur_x[idx], next_t[jumping] - cur_t[idx]) + sizes
            cur_t[idx] = next_t[jumping]
            cur_s[idx] = next_s[jumping]
        active = idx
    return values


def _run(
    nu: Callable[[np.random.Generator, int], np.ndarray],
    delta: float,
    evaluator: FlowEvaluator,
    horizon: float,
    ensemble_size: int,
    iterations: int,
    n_grid: int,
    rng: np.random.Generator,
) -> PicardResult:
    times = _clock_grid(delta, horizon, n_grid)
    previous = None
    distances: List[float] = []
    for k in range(iterations + 1):
        x0 = np.asarray(nu(rng, ensemble_size), dtype=float)
        if x0.shape != (ensemble_size,) or np.any(x0 < 0):
            raise DomainError("Initial law must yield non-negative masses")
        current = _iterate(previous, x0, times, delta, evaluator, rng)
        if previous is not None:
            distances.append(float(wasserstein_distance(previous[:, -1], current[:, -1])))
            _logger.debug(f"Picard iterate {k}: W1 to previous = {distances[-1]:.4e}")
        previous = current
    return PicardResult(float(delta), times, previous, distances)


def picard_mkv(
    nu: Callable[[np.random.Generator, int], np.ndarray],
    delta: float,
    mechanism: BranchingMechanism,
    horizon: float,
    ensemble_size: int,
    iterations: int,
    rng: np.random.Generator | int,
    n_grid: int = DEFAULT_GRID,
    grid_tol: Optional[float] = None,
) -> PicardResult:
    """Solve the McKean-Vlasov equation by Picard iteration on a particle ensemble.

    A trajectory follows the flow between the jumps of a Poisson clock of rate
    ``1/(t + delta)``, sampled by time change, and jumps by a mass drawn from the
    previous iterate's ensemble at the nearest grid time. Iterate 0 has no jumps.

    Args:
        nu (Callable): Initial law sampler ``(rng, size) -> masses``.
        delta (float): Inverse population size, positive.
        mechanism (BranchingMechanism): Depletion function.
        horizon (float): Final time ``T``.
        ensemble_size (int): Trajectories per iterate, at least 100.
        iterations (int): Number of applications of the map, at least 1.
        rng (np.random.Generator | int): Random stream or integer seed.
        n_grid (int): Size of the marginal grid.
        grid_tol (Optional[float]): When given, double the grid until the final
            marginals of the two finest grids are within ``grid_tol`` (relative
            Wasserstein-1).

    Returns:
        PicardResult: The last iterate.
    """
    if not delta > 0:
        raise DomainError("Picard iteration needs delta > 0")
    if not horizon > 0:
        raise DomainError(f"Horizon must be positive, got {horizon}")
    if iterations < 1:
        raise DomainError(f"Need at least one iteration, got {iterations}")
    if ensemble_size < MIN_ENSEMBLE:
        raise DomainError(
            f"Ensembles below {MIN_ENSEMBLE} give too noisy marginals, got {ensemble_size}"
        )
    generator = as_generator(rng)
    evaluator = FlowEvaluator(mechanism)
    if grid_tol is None:
        return _run(nu, delta, evaluator, horizon, ensemble_size, iterations, n_grid, generator)

    # Common random numbers across resolutions.
    base_seed = int(generator.integers(2**63))
    coarse = _run(
        nu, delta, evaluator, horizon, ensemble_size, iterations, n_grid,
        np.random.default_rng(base_seed),
    )
    while n_grid < MAX_GRID:
        n_grid *= 2
        fine = _run(
            nu, delta, evaluator, horizon, ensemble_size, iterations, n_grid,
            np.random.default_rng(base_seed),
        )
        gap = wasserstein_distance(coarse.final, fine.final) / max(fine.final.mean(), 1e-300)
        _logger.debug(f"Picard grid {n_grid}: relative W1 to coarser grid {gap:.3e}")
        coarse = fine
        if gap <= grid_tol:
            break
    return coarse
