import logging
import math
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from ..mechanism import BranchingMechanism
from ..misc.errors import DomainError, StabilityError

_logger = logging.getLogger(__name__)

# Overshoot of the [0, 1] band tolerated and clipped; anything larger is fatal.
BAND_TOLERANCE = 1e-10

DEFAULT_LAMBDA_MIN = 1e-2
DEFAULT_LAMBDA_MAX = 1e3
DEFAULT_N_LAMBDA = 241
DEFAULT_SAFETY = 0.5


@dataclass(frozen=True)
class LaplaceGrid:
    """Laplace transforms ``u(t, lambda)`` of the mass distribution on a grid.

    The first node is ``lambda = 0`` where ``u = 1``; the remaining nodes are log
    spaced in ``[lambda_min, lambda_max]``.

    Attributes:
        lambdas (np.ndarray): Grid nodes, increasing, ``lambdas[0] == 0``.
        times (np.ndarray): Recorded times, increasing.
        values (np.ndarray): ``values[i, j] = u(times[i], lambdas[j])``.
        delta (float): Inverse population size in ``a(t) = 1 / (t + delta)``.
        dt (float): Time step used by the solver (0 before solving).
    """

    lambdas: np.ndarray
    times: np.ndarray
    values: np.ndarray
    delta: float
    dt: float = 0.0

    @classmethod
    def initial(
        cls,
        initial_transform: Callable[[np.ndarray], np.ndarray],
        delta: float,
        t0: float = 0.0,
        lambda_min: float = DEFAULT_LAMBDA_MIN,
        lambda_max: float = DEFAULT_LAMBDA_MAX,
        n_lambda: int = DEFAULT_N_LAMBDA,
    ) -> "LaplaceGrid":
        """Grid holding the initial condition at time ``t0``.

        Args:
            initial_transform (Callable): Laplace transform of the initial mass
                distribution, vectorized over ``lambda``.
            delta (float): Inverse population size, ``>= 0``.
            t0 (float): Starting time. Must be positive when ``delta == 0``.
            lambda_min (float): Smallest positive node.
            lambda_max (float): Largest node.
            n_lambda (int): Number of positive nodes.

        Returns:
            LaplaceGrid: Single-time grid.
        """
        if delta < 0 or t0 < 0:
            raise DomainError("delta and t0 must be non-negative")
        if delta == 0 and t0 == 0:
            raise DomainError("delta = 0 needs a positive start time t0")
        if not 0 < lambda_min < lambda_max or n_lambda < 3:
            raise DomainError("Need 0 < lambda_min < lambda_max and n_lambda >= 3")
        lambdas = np.concatenate(
            ([0.0], np.geomspace(lambda_min, lambda_max, n_lambda))
        )
        u0 = np.asarray(initial_transform(lambdas), dtype=float)
        u0[0] = 1.0
        if np.any(u0 < -BAND_TOLERANCE) or np.any(u0 > 1.0 + BAND_TOLERANCE):
            raise DomainError("A Laplace transform takes values in [0, 1]")
        return cls(lambdas, np.array([float(t0)]), np.clip(u0, 0.0, 1.0)[None, :], delta)

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def at(self, t: float, lam: float | np.ndarray) -> float | np.ndarray:
        """Interpolate ``u(t, lambda)`` (log-linear in ``lambda``) at a recorded time."""
        idx = int(np.argmin(np.abs(self.times - t)))
        if not math.isclose(self.times[idx], t, rel_tol=1e-9, abs_tol=1e-12):
            raise DomainError(f"Time {t} was not recorded")
        lam_arr = np.asarray(lam, dtype=float)
        if np.any(lam_arr < 0) or np.any(lam_arr > self.lambdas[-1]):
            raise DomainError("Lambda lies outside the grid")
        row = self.values[idx]
        positive = self.lambdas[1:]
        out = np.where(
            lam_arr == 0,
            1.0,
            np.interp(
                np.log(np.maximum(lam_arr, positive[0])), np.log(positive), row[1:]
            ),
        )
        # Below the first positive node interpolate linearly towards u(0) = 1.
        low = (lam_arr > 0) & (lam_arr < positive[0])
        if np.any(low):
            out = np.where(
                low, 1.0 + (row[1] - 1.0) * lam_arr / positive[0], out
            )
        return float(out) if out.ndim == 0 else out


def _curvature(u: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Non-uniform central second difference, with the outflow node copying its neighbour."""
    d = np.empty_like(u)
    left = (u[1:-1] - u[:-2]) / h[:-1]
    right = (u[2:] - u[1:-1]) / h[1:]
    d[1:-1] = 2.0 * (right - left) / (h[:-1] + h[1:])
    d[0] = 0.0
    d[-1] = d[-2]
    return d


def stable_time_step(
    lambdas: np.ndarray, mechanism: BranchingMechanism, a_max: float, safety: float
) -> float:
    """Largest explicit time step allowed by the diffusion and reaction terms."""
    h = np.diff(lambdas)
    diffusion = mechanism.c * lambdas[1:-1]
    dt_diff = float(np.min(h[:-1] * h[1:] / (2.0 * diffusion)))
    return safety * min(dt_diff, 1.0 / a_max)


def solve_laplace_pde(
    grid: LaplaceGrid,
    mechanism: BranchingMechanism,
    horizon: float,
    record_times: Optional[Sequence[float]] = None,
    safety: float = DEFAULT_SAFETY,
) -> LaplaceGrid:
    """Integrate ``du/dt = b lambda u'' + a(t) (u^2 - u)`` with ``a(t) = 1/(t + delta)``.

    Explicit Euler in time and central differences in ``lambda``. ``u(t, 0) = 1``
    is pinned and the last node uses an outflow condition.

    Args:
        grid (LaplaceGrid): Initial condition (its last recorded row is used).
        mechanism (BranchingMechanism): Quadratic mechanism, ``b = c``.
        horizon (float): Final time, larger than the start time.
        record_times (Optional[Sequence[float]]): Times to store, within the run.
            Defaults to the final time only.
        safety (float): Fraction of the stability limit used as time step.

    Returns:
        LaplaceGrid: Grid holding the start row and one row per recorded time.

    Raises:
        StabilityError: If ``u`` leaves ``[-1e-10, 1 + 1e-10]``.
    """
    if not mechanism.is_feller:
        raise DomainError("The Laplace PDE holds for quadratic mechanisms only")
    t = float(grid.times[-1])
    if not horizon > t:
        raise DomainError(f"Horizon {horizon} must exceed the start time {t}")
    wanted = sorted(set(float(s) for s in (record_times or [])) | {float(horizon)})
    if wanted[0] <= t:
        raise DomainError("Record times must lie after the start time")

    lambdas = grid.lambdas
    h = np.diff(lambdas)
    diffusion = mechanism.c * lambdas
    a_max = 1.0 / (t + grid.delta)
    dt = stable_time_step(lambdas, mechanism, a_max, safety)
    _logger.info(
        f"Laplace PDE on {lambdas.size} nodes up to t = {horizon}, dt = {dt:.3e}"
    )

    u = grid.final.copy()
    times, rows = list(grid.times), list(grid.values)
    n_steps = 0
    for target in wanted:
        while t < target:
            step = min(dt, target - t)
            a = 1.0 / (t + grid.delta)
            u = u + step * (diffusion * _curvature(u, h) + a * (u * u - u))
            u[0] = 1.0
            t = target if step < dt else t + step
            n_steps += 1
            if u.min() < -BAND_TOLERANCE or u.max() > 1.0 + BAND_TOLERANCE:
                raise StabilityError(
                    f"u left [0, 1] at t = {t:.6g} (min {u.min():.3e}, max "
                    f"{u.max():.3e}); decrease safety below {safety}"
                )
            np.clip(u, 0.0, 1.0, out=u)
        times.append(t)
        rows.append(u.copy())
    _logger.debug(f"Laplace PDE done in {n_steps} steps")
    return replace(grid, times=np.asarray(times), values=np.vstack(rows), dt=dt)


def grid_error_estimate(
    initial_transform: Callable[[np.ndarray], np.ndarray],
    delta: float,
    mechanism: BranchingMechanism,
    times: Sequence[float],
    probes: Sequence[float],
    t0: float = 0.0,
    n_lambda: int = DEFAULT_N_LAMBDA,
    lambda_max: float = DEFAULT_LAMBDA_MAX,
) -> Tuple[LaplaceGrid, np.ndarray]:
    """Solve on two resolutions and estimate the discretization error at probes.

    The second run doubles the node count and widens ``lambda_max`` tenfold.

    Returns:
        Tuple[LaplaceGrid, np.ndarray]: The base-resolution solution and the
        absolute difference between both runs, shape ``(len(times), len(probes))``.
    """
    times = sorted(float(t) for t in times)
    lam = np.asarray(probes, dtype=float)
    coarse = solve_laplace_pde(
        LaplaceGrid.initial(
            initial_transform, delta, t0, lambda_max=lambda_max, n_lambda=n_lambda
        ),
        mechanism,
        times[-1],
        record_times=times,
    )
    fine = solve_laplace_pde(
        LaplaceGrid.initial(
            initial_transform,
            delta,
            t0,
            lambda_max=10.0 * lambda_max,
            n_lambda=2 * n_lambda,
        ),
        mechanism,
        times[-1],
        record_times=times,
    )
    errors = np.vstack([np.abs(coarse.at(t, lam) - fine.at(t, lam)) for t in times])
    return coarse, errors
