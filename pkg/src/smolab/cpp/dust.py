import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.integrate import quad

from ..mechanism import BranchingMechanism, FlowEvaluator
from ..misc.errors import DomainError
from ..misc.random import run_replicates
from .marking import WINDOW_FACTOR, _check_grid, eternal_branch_mark
from .point_process import sample_cpp

_logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.1
MEAN_SAMPLE_SIZE = 100_000


@dataclass(frozen=True)
class DustReport:
    """Partial markings with vanishing initial marks ``delta_k X``.

    Attributes:
        deltas (np.ndarray): Levels, decreasing.
        times (np.ndarray): Reading times.
        samples (np.ndarray): ``m0(t)`` at the finest level, one row per replicate.
        level_means (np.ndarray): Mean ``m0(t)`` per level, shape ``(n_deltas, n_times)``.
        lower (np.ndarray): Per-replicate bracket with all merges at the level.
        upper (np.ndarray): Per-replicate bracket with all merges at ``t``.
        mean_x (float): ``E(X)``.
        lower_bound_mean_t (np.ndarray): Asymptotic lower bound per time with
            ``E(t)`` of mean ``t``.
        lower_bound_rate_t (np.ndarray): The same bound with ``E(t)`` of rate ``t``.
    """

    deltas: np.ndarray
    times: np.ndarray
    samples: np.ndarray
    level_means: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    mean_x: float
    lower_bound_mean_t: np.ndarray
    lower_bound_rate_t: np.ndarray

    @property
    def means(self) -> np.ndarray:
        return self.samples.mean(axis=0)

    @property
    def stderrs(self) -> np.ndarray:
        return self.samples.std(axis=0, ddof=1) / np.sqrt(self.samples.shape[0])

    def exceedance(self, threshold: float = DEFAULT_THRESHOLD) -> np.ndarray:
        """Empirical ``P(m0(t) > threshold)`` per reading time."""
        return (self.samples > threshold).mean(axis=0)

    def zero_counts(self) -> np.ndarray:
        return (self.samples == 0.0).sum(axis=0)

    def envelopes(self) -> dict:
        """Both readings of the upper envelope ``E(X) E(t)``.

        ``E(t)`` exponential with mean ``t`` gives ``E(X) t``; with rate ``t`` it
        gives ``E(X) / t``. Reports which reading stays above the empirical mean.
        """
        mean_t = self.mean_x * self.times
        rate_t = self.mean_x / self.times
        means = self.means
        above_mean_t = bool(np.all(means <= mean_t))
        above_rate_t = bool(np.all(means <= rate_t))
        if above_mean_t and above_rate_t:
            dominant = "both"
        elif above_mean_t:
            dominant = "mean_t"
        elif above_rate_t:
            dominant = "rate_t"
        else:
            dominant = "neither"
        return {
            "envelope_mean_t": mean_t.tolist(),
            "envelope_rate_t": rate_t.tolist(),
            "lower_bound_mean_t": self.lower_bound_mean_t.tolist(),
            "lower_bound_rate_t": self.lower_bound_rate_t.tolist(),
            "dominating_envelope": dominant,
        }

    def csv_rows(self) -> List[tuple]:
        return [
            (float(t), float(m), float(u), float(l))
            for t, m, u, l in zip(
                self.times, self.means, self.upper.mean(axis=0), self.lower.mean(axis=0)
            )
        ]

    def summary(self, threshold: float = DEFAULT_THRESHOLD) -> dict:
        return {
            "deltas": self.deltas.tolist(),
            "times": self.times.tolist(),
            "mean_x": self.mean_x,
            "means": self.means.tolist(),
            "stderrs": self.stderrs.tolist(),
            "exceedance_threshold": threshold,
            "exceedance": self.exceedance(threshold).tolist(),
            "zero_counts": self.zero_counts().tolist(),
            **self.envelopes(),
        }


def asymptotic_lower_bound(
    mechanism: BranchingMechanism,
    mean_x: float,
    times: Sequence[float],
    rate_reading: bool = False,
) -> np.ndarray:
    """Expectation of ``(c(gamma-1)t + (E(X) E(t))^(1-gamma))^(-beta)`` per time.

    The bracket is the flow started from ``E(X) E(t)`` run for ``t``, with ``E(t)``
    exponential of mean ``t`` (or of rate ``t`` when ``rate_reading``). The
    expectation over ``E(t)`` is taken by quadrature.
    """
    flow = FlowEvaluator(mechanism).flow_scalar
    out = []
    for t in times:
        scale = mean_x / t if rate_reading else mean_x * t
        value, _ = quad(lambda e: flow(scale * e, t) * np.exp(-e), 0.0, np.inf)
        out.append(value)
    return np.asarray(out)


def dust_solution(
    x_sampler: Callable[[np.random.Generator, int], np.ndarray],
    deltas: Sequence[float],
    mechanism: BranchingMechanism,
    time_grid: Sequence[float],
    replicates: int,
    seed: int,
    mean_x: Optional[float] = None,
    length: Optional[float] = None,
    workers: int = 1,
) -> DustReport:
    """Markings initialized with ``delta_k X`` on a shared CPP, for decreasing levels.

    Args:
        x_sampler (Callable): Sampler of ``X``, positive with finite mean.
        deltas (Sequence[float]): Decreasing levels, all below the first time.
        mechanism (BranchingMechanism): Stable mechanism.
        time_grid (Sequence[float]): Increasing reading times.
        replicates (int): Number of CPP realizations, at least 2.
        seed (int): Seed of the run.
        mean_x (Optional[float]): ``E(X)``; estimated from the sampler when omitted.
        length (Optional[float]): Initial CPP window.
        workers (int): Worker pool size.

    Returns:
        DustReport: Samples at the finest level with brackets and envelopes.
    """
    levels = np.asarray(deltas, dtype=float)
    if levels.size == 0 or np.any(levels <= 0) or np.any(np.diff(levels) >= 0):
        raise DomainError("Levels must be positive and strictly decreasing")
    grid = _check_grid(time_grid, float(levels[0]))
    if replicates < 2:
        raise DomainError(f"Need at least two replicates, got {replicates}")
    if mean_x is None:
        mean_x = float(np.mean(x_sampler(np.random.default_rng(seed), MEAN_SAMPLE_SIZE)))
    if not mean_x > 0:
        raise DomainError(f"E(X) must be positive, got {mean_x}")
    window = WINDOW_FACTOR * float(grid[-1]) if length is None else float(length)

    def task(rng: np.random.Generator):
        cpp = sample_cpp(window, float(levels[0]), rng)
        per_level = []
        marking = None
        for delta in levels:
            cpp = cpp.refine(float(delta), rng)

            def init(g: np.random.Generator, size: int, d: float = float(delta)) -> np.ndarray:
                return d * np.asarray(x_sampler(g, size), dtype=float)

            marking = eternal_branch_mark(
                cpp, float(delta), init, mechanism, grid, rng, with_brackets=True
            )
            cpp = marking.cpp
            per_level.append(marking.m0)
        return np.vstack(per_level), marking.lower, marking.upper

    runs = run_replicates(task, seed, replicates, workers)
    stacked = np.stack([r[0] for r in runs])
    report = DustReport(
        deltas=levels,
        times=grid,
        samples=stacked[:, -1, :],
        level_means=stacked.mean(axis=0),
        lower=np.vstack([r[1] for r in runs]),
        upper=np.vstack([r[2] for r in runs]),
        mean_x=float(mean_x),
        lower_bound_mean_t=asymptotic_lower_bound(mechanism, float(mean_x), grid),
        lower_bound_rate_t=asymptotic_lower_bound(
            mechanism, float(mean_x), grid, rate_reading=True
        ),
    )
    _logger.info(f"Dust solution over {replicates} replicates: means {report.means}")
    return report
