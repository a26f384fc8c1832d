import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..mechanism import BranchingMechanism, FlowEvaluator
from ..misc.errors import DomainError, WindowExhaustedError
from ..misc.random import as_generator, run_replicates
from ..misc.utils import export_dict_to_json, import_dict_from_json, read_csv, write_csv
from .point_process import CppSample, sample_cpp

_logger = logging.getLogger(__name__)

MAX_WINDOW_GROWTHS = 20
WINDOW_FACTOR = 20.0
# Relative slack on the level check; scaled floors carry rounding error.
LEVEL_RTOL = 1e-12

MarkInit = Union[float, Callable[[np.random.Generator, int], np.ndarray]]


@dataclass(frozen=True)
class Marking:
    """Trajectory of the eternal-branch mark ``m0`` on a time grid.

    Attributes:
        delta (float): Level at which the marks are initialized.
        times (np.ndarray): Grid, all ``>= delta``.
        m0 (np.ndarray): Mark of the eternal branch at each grid time.
        jump_times (np.ndarray): Coalescence times onto the eternal branch.
        cpp (CppSample): Realization used, grown if the window was exhausted.
        lower (Optional[np.ndarray]): Bracket with all descendants merging at
            ``delta``.
        upper (Optional[np.ndarray]): Bracket with all descendants merging at the
            grid time.
    """

    delta: float
    times: np.ndarray
    m0: np.ndarray
    jump_times: np.ndarray
    cpp: CppSample
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def csv_rows(self, replicate: int) -> List[Tuple[int, float, float]]:
        return [(replicate, float(t), float(m)) for t, m in zip(self.times, self.m0)]


def _draw_init(init: MarkInit, rng: np.random.Generator, size: int) -> np.ndarray:
    if callable(init):
        marks = np.asarray(init(rng, size), dtype=float)
    else:
        marks = np.full(size, float(init))
    if marks.shape != (size,) or np.any(np.isnan(marks)) or np.any(marks < 0):
        raise DomainError("Initial marks must be non-negative, one per branch")
    return marks


def _check_grid(time_grid: Sequence[float], delta: float) -> np.ndarray:
    grid = np.asarray(time_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0 or np.any(np.diff(grid) <= 0):
        raise DomainError("Time grid must be a non-empty increasing sequence")
    if grid[0] < delta:
        raise DomainError(f"Grid times must be >= delta = {delta}")
    return grid


def _ensure_window(
    cpp: CppSample, t_max: float, rng: np.random.Generator, grow: bool
) -> Tuple[CppSample, int]:
    """Grow the window until a branch taller than ``t_max`` lies inside it."""
    stop = cpp.first_taller(t_max)
    growths = 0
    while stop < 0:
        if not grow or growths >= MAX_WINDOW_GROWTHS:
            raise WindowExhaustedError(
                f"No branch taller than {t_max} in a window of length {cpp.length}; "
                "resample with a larger window"
            )
        cpp = cpp.extend(rng)
        growths += 1
        stop = cpp.first_taller(t_max)
    if growths:
        _logger.debug(f"CPP window grown {growths} time(s) to {cpp.length}")
    return cpp, stop


def eternal_jump_times(cpp: CppSample, delta: float, t_max: float) -> np.ndarray:
    """Heights in ``(delta, t_max]`` at which a branch merges into the eternal one.

    These are the left-to-right record heights among branches taller than
    ``delta``.
    """
    stop = cpp.first_taller(t_max)
    if stop < 0:
        raise WindowExhaustedError(
            f"No branch taller than {t_max} in a window of length {cpp.length}"
        )
    h = cpp.t[:stop]
    h = h[h > delta]
    if h.size == 0:
        return h
    running = np.maximum.accumulate(h)
    is_record = np.concatenate(([True], h[1:] > running[:-1]))
    return h[is_record]


def eternal_branch_mark(
    cpp: CppSample,
    delta: float,
    init: MarkInit,
    mechanism: BranchingMechanism,
    time_grid: Sequence[float],
    rng: np.random.Generator | int,
    grow_window: bool = True,
    with_brackets: bool = False,
) -> Marking:
    """Partial marking at level ``delta`` of a CPP, read on the eternal branch.

    Every branch taller than ``delta`` receives an independent initial mark at
    height ``delta``. Marks flow by ``dx/dt = -psi(x)`` and add up when a branch
    dies into its left neighbour. Branches are processed right to left with a
    monotone stack, so each point is visited once.

    Args:
        cpp (CppSample): Realization, with ``floor <= delta``.
        delta (float): Marking level.
        init (MarkInit): ``math.inf`` or a sampler ``(rng, size) -> marks``.
        mechanism (BranchingMechanism): Depletion function.
        time_grid (Sequence[float]): Increasing times, all ``>= delta``.
        rng (np.random.Generator | int): Stream for the marks and window growth.
        grow_window (bool): Double the window when it holds no branch alive at the
            last grid time. Defaults to True.
        with_brackets (bool): Also compute the tree brackets on the grid.

    Returns:
        Marking: The ``m0`` trajectory and the realization used.

    Raises:
        WindowExhaustedError: If the window is exhausted and may not grow.
    """
    if delta < cpp.floor * (1.0 - LEVEL_RTOL):
        raise DomainError(f"Level {delta} lies below the CPP floor {cpp.floor}")
    grid = _check_grid(time_grid, delta)
    generator = as_generator(rng)
    cpp, stop = _ensure_window(cpp, float(grid[-1]), generator, grow_window)
    heights = cpp.t[:stop]
    heights = heights[heights > delta]
    marks = _draw_init(init, generator, heights.size + 1)
    flow = FlowEvaluator(mechanism).flow_scalar

    stack_t: List[float] = []
    stack_m: List[float] = []
    for i in range(heights.size - 1, -1, -1):
        ti = float(heights[i])
        m, cur = float(marks[i + 1]), delta
        while stack_t and stack_t[-1] < ti:
            tc, mc = stack_t.pop(), stack_m.pop()
            m = flow(m, tc - cur) + mc
            cur = tc
        stack_t.append(ti)
        stack_m.append(flow(m, ti - cur))

    # What is left on the stack merges into the eternal branch, lowest on top.
    record_t, record_m = stack_t[::-1], stack_m[::-1]
    m0 = np.empty(grid.size)
    m, cur, k = float(marks[0]), delta, 0
    for g, t in enumerate(grid):
        while k < len(record_t) and record_t[k] <= t:
            m = flow(m, record_t[k] - cur) + record_m[k]
            cur = record_t[k]
            k += 1
        m0[g] = flow(m, t - cur)

    lower = upper = None
    if with_brackets:
        lower, upper = _brackets(heights, marks, grid, delta, mechanism)
    return Marking(
        delta=float(delta),
        times=grid,
        m0=m0,
        jump_times=np.asarray(record_t, dtype=float),
        cpp=cpp,
        lower=lower,
        upper=upper,
    )


def _brackets(
    heights: np.ndarray,
    marks: np.ndarray,
    grid: np.ndarray,
    delta: float,
    mechanism: BranchingMechanism,
) -> Tuple[np.ndarray, np.ndarray]:
    evaluator = FlowEvaluator(mechanism)
    running = np.maximum.accumulate(heights) if heights.size else heights
    # Branches merged into the eternal one by time t: those left of the first taller.
    n_desc = 1 + np.searchsorted(running, grid, side="right")
    totals = np.cumsum(marks)
    lower = np.empty(grid.size)
    upper = np.empty(grid.size)
    for g, t in enumerate(grid):
        own = marks[: n_desc[g]]
        lower[g] = evaluator.flow(totals[n_desc[g] - 1], t - delta)
        upper[g] = float(np.sum(evaluator.flow(own, t - delta)))
    return lower, upper


@dataclass(frozen=True)
class UpsilonBank:
    """Samples of the self-similar profile ``Upsilon`` for a stable mechanism.

    ``samples[:, j]`` holds ``t_j^beta m0+(t_j)`` for the maximal marking, all
    equal in law to ``Upsilon``.

    Attributes:
        c (float): Mechanism rate.
        gamma (float): Mechanism exponent.
        times (np.ndarray): Times at which the marking was read.
        samples (np.ndarray): Converged samples, one row per kept replicate.
        n_flagged (int): Replicates that did not converge and were excluded.
        levels (np.ndarray): Number of refinements used by each kept replicate.
    """

    c: float
    gamma: float
    times: np.ndarray
    samples: np.ndarray
    n_flagged: int = 0
    levels: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=int))

    @property
    def mechanism(self) -> BranchingMechanism:
        return BranchingMechanism.stable(self.c, self.gamma)

    @property
    def flagged_rate(self) -> float:
        total = self.samples.shape[0] + self.n_flagged
        return self.n_flagged / total if total else 0.0

    def at(self, t: float) -> np.ndarray:
        idx = np.flatnonzero(np.isclose(self.times, t))
        if idx.size == 0:
            raise DomainError(f"Time {t} is not in the bank ({self.times.tolist()})")
        return self.samples[:, idx[0]]

    @property
    def upsilon(self) -> np.ndarray:
        """Reference samples: read at ``t = 1`` when available."""
        if np.any(np.isclose(self.times, 1.0)):
            return self.at(1.0)
        return self.samples[:, 0]

    def rescaled(self, c: float) -> "UpsilonBank":
        """Bank for another rate with the same exponent."""
        factor = self.mechanism.rescale_factor(c)
        return UpsilonBank(
            c, self.gamma, self.times, factor * self.samples, self.n_flagged, self.levels
        )

    def save(self, csv_path: Path) -> None:
        """Write the ``sample`` column and a JSON sidecar with the mechanism."""
        write_csv(csv_path, ["sample"], [(float(v),) for v in self.upsilon])
        export_dict_to_json(
            {
                "c": self.c,
                "gamma": self.gamma,
                "n_samples": int(self.samples.shape[0]),
                "n_flagged": self.n_flagged,
                "times": self.times.tolist(),
            },
            Path(csv_path).with_suffix(".json"),
        )

    @classmethod
    def load(cls, csv_path: Path) -> "UpsilonBank":
        meta = import_dict_from_json(Path(csv_path).with_suffix(".json"))
        values = np.array([float(row["sample"]) for row in read_csv(csv_path)])
        return cls(
            float(meta["c"]),
            float(meta["gamma"]),
            np.array([1.0]),
            values[:, None],
            int(meta.get("n_flagged", 0)),
        )


def maximal_marking_upsilon(
    mechanism: BranchingMechanism,
    replicates: int,
    seed: int,
    time_grid: Sequence[float] = (1.0,),
    length: Optional[float] = None,
    delta0: float = 0.1,
    tol_rel: float = 1e-3,
    k_max: int = 16,
    workers: int = 1,
) -> UpsilonBank:
    """Sample ``Upsilon`` through maximal markings at levels ``delta0 2^-k``.

    Each replicate samples one CPP and marks it with ``+inf`` at successively
    finer levels (refining the same realization) until the eternal mark moves
    by less than ``tol_rel`` relatively at every grid time. Replicates that do
    not settle within ``k_max`` refinements are flagged and excluded.

    Args:
        mechanism (BranchingMechanism): Stable mechanism.
        replicates (int): Number of CPP realizations.
        seed (int): Seed of the run.
        time_grid (Sequence[float]): Reading times, all above ``delta0``.
        length (Optional[float]): Initial window. Defaults to 20 times the last
            grid time.
        delta0 (float): Coarsest level.
        tol_rel (float): Relative convergence tolerance.
        k_max (int): Largest refinement index.
        workers (int): Worker pool size.

    Returns:
        UpsilonBank: Scaled samples ``t^beta m0+(t)``.
    """
    grid = _check_grid(time_grid, delta0)
    if grid[0] <= delta0:
        raise DomainError("Reading times must exceed the coarsest level")
    t_max = float(grid[-1])
    window = WINDOW_FACTOR * t_max if length is None else float(length)

    def task(rng: np.random.Generator) -> Tuple[np.ndarray, int, bool]:
        cpp = sample_cpp(window, delta0, rng)
        cpp, stop = _ensure_window(cpp, t_max, rng, grow=True)
        # Points right of the first branch taller than t_max never reach m0.
        cpp = cpp.truncate(float(cpp.l[stop]))
        previous = None
        for k in range(k_max + 1):
            delta = delta0 * 2.0**-k
            cpp = cpp.refine(delta, rng)
            values = eternal_branch_mark(
                cpp, delta, math.inf, mechanism, grid, rng, grow_window=False
            ).m0
            if previous is not None and np.all(
                np.abs(values - previous) < tol_rel * values
            ):
                return values, k, True
            previous = values
        return previous, k_max, False

    runs = run_replicates(task, seed, replicates, workers)
    kept = [r for r in runs if r[2]]
    n_flagged = len(runs) - len(kept)
    if n_flagged:
        _logger.warning(
            f"{n_flagged} of {replicates} replicates did not converge within "
            f"{k_max} refinements and were excluded"
        )
    scale = grid**mechanism.beta
    samples = (
        np.vstack([r[0] for r in kept]) * scale
        if kept
        else np.empty((0, grid.size))
    )
    levels = np.array([r[1] for r in kept], dtype=int)
    _logger.info(
        f"Upsilon bank: {samples.shape[0]} samples, mean "
        f"{samples[:, -1].mean() if kept else float('nan'):.6g}"
    )
    return UpsilonBank(mechanism.c, mechanism.gamma, grid, samples, n_flagged, levels)
