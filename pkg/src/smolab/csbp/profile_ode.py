import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Tuple

import numpy as np
from scipy.integrate import solve_ivp

from ..mechanism import BranchingMechanism
from ..misc.errors import DomainError, SolverError
from ..misc.utils import export_dict_to_json, write_csv

_logger = logging.getLogger(__name__)

START_X = 1e-3
MAX_BISECTIONS = 200
TAIL_LEVEL = 1e-6


@dataclass(frozen=True)
class ProfileSolution:
    """Total-extinction probability ``h`` of the branching CSBP on a grid.

    ``h`` is the Laplace transform of the self-similar profile, so
    ``E(Upsilon) = -h'(0)``.

    Attributes:
        mechanism (BranchingMechanism): Mechanism of the equation.
        x (np.ndarray): Grid, starting at 0.
        h (np.ndarray): Solution on the grid.
        hprime (np.ndarray): Derivative on the grid.
        hprime0 (float): Slope at 0, negative.
        diagnostics (dict): Shooting bracket, iterations and stopping point.
    """

    mechanism: BranchingMechanism
    x: np.ndarray
    h: np.ndarray
    hprime: np.ndarray
    hprime0: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def e_upsilon(self) -> float:
        return -self.hprime0

    def bound(self) -> np.ndarray:
        """Upper bound ``exp(-x (beta/c)^beta)`` on ``h``."""
        m = self.mechanism
        return np.exp(-self.x * (m.beta / m.c) ** m.beta)

    def residual(self) -> np.ndarray:
        """``x (c h'' + beta h') + h^2 - h`` at interior points, ``h''`` by differences."""
        m = self.mechanism
        h2 = np.gradient(self.hprime, self.x, edge_order=2)
        res = self.x * (m.c * h2 + m.beta * self.hprime) + self.h**2 - self.h
        return res[1:-1]

    def summary(self) -> dict:
        return {
            "c": self.mechanism.c,
            "gamma": self.mechanism.gamma,
            "hprime0": self.hprime0,
            "e_upsilon": self.e_upsilon,
            **self.diagnostics,
        }

    def export(self, csv_path: Path, json_path: Path) -> None:
        write_csv(csv_path, ["x", "h"], list(zip(self.x.tolist(), self.h.tolist())))
        export_dict_to_json(self.summary(), json_path)


def _series_start(slope: float, c: float, beta: float) -> Tuple[float, float]:
    """``h`` and ``h'`` at ``START_X`` from the Frobenius expansion at the origin."""
    a = slope
    b = -a * (beta + 1.0) / (2.0 * c)
    d = -(a * a + b * (2.0 * beta + 1.0)) / (6.0 * c)
    x = START_X
    return 1.0 + a * x + b * x**2 + d * x**3, a + 2.0 * b * x + 3.0 * d * x**2


def _shoot(s: float, m: BranchingMechanism, x_max: float, rtol: float):
    """Integrate from ``h'(0) = -s``; classify as overshoot, undershoot or neither."""
    c, beta = m.c, m.beta

    def rhs(x: float, y: np.ndarray) -> np.ndarray:
        h, hp = y
        return np.array([hp, (h - h * h - beta * x * hp) / (c * x)])

    def below_zero(_: float, y: np.ndarray) -> float:
        return y[0]

    def turns_up(_: float, y: np.ndarray) -> float:
        return y[1]

    below_zero.terminal = True
    below_zero.direction = -1
    turns_up.terminal = True
    turns_up.direction = 1
    sol = solve_ivp(
        rhs,
        (START_X, x_max),
        list(_series_start(-s, c, beta)),
        method="DOP853",
        rtol=rtol,
        atol=rtol * 1e-3,
        dense_output=True,
        events=(below_zero, turns_up),
    )
    if sol.status == -1:
        raise SolverError(f"Profile integration failed at slope {s}: {sol.message}")
    if sol.t_events[0].size:
        return "over", sol
    if sol.t_events[1].size:
        return "under", sol
    return "none", sol


def profile_solve(
    m: BranchingMechanism,
    x_max: float = 40.0,
    tol: float = 1e-8,
    n_points: int = 4001,
) -> ProfileSolution:
    """Solve ``x (c h'' + beta h') + h^2 - h = 0`` with ``h(0) = 1`` by shooting.

    The unknown slope ``s = -h'(0)`` is bisected in ``[(beta/c)^beta,
    20 (beta/c)^beta]``: too steep a start sends ``h`` below 0, too shallow a
    start makes it turn back up towards 1.

    Args:
        m (BranchingMechanism): Quadratic mechanism.
        x_max (float): End of the grid. ``h(x_max)`` must fall below 1e-6.
        tol (float): Relative tolerance of the integrator.
        n_points (int): Size of the output grid.

    Returns:
        ProfileSolution: Grid solution with ``E(Upsilon) = -h'(0)``.

    Raises:
        SolverError: If the bracket does not straddle the solution, or the tail
            does not reach 1e-6 before the shooting diverges.
    """
    if not m.is_feller:
        raise DomainError("The profile equation is solved for gamma = 2")
    if not x_max > 1.0:
        raise DomainError(f"x_max must exceed 1, got {x_max}")
    scale = (m.beta / m.c) ** m.beta
    lo, hi = scale, 20.0 * scale
    lo_kind, _ = _shoot(lo, m, x_max, tol)
    hi_kind, _ = _shoot(hi, m, x_max, tol)
    if lo_kind != "under" or hi_kind != "over":
        raise SolverError(
            f"No sign change of the shooting objective in [{lo}, {hi}]: "
            f"ends classified {lo_kind!r} and {hi_kind!r}"
        )
    iterations = 0
    while hi - lo > 4.0 * np.finfo(float).eps * hi and iterations < MAX_BISECTIONS:
        mid = 0.5 * (lo + hi)
        kind, _ = _shoot(mid, m, x_max, tol)
        if kind == "over":
            hi = mid
        elif kind == "under":
            lo = mid
        else:
            lo = hi = mid
        iterations += 1
    _, sol_lo = _shoot(lo, m, x_max, tol)
    _, sol_hi = _shoot(hi, m, x_max, tol)
    x_stop = min(float(sol_lo.t[-1]), float(sol_hi.t[-1]))
    h_stop = 0.5 * (sol_lo.sol(x_stop)[0] + sol_hi.sol(x_stop)[0])
    if x_stop < x_max and h_stop > TAIL_LEVEL:
        raise SolverError(
            f"Shooting diverged at x = {x_stop:.4g} with h = {h_stop:.3e} > "
            f"{TAIL_LEVEL}; tighten tol"
        )

    x = np.linspace(0.0, x_max, n_points)
    h = np.zeros_like(x)
    hp = np.zeros_like(x)
    inside = (x >= START_X) & (x <= x_stop)
    y = 0.5 * (sol_lo.sol(x[inside]) + sol_hi.sol(x[inside]))
    h[inside], hp[inside] = y[0], y[1]
    slope = -0.5 * (lo + hi)
    head = x < START_X
    h_head, hp_head = _series_start(slope, m.c, m.beta)
    h[head] = 1.0 + (h_head - 1.0) * x[head] / START_X
    hp[head] = slope + (hp_head - slope) * x[head] / START_X
    np.clip(h, 0.0, 1.0, out=h)
    _logger.info(
        f"Profile solved after {iterations} bisections: E(Upsilon) = {-slope:.10g}"
    )
    return ProfileSolution(
        mechanism=m,
        x=x,
        h=h,
        hprime=hp,
        hprime0=slope,
        diagnostics={
            "bracket_low": lo,
            "bracket_high": hi,
            "bisections": iterations,
            "x_stop": x_stop,
            "tol": tol,
        },
    )


def profile_mean_for_rate(solution: ProfileSolution, c: float) -> float:
    """``E(Upsilon)`` for rate ``c`` from a solution at another rate (same gamma)."""
    return solution.e_upsilon * solution.mechanism.rescale_factor(c)


def bound_holds(solution: ProfileSolution, atol: float = 1e-9) -> bool:
    return bool(np.all(solution.h <= solution.bound() + atol))


def is_nonincreasing(solution: ProfileSolution, atol: float = 1e-12) -> bool:
    return bool(np.all(np.diff(solution.h) <= atol))

