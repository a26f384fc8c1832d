import enum
import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.integrate import solve_ivp

from ..misc.errors import DomainError, UnsupportedMechanismError

_logger = logging.getLogger(__name__)

ALGEBRAIC_RTOL = 1e-12
ODE_ORACLE_RTOL = 1e-8

ArrayLike = Union[float, np.ndarray]


class MechanismKind(enum.Enum):
    STABLE = "stable"
    QUADRATIC = "quadratic"
    # Spectrally positive Levy mechanisms with a jump measure are not implemented.
    LEVY = "levy"


@dataclass(frozen=True)
class BranchingMechanism:
    """Depletion function ``psi(x) = c * x**gamma``.

    ``Quadratic(b)`` is the same function as ``Stable(c=b, gamma=2)`` but keeps its
    own kind so that Feller-only code paths can check for it explicitly.

    Attributes:
        kind (MechanismKind): Family of the mechanism.
        c (float): Positive rate.
        gamma (float): Exponent, strictly larger than 1.
    """

    kind: MechanismKind
    c: float
    gamma: float

    def __post_init__(self) -> None:
        if self.kind is MechanismKind.LEVY:
            raise UnsupportedMechanismError(
                "Levy mechanisms with a jump measure are not implemented"
            )
        if not (math.isfinite(self.c) and self.c > 0):
            raise DomainError(f"Rate c must be positive and finite, got {self.c}")
        if not (math.isfinite(self.gamma) and self.gamma > 1):
            raise DomainError(f"Exponent gamma must be > 1, got {self.gamma}")
        if self.kind is MechanismKind.QUADRATIC and self.gamma != 2:
            raise DomainError("Quadratic mechanisms have gamma = 2")

    @classmethod
    def stable(cls, c: float, gamma: float) -> "BranchingMechanism":
        return cls(MechanismKind.STABLE, float(c), float(gamma))

    @classmethod
    def quadratic(cls, b: float) -> "BranchingMechanism":
        return cls(MechanismKind.QUADRATIC, float(b), 2.0)

    @property
    def beta(self) -> float:
        """Self-similarity exponent ``1 / (gamma - 1)``."""
        return 1.0 / (self.gamma - 1.0)

    @property
    def is_feller(self) -> bool:
        return self.gamma == 2.0

    def eval(self, x: ArrayLike) -> ArrayLike:
        """Evaluate ``psi(x) = c x^gamma``.

        Args:
            x (ArrayLike): Non-negative finite argument(s).

        Returns:
            ArrayLike: ``c * x**gamma``, with the shape of ``x``.

        Raises:
            DomainError: If any argument is negative or not finite.
        """
        arr = np.asarray(x, dtype=float)
        if np.any(~np.isfinite(arr)) or np.any(arr < 0):
            raise DomainError(f"psi is defined on [0, inf), got {x}")
        out = self.c * arr**self.gamma
        return float(out) if out.ndim == 0 else out

    def rescale_factor(self, other_c: float) -> float:
        """Factor mapping self-similar profiles from rate ``c`` to ``other_c``.

        For stable mechanisms the profile variable scales as ``c**(-beta)``, so a
        sample drawn with rate ``self.c`` times the returned factor is a sample for
        rate ``other_c`` (same ``gamma``).
        """
        if other_c <= 0:
            raise DomainError(f"Rate must be positive, got {other_c}")
        return (self.c / other_c) ** self.beta


class FlowEvaluator:
    """Closed forms of the mass flow ``dx/dt = -psi(x)`` for a stable mechanism.

    Houses ``q(x) = int_x^inf ds / psi(s)`` (finite by Grey's condition), its
    inverse ``phi`` and the flow itself. ``math.inf`` is an admissible initial mass
    and flows to ``phi(t)``.
    """

    def __init__(self, mechanism: BranchingMechanism) -> None:
        self.mechanism = mechanism
        self.c = mechanism.c
        self.gamma = mechanism.gamma
        self.beta = mechanism.beta

    def flow(self, x0: ArrayLike, t: ArrayLike) -> ArrayLike:
        """Solve ``dx/dt = -psi(x)`` from ``x0`` for a duration ``t``.

        Uses ``x_t = (c (gamma - 1) t + x0^(1 - gamma))^(-beta)``, which covers
        ``x0 = 0`` (absorbing), ``x0 = inf`` (giving ``phi(t)``) and ``t = 0``.

        Args:
            x0 (ArrayLike): Initial mass(es) in ``[0, inf]``.
            t (ArrayLike): Elapsed time(s), non-negative. Broadcast against ``x0``.

        Returns:
            ArrayLike: Mass(es) after time ``t``.

        Raises:
            DomainError: If ``t < 0`` or ``x0 < 0`` or either is NaN.
        """
        x = np.asarray(x0, dtype=float)
        tt = np.asarray(t, dtype=float)
        if np.any(np.isnan(x)) or np.any(x < 0):
            raise DomainError(f"Initial mass must lie in [0, inf], got {x0}")
        if np.any(np.isnan(tt)) or np.any(tt < 0) or np.any(np.isinf(tt)):
            raise DomainError(f"Flow time must be finite and non-negative, got {t}")
        with np.errstate(divide="ignore", over="ignore"):
            base = self.c * (self.gamma - 1.0) * tt + x ** (1.0 - self.gamma)
            out = base ** (-self.beta)
        return float(out) if out.ndim == 0 else out

    def flow_scalar(self, x0: float, t: float) -> float:
        """Scalar fast path of :meth:`flow` for per-particle loops (no validation)."""
        if x0 == 0.0:
            return 0.0
        if x0 == math.inf:
            if t == 0.0:
                return math.inf
            base = self.c * (self.gamma - 1.0) * t
        else:
            base = self.c * (self.gamma - 1.0) * t + x0 ** (1.0 - self.gamma)
        return base ** (-self.beta)

    def q(self, x: ArrayLike) -> ArrayLike:
        """Time needed to descend from ``inf`` to ``x``: ``beta x^(1 - gamma) / c``."""
        arr = np.asarray(x, dtype=float)
        if np.any(~(arr > 0)):
            raise DomainError(f"q is defined on (0, inf), got {x}")
        out = self.beta * arr ** (1.0 - self.gamma) / self.c
        return float(out) if out.ndim == 0 else out

    def phi(self, t: ArrayLike) -> ArrayLike:
        """Inverse of :meth:`q`: ``(c t / beta)^(-beta)``, the flow started at inf."""
        arr = np.asarray(t, dtype=float)
        if np.any(~(arr > 0)):
            raise DomainError(f"phi is defined on (0, inf), got {t}")
        out = (self.c * arr / self.beta) ** (-self.beta)
        return float(out) if out.ndim == 0 else out

    def superlinearity_gap(self, a: ArrayLike, b: ArrayLike, t: ArrayLike) -> ArrayLike:
        """Mass lost by merging two branches before rather than after ``t``.

        Returns ``flow(a, t) + flow(b, t) - flow(a + b, t)``, non-negative by
        convexity of ``psi``.
        """
        aa = np.asarray(a, dtype=float)
        bb = np.asarray(b, dtype=float)
        tt = np.asarray(t, dtype=float)
        if np.any(~(aa > 0)) or np.any(~(bb > 0)) or np.any(~(tt > 0)):
            raise DomainError("Superlinearity gap needs a, b, t > 0")
        out = self.flow(aa, tt) + self.flow(bb, tt) - self.flow(aa + bb, tt)
        return float(out) if np.ndim(out) == 0 else out


def integrate_flow(
    mechanism: BranchingMechanism, x0: float, t: float, rtol: float = 1e-11
) -> float:
    """Numerically integrate ``dx/dt = -psi(x)`` with an adaptive Runge-Kutta scheme.

    Serves as the oracle against which the closed-form flow is checked.

    Args:
        mechanism (BranchingMechanism): Depletion function.
        x0 (float): Finite positive initial mass.
        t (float): Horizon, non-negative.
        rtol (float): Relative tolerance of the integrator.

    Returns:
        float: Numerical solution at time ``t``.
    """
    if not (math.isfinite(x0) and x0 > 0):
        raise DomainError(f"The ODE oracle needs a finite positive start, got {x0}")
    if t < 0:
        raise DomainError(f"Horizon must be non-negative, got {t}")
    if t == 0:
        return float(x0)

    # Integrate log(x) so relative accuracy holds over many orders of magnitude.
    def rhs(_: float, y: np.ndarray) -> np.ndarray:
        return np.array([-mechanism.c * math.exp((mechanism.gamma - 1.0) * y[0])])

    sol = solve_ivp(
        rhs, (0.0, t), [math.log(x0)], method="DOP853", rtol=rtol, atol=1e-14
    )
    if not sol.success:
        raise RuntimeError(f"Flow oracle failed: {sol.message}")
    return float(math.exp(sol.y[0, -1]))
