import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import ks_2samp, wasserstein_distance

from ..misc.errors import DomainError
from ..misc.utils import export_dict_to_json

_logger = logging.getLogger(__name__)

MIN_KS_SAMPLE = 50
PASS = "pass"
FAIL = "fail"
FLAGGED = "flagged"


def mc_mean(samples: Sequence[float]) -> Tuple[float, float]:
    """Sample mean and its standard error."""
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise DomainError("A standard error needs at least two samples")
    return float(x.mean()), float(x.std(ddof=1) / math.sqrt(x.size))


def ks_two_sample(a: Sequence[float], b: Sequence[float]) -> Tuple[float, float]:
    """Two-sample Kolmogorov-Smirnov statistic with the asymptotic p-value.

    Raises:
        DomainError: If either sample has fewer than 50 values.
    """
    if len(a) < MIN_KS_SAMPLE or len(b) < MIN_KS_SAMPLE:
        raise DomainError(
            f"KS needs at least {MIN_KS_SAMPLE} values per sample, got {len(a)} and {len(b)}"
        )
    result = ks_2samp(np.asarray(a, dtype=float), np.asarray(b, dtype=float), method="asymp")
    return float(result.statistic), float(result.pvalue)


def wasserstein_1(a: Sequence[float], b: Sequence[float]) -> float:
    return float(wasserstein_distance(a, b))


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one acceptance or property check.

    Attributes:
        name (str): Identifier of the check.
        observed (float): Measured value.
        target (float): Reference value.
        tolerance (float): Allowed deviation (or significance level for KS).
        status (str): ``pass``, ``fail`` or ``flagged``.
        stderr (Optional[float]): Monte Carlo standard error, when relevant.
        detail (str): Free-form context.
    """

    name: str
    observed: float
    target: float
    tolerance: float
    status: str
    stderr: Optional[float] = None
    detail: str = ""

    @property
    def passed(self) -> bool:
        return self.status != FAIL

    @classmethod
    def within(
        cls,
        name: str,
        observed: float,
        target: float,
        tolerance: float,
        stderr: Optional[float] = None,
        detail: str = "",
    ) -> "CheckResult":
        """Pass when ``|observed - target| <= tolerance``."""
        ok = abs(observed - target) <= tolerance
        return cls(name, observed, target, tolerance, PASS if ok else FAIL, stderr, detail)

    @classmethod
    def ks(
        cls, name: str, a: Sequence[float], b: Sequence[float], alpha: float
    ) -> "CheckResult":
        """Pass when the two-sample KS test does not reject at level ``alpha``."""
        statistic, pvalue = ks_two_sample(a, b)
        return cls(
            name,
            pvalue,
            alpha,
            alpha,
            PASS if pvalue >= alpha else FAIL,
            detail=f"statistic={statistic!r}",
        )

    @classmethod
    def hard(cls, name: str, condition: bool, detail: str = "") -> "CheckResult":
        """Pass/fail assertion with no numeric tolerance."""
        value = 1.0 if condition else 0.0
        return cls(name, value, 1.0, 0.0, PASS if condition else FAIL, detail=detail)

    @classmethod
    def flagged(cls, name: str, observed: float, detail: str = "") -> "CheckResult":
        """Exploratory result, reported but never failing."""
        return cls(name, observed, math.nan, math.nan, FLAGGED, detail=detail)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "observed": self.observed,
            "target": self.target,
            "tolerance": self.tolerance,
            "stderr": self.stderr,
            "status": self.status,
            "detail": self.detail,
        }


@dataclass
class StatReport:
    """Ordered collection of check results of a run."""

    checks: List[CheckResult] = field(default_factory=list)

    def add(self, check: CheckResult) -> CheckResult:
        level = logging.INFO if check.passed else logging.WARNING
        _logger.log(
            level,
            f"{check.name}: {check.status} (observed {check.observed:.6g}, target "
            f"{check.target:.6g}, tolerance {check.tolerance:.3g})",
        )
        self.checks.append(check)
        return check

    def extend(self, other: "StatReport") -> None:
        self.checks.extend(other.checks)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def as_dict(self) -> dict:
        return {
            "passed": self.passed,
            "n_checks": len(self.checks),
            "n_failed": sum(1 for c in self.checks if c.status == FAIL),
            "checks": [check.as_dict() for check in self.checks],
        }

    def export(self, path: Path) -> Path:
        return export_dict_to_json(self.as_dict(), path)
