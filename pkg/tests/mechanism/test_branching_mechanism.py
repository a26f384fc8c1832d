import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smolab.mechanism import (
    ALGEBRAIC_RTOL,
    ODE_ORACLE_RTOL,
    BranchingMechanism,
    FlowEvaluator,
    MechanismKind,
    integrate_flow,
)
from smolab.misc.errors import DomainError, UnsupportedMechanismError

rates = st.floats(min_value=0.1, max_value=5.0)
exponents = st.floats(min_value=1.2, max_value=3.0)
masses = st.floats(min_value=1e-3, max_value=1e3)
durations = st.floats(min_value=0.0, max_value=10.0)


class TestBranchingMechanism:
    """Class for testing the depletion function."""

    @staticmethod
    def test_eval_quadratic() -> None:
        """psi(x) = x^2 for c = 1, gamma = 2."""
        m = BranchingMechanism.stable(1.0, 2.0)
        assert m.eval(2.0) == 4.0, "psi(2) should equal 4."
        assert np.allclose(m.eval(np.array([0.0, 3.0])), [0.0, 9.0]), "Vector eval."

    @staticmethod
    def test_beta() -> None:
        """beta = 1 / (gamma - 1)."""
        assert BranchingMechanism.stable(1.0, 2.0).beta == 1.0, "beta(2) is 1."
        assert math.isclose(BranchingMechanism.stable(1.0, 1.5).beta, 2.0), "beta(1.5) is 2."

    @staticmethod
    def test_quadratic_is_feller() -> None:
        """Quadratic and stable gamma = 2 are both Feller."""
        assert BranchingMechanism.quadratic(0.5).is_feller, "Quadratic is Feller."
        assert not BranchingMechanism.stable(1.0, 1.5).is_feller, "gamma 1.5 is not Feller."

    @staticmethod
    @pytest.mark.parametrize("x", [-1.0, math.inf, math.nan])
    def test_eval_outside_domain(x: float) -> None:
        """Negative, infinite and NaN arguments are rejected."""
        with pytest.raises(DomainError):
            BranchingMechanism.stable(1.0, 2.0).eval(x)

    @staticmethod
    @pytest.mark.parametrize("c, gamma", [(0.0, 2.0), (-1.0, 2.0), (1.0, 1.0), (1.0, 0.5)])
    def test_invalid_parameters(c: float, gamma: float) -> None:
        """Rates must be positive and exponents above 1."""
        with pytest.raises(DomainError):
            BranchingMechanism.stable(c, gamma)

    @staticmethod
    def test_levy_not_implemented() -> None:
        """Mechanisms with a jump measure are reported as unsupported."""
        with pytest.raises(UnsupportedMechanismError):
            BranchingMechanism(MechanismKind.LEVY, 1.0, 1.5)

    @staticmethod
    def test_rescale_factor() -> None:
        """Profiles scale as c^-beta."""
        m = BranchingMechanism.stable(1.0, 2.0)
        assert math.isclose(m.rescale_factor(2.0), 0.5), "Doubling c halves Upsilon."
        assert math.isclose(m.rescale_factor(1.0), 1.0), "Same rate, same law."


class TestFlowEvaluator:
    """Class for testing the closed-form flow."""

    @staticmethod
    def test_flow_values(quadratic: BranchingMechanism) -> None:
        """x_t = x0 / (1 + x0 t) for psi(x) = x^2."""
        ev = FlowEvaluator(quadratic)
        assert math.isclose(ev.flow(1.0, 1.0), 0.5), "flow(1, 1) should be 1/2."
        assert math.isclose(ev.flow(2.0, 1.0), 2.0 / 3.0), "flow(2, 1) should be 2/3."
        assert ev.flow(0.0, 3.0) == 0.0, "Zero mass is absorbing."
        assert ev.flow(5.0, 0.0) == 5.0, "Zero time is the identity."

    @staticmethod
    def test_flow_from_infinity(quadratic: BranchingMechanism) -> None:
        """An infinite mass comes down to phi(t) = 1/t."""
        ev = FlowEvaluator(quadratic)
        assert math.isclose(ev.flow(math.inf, 2.0), 0.5), "flow(inf, 2) should be 1/2."
        assert math.isclose(ev.phi(2.0), 0.5), "phi(2) should be 1/2."
        assert math.isclose(ev.q(ev.phi(0.7)), 0.7), "q inverts phi."

    @staticmethod
    def test_superlinearity_gap(quadratic: BranchingMechanism) -> None:
        """flow(1,1) + flow(1,1) - flow(2,1) = 1/3."""
        gap = FlowEvaluator(quadratic).superlinearity_gap(1.0, 1.0, 1.0)
        assert math.isclose(gap, 1.0 / 3.0, rel_tol=1e-12), f"Gap {gap} should be 1/3."

    @staticmethod
    @pytest.mark.parametrize("x0, t", [(-1.0, 1.0), (1.0, -1.0), (math.nan, 1.0)])
    def test_flow_outside_domain(quadratic: BranchingMechanism, x0: float, t: float) -> None:
        """Negative masses, negative times and NaN are rejected."""
        with pytest.raises(DomainError):
            FlowEvaluator(quadratic).flow(x0, t)

    @staticmethod
    def test_flow_scalar_matches_flow(quadratic: BranchingMechanism) -> None:
        """The per-particle fast path agrees with the vectorized flow."""
        ev = FlowEvaluator(quadratic)
        for x0, t in [(0.0, 1.0), (math.inf, 0.0), (math.inf, 0.3), (2.5, 0.4)]:
            assert ev.flow_scalar(x0, t) == pytest.approx(
                ev.flow(x0, t), rel=ALGEBRAIC_RTOL
            ), f"flow_scalar({x0}, {t}) differs from flow."

    @staticmethod
    @settings(max_examples=50, deadline=None)
    @given(c=rates, gamma=exponents, x0=masses, s=durations, t=durations)
    def test_semigroup(c: float, gamma: float, x0: float, s: float, t: float) -> None:
        """flow(flow(x, s), t) = flow(x, s + t)."""
        ev = FlowEvaluator(BranchingMechanism.stable(c, gamma))
        composed = ev.flow(ev.flow(x0, s), t)
        direct = ev.flow(x0, s + t)
        assert composed == pytest.approx(direct, rel=1e-10), "Semigroup property fails."

    @staticmethod
    @settings(max_examples=20, deadline=None)
    @given(c=rates, gamma=exponents, x0=masses, t=st.floats(0.01, 5.0))
    def test_matches_ode_oracle(c: float, gamma: float, x0: float, t: float) -> None:
        """The closed form agrees with adaptive Runge-Kutta integration."""
        m = BranchingMechanism.stable(c, gamma)
        exact = FlowEvaluator(m).flow(x0, t)
        assert integrate_flow(m, x0, t) == pytest.approx(
            exact, rel=ODE_ORACLE_RTOL
        ), "Closed-form flow departs from the ODE oracle."

    @staticmethod
    @settings(max_examples=50, deadline=None)
    @given(gamma=exponents, a=masses, b=masses, t=st.floats(0.01, 5.0))
    def test_gap_non_negative(gamma: float, a: float, b: float, t: float) -> None:
        """Merging early never yields more mass than merging late."""
        gap = FlowEvaluator(BranchingMechanism.stable(1.0, gamma)).superlinearity_gap(
            a, b, t
        )
        assert gap >= 0.0, "The superlinearity gap must be non-negative."

    @staticmethod
    @settings(max_examples=50, deadline=None)
    @given(a=masses, b=masses, t=st.floats(0.01, 5.0))
    def test_gap_quadratic_closed_form(a: float, b: float, t: float) -> None:
        """For psi(x) = x^2 the gap is a/(1+at) + b/(1+bt) - (a+b)/(1+(a+b)t)."""
        expected = a / (1 + a * t) + b / (1 + b * t) - (a + b) / (1 + (a + b) * t)
        gap = FlowEvaluator(BranchingMechanism.stable(1.0, 2.0)).superlinearity_gap(a, b, t)
        assert gap == pytest.approx(expected, rel=1e-9, abs=1e-15), "Gap departs from x^2 formula."

    @staticmethod
    def test_gap_is_raw_difference(quadratic: BranchingMechanism) -> None:
        """The gap is the plain difference of flows, with no clamping."""
        ev = FlowEvaluator(quadratic)
        a = np.array([0.5, 2.0, 40.0])
        b = np.array([0.25, 3.0, 1e-3])
        t = np.array([0.1, 1.0, 4.0])
        raw = ev.flow(a, t) + ev.flow(b, t) - ev.flow(a + b, t)
        assert np.array_equal(ev.superlinearity_gap(a, b, t), raw), "Gap should be unclamped."


class TestIntegrateFlow:
    """Class for testing the ODE oracle arguments."""

    @staticmethod
    def test_zero_time(quadratic: BranchingMechanism) -> None:
        """Zero time returns the starting mass."""
        assert integrate_flow(quadratic, 3.0, 0.0) == 3.0, "Zero time is the identity."

    @staticmethod
    @pytest.mark.parametrize("x0", [0.0, math.inf])
    def test_needs_finite_positive_start(quadratic: BranchingMechanism, x0: float) -> None:
        """The oracle starts from a finite positive mass."""
        with pytest.raises(DomainError):
            integrate_flow(quadratic, x0, 1.0)
