import math
from typing import Callable

import numpy as np

from smolab.cpp import UpsilonBank
from smolab.harness.acceptance import (
    check_bank_health,
    check_duality,
    check_kingman_cdi,
    check_measure_convergence,
    check_mkv_uniqueness,
    check_route_agreement,
    check_self_similarity,
    check_species_curve,
    exceedance_strictly_increasing,
    gene_measure_transforms,
    grid_shape_checks,
    speed_initializations,
    speed_target,
)
from smolab.harness.config import ExperimentConfig, profile_defaults
from smolab.harness.stats import FAIL, FLAGGED, PASS

ConfigFactory = Callable[..., ExperimentConfig]


def make_bank(times, samples) -> UpsilonBank:
    return UpsilonBank(1.0, 2.0, np.asarray(times, dtype=float), np.asarray(samples))


class TestSkippedChecks:
    """Checks outside their domain are reported as flagged, never failed."""

    @staticmethod
    def test_route_agreement_needs_feller(tiny_config: ConfigFactory) -> None:
        """The finite-difference route only exists for gamma = 2."""
        checks = check_route_agreement(tiny_config(mechanism_gamma=1.5))
        assert len(checks) == 1, "A single skip record is expected."
        assert checks[0].status == FLAGGED, "A skipped check is flagged."
        assert checks[0].detail.startswith("skipped"), "The detail names the skip."

    @staticmethod
    def test_mkv_needs_positive_delta(tiny_config: ConfigFactory) -> None:
        """The Picard scheme starts at delta, so delta = 0 is skipped."""
        check = check_mkv_uniqueness(tiny_config(delta=0.0))
        assert check.status == FLAGGED, "delta = 0 should skip the MK-V comparison."

    @staticmethod
    def test_self_similarity_needs_two_times() -> None:
        """A bank read only at t = 1 cannot compare t = 0.5 with t = 2."""
        bank = make_bank([1.0], np.linspace(1.0, 3.0, 60)[:, None])
        check = check_self_similarity(None, bank)
        assert check.status == FLAGGED, "Missing reading times should skip AC-4."


class TestBankHealth:
    """Class for testing the bank sanity checks."""

    @staticmethod
    def test_healthy_bank(tiny_config: ConfigFactory) -> None:
        """Samples above phi(1) with no flagged replicate pass both checks."""
        bank = make_bank([1.0], np.linspace(1.0, 3.0, 60)[:, None])
        checks = check_bank_health(tiny_config(), bank)
        assert [c.status for c in checks] == [PASS, PASS], "A healthy bank passes."

    @staticmethod
    def test_growth_violation(tiny_config: ConfigFactory) -> None:
        """A sample below phi(1) = 1 breaks the growth condition."""
        samples = np.linspace(0.5, 3.0, 60)[:, None]
        checks = check_bank_health(tiny_config(), make_bank([1.0], samples))
        assert checks[1].status == FAIL, "Growth condition should fail below phi(1)."

    @staticmethod
    def test_flagged_rate(tiny_config: ConfigFactory) -> None:
        """More than 1% of flagged replicates fails the rate check."""
        bank = UpsilonBank(1.0, 2.0, np.array([1.0]), np.ones((90, 1)), n_flagged=10)
        checks = check_bank_health(tiny_config(), bank)
        assert math.isclose(checks[0].observed, 0.1), "Flagged rate is 10 / 100."
        assert checks[0].status == FAIL, "A 10% flagged rate should fail."

    @staticmethod
    def test_self_similarity_same_samples(tiny_config: ConfigFactory) -> None:
        """Identical columns at t = 0.5 and t = 2 never reject."""
        column = np.linspace(1.0, 3.0, 80)
        bank = make_bank([0.5, 1.0, 2.0], np.column_stack([column] * 3))
        assert check_self_similarity(tiny_config(), bank).status == PASS, "Equal samples pass KS."


class TestCoalescentChecks:
    """Class for testing the coalescent acceptance checks at small sizes."""

    @staticmethod
    def test_kingman_band(tiny_config: ConfigFactory) -> None:
        """AC-1 targets the centre of [1.9, 2.1]."""
        check = check_kingman_cdi(tiny_config())
        assert math.isclose(check.target, 2.0), "Target is the band centre."
        assert math.isclose(check.tolerance, 0.1), "Tolerance is the band half-width."
        assert 1.0 < check.observed < 3.0, f"t*K_t = {check.observed} is far from 2."

    @staticmethod
    def test_species_curve_targets(tiny_config: ConfigFactory) -> None:
        """One check per time, with the target 2r / (2 + r t)."""
        cfg = tiny_config()
        fractions = np.full((4, len(cfg.coalescent_times)), 0.5)
        checks = check_species_curve(cfg, fractions)
        targets = [c.target for c in checks]
        expected = [2.0 / (2.0 + t) for t in cfg.coalescent_times]
        assert np.allclose(targets, expected), f"Targets {targets} differ from the curve."
        assert [c.status for c in checks] == [FAIL, FAIL, PASS], "Only t = 2 gives 1/2."

    @staticmethod
    def test_speed_target(tiny_config: ConfigFactory) -> None:
        """rho / n^2 is compared with 2 E(Upsilon) / t^2."""
        assert math.isclose(speed_target(tiny_config(speed_t=2.0), 3.0), 1.5), "2*3/4."

    @staticmethod
    def test_kingman_band_scales_with_rate(tiny_config: ConfigFactory) -> None:
        """With c = 2 the band is [0.95, 1.05] and t*K_t comes down near 1."""
        check = check_kingman_cdi(tiny_config(kingman_c=2.0))
        assert math.isclose(check.target, 1.0), "Target is 2 / c."
        assert math.isclose(check.tolerance, 0.05), "Half-width is 0.1 / c."
        assert 0.5 < check.observed < 1.5, f"t*K_t = {check.observed} is far from 1."

    @staticmethod
    def test_speed_default_cap(tiny_config: ConfigFactory) -> None:
        """speed_k_cap = 0 caps the maximal proxy at ceil(10 n / (c t))."""
        cfg = tiny_config(speed_k_cap=0, speed_n=20, speed_t=1.0, c_gene=1.0)
        inits = speed_initializations(cfg)
        assert inits["maximal"].value == 200, f"Cap {inits['maximal'].value} is not 200."
        assert inits["minimal"].value == 1, "Minimal starts with one gene."
        capped = speed_initializations(tiny_config(speed_k_cap=2))
        assert capped["maximal"].value == 2, "An explicit cap is kept."

    @staticmethod
    def test_profiles_use_default_cap() -> None:
        """Both profiles run the speed check with the default cap."""
        for profile in ("quick", "full"):
            assert profile_defaults(profile)["speed_k_cap"] == 0, f"{profile} caps by hand."


class TestMeasureConvergence:
    """Class for testing the rescaled gene measure against the Laplace grid."""

    @staticmethod
    def test_transform_layout(tiny_config: ConfigFactory) -> None:
        """One transform per replicate, time and lambda, all in [0, 1]."""
        cfg = tiny_config()
        transforms = gene_measure_transforms(cfg)
        shape = (cfg.measure_replicates, len(cfg.coalescent_times), len(cfg.probes))
        assert transforms.shape == shape, f"Shape {transforms.shape} is not {shape}."
        assert np.all((transforms > 0) & (transforms <= 1)), "Transforms of probability laws."

    @staticmethod
    def test_one_check_per_time_and_lambda(tiny_config: ConfigFactory) -> None:
        """A loose finite-n tolerance passes every cell."""
        cfg = tiny_config(measure_tol=0.15)
        checks = check_measure_convergence(cfg)
        assert len(checks) == len(cfg.coalescent_times) * len(cfg.probes), "One per cell."
        assert all(0 < c.target <= 1 for c in checks), "Targets are Laplace transforms."
        assert all(c.status == PASS for c in checks), f"Unexpected failures: {checks}"

    @staticmethod
    def test_far_transforms_fail(tiny_config: ConfigFactory) -> None:
        """Transforms pinned at 0 are far from the grid and fail."""
        cfg = tiny_config()
        transforms = np.zeros((4, len(cfg.coalescent_times), len(cfg.probes)))
        checks = check_measure_convergence(cfg, transforms)
        large = [c for c in checks if c.target > 0.5]
        assert large, "Some targets should exceed 1/2."
        assert all(c.status == FAIL for c in large), "Zero transforms must fail."


class TestDustMonotonicity:
    """Class for testing the strict exceedance ordering."""

    @staticmethod
    def test_strict_increase() -> None:
        """Interior ties fail, ties at 0 or 1 are allowed."""
        assert exceedance_strictly_increasing(np.array([0.2, 0.5, 1.0, 1.0])), "Tie at 1."
        assert exceedance_strictly_increasing(np.array([0.0, 0.0, 0.4])), "Tie at 0."
        assert not exceedance_strictly_increasing(np.array([0.3, 0.3, 0.8])), "Interior tie."
        assert not exceedance_strictly_increasing(np.array([0.5, 0.4])), "Decrease."


class TestAnalyticChecks:
    """Class for testing checks with exact answers."""

    @staticmethod
    def test_grid_shape(tiny_config: ConfigFactory) -> None:
        """The Laplace grid is pinned at 1, non-increasing and convex."""
        checks = grid_shape_checks(tiny_config())
        assert all(c.status == PASS for c in checks), f"Shape checks failed: {checks}"

    @staticmethod
    def test_duality(tiny_config: ConfigFactory) -> None:
        """One check per random tree, each within four standard errors."""
        checks = check_duality(tiny_config(tree_replicates=2000))
        assert len(checks) == 2, "n_random_trees is 2 at test sizes."
        assert all(c.stderr is not None and c.stderr > 0 for c in checks), "MC errors."

    @staticmethod
    def test_duality_needs_feller(tiny_config: ConfigFactory) -> None:
        """Without an exact transition the duality check is skipped."""
        checks = check_duality(tiny_config(mechanism_gamma=1.5))
        assert checks[0].status == FLAGGED, "Non-Feller duality should be skipped."
