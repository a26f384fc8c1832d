"""Subcommands of the ``smolab`` command line.

Each experiment takes an :class:`ExperimentConfig`, writes its artifacts under
``config.out`` and returns the :class:`StatReport` of the checks it ran.
"""
import dataclasses
import logging
import math
import time
from pathlib import Path
from typing import Callable, Dict, List

import numpy as np

from ..coalescent import GeneInitialization, initialization_gap, simulate_nested
from ..cpp import UpsilonBank, eternal_branch_mark, sample_cpp
from ..cpp.marking import WINDOW_FACTOR
from ..csbp import bound_holds, is_nonincreasing
from ..misc.errors import ConfigError, MissingArtifactError
from ..misc.random import derive_seed, run_replicates
from ..misc.utils import export_dict_to_json, write_csv
from ..smoluchowski import (
    grid_error_estimate,
    infinite_pop_weak_solution,
    mc_weak_solution,
)
from . import acceptance
from .acceptance import PATHWISE_RTOL
from .config import ExperimentConfig
from .stats import CheckResult, StatReport

_logger = logging.getLogger(__name__)

BANK_FILE = "upsilon_bank.csv"
BANK_PRODUCER = "upsilon-bank"

# Seed keys of the standalone subcommands, disjoint from the acceptance keys.
_KEY_TRAJECTORY, _KEY_GAP, _KEY_WEAK, _KEY_MARKS = 21, 22, 23, 24

Experiment = Callable[[ExperimentConfig], StatReport]


def _out(cfg: ExperimentConfig, name: str) -> Path:
    return cfg.out_dir / name


def gene_initialization(cfg: ExperimentConfig) -> GeneInitialization:
    """Gene initialization selected by ``init_mode``; ``k_cap = 0`` keeps the default cap."""
    if cfg.init_mode == "minimal":
        return GeneInitialization.minimal()
    if cfg.init_mode == "constant":
        return GeneInitialization.constant(cfg.init_value)
    return GeneInitialization.maximal(
        cfg.n, cfg.c_gene, min(cfg.coalescent_times), k_cap=cfg.k_cap or None
    )


def load_bank(cfg: ExperimentConfig) -> UpsilonBank:
    """Read the profile bank written by the ``upsilon-bank`` subcommand.

    Raises:
        MissingArtifactError: If the bank or its sidecar is absent.
        ConfigError: If the bank was built for another exponent.
    """
    path = _out(cfg, BANK_FILE)
    if not path.exists() or not path.with_suffix(".json").exists():
        raise MissingArtifactError(str(path), BANK_PRODUCER)
    bank = UpsilonBank.load(path)
    if not math.isclose(bank.gamma, cfg.mechanism_gamma):
        raise ConfigError(
            f"Bank {path} was built for gamma = {bank.gamma}, config has "
            f"mechanism_gamma = {cfg.mechanism_gamma}; rerun `{BANK_PRODUCER}`"
        )
    _logger.info(f"Loaded {bank.samples.shape[0]} profile samples from {path}")
    return bank


def simulate_coalescent(cfg: ExperimentConfig) -> StatReport:
    """One nested trajectory from ``r n`` species, plus the Kingman and species checks."""
    report = StatReport()
    s0 = int(round(cfg.species_ratio * cfg.n))
    times = [t / cfg.n for t in cfg.coalescent_times]
    record = simulate_nested(
        s0,
        gene_initialization(cfg),
        cfg.c_gene,
        times,
        np.random.default_rng(derive_seed(cfg.seed, _KEY_TRAJECTORY)),
    )
    write_csv(
        _out(cfg, "coalescent_trajectory.csv"),
        ["time", "species", "genes", "atom_mass", "atom_weight"],
        record.csv_rows(cfg.n),
    )
    summary = {"s0": s0, "n": cfg.n, **record.summary(cfg.n)}
    if cfg.init_mode == "maximal":
        summary["initialization_gap"] = initialization_gap(
            cfg.n,
            min(cfg.coalescent_times),
            cfg.c_gene,
            cfg.coalescent_replicates,
            derive_seed(cfg.seed, _KEY_GAP),
            k_cap=cfg.k_cap or None,
            workers=cfg.workers,
        )
        report.add(
            CheckResult.flagged(
                "initialization gap",
                summary["initialization_gap"]["mean_gap"],
                detail="minimal vs maximal proxy, exploratory",
            )
        )
    export_dict_to_json(summary, _out(cfg, "coalescent_summary.json"))

    report.add(acceptance.check_kingman_cdi(cfg))
    for check in acceptance.check_species_curve(cfg):
        report.add(check)
    return report


def solve_pde(cfg: ExperimentConfig) -> StatReport:
    """Laplace grid for the unit point mass, with a two-resolution error estimate."""
    m = cfg.mechanism()
    if not m.is_feller:
        raise ConfigError("solve-pde needs mechanism_gamma = 2")
    if cfg.delta <= 0:
        raise ConfigError("solve-pde starts from the point mass and needs delta > 0")
    grid, errors = grid_error_estimate(
        lambda lam: np.exp(-lam),
        cfg.delta,
        m,
        cfg.pde_times,
        cfg.probes,
        n_lambda=cfg.pde_n_lambda,
        lambda_max=cfg.pde_lambda_max,
    )
    rows = [
        (float(t), float(lam), float(u))
        for t, row in zip(grid.times, grid.values)
        for lam, u in zip(grid.lambdas, row)
    ]
    write_csv(_out(cfg, "laplace_grid.csv"), ["t", "lambda", "u"], rows)
    export_dict_to_json(
        {
            "delta": cfg.delta,
            "dt": grid.dt,
            "times": sorted(cfg.pde_times),
            "probes": list(cfg.probes),
            "grid_errors": errors.tolist(),
        },
        _out(cfg, "laplace_grid.json"),
    )
    report = StatReport()
    for check in acceptance.grid_shape_checks(cfg, grid):
        report.add(check)
    report.add(
        CheckResult.flagged(
            "grid error estimate", float(errors.max()), detail="max over probes"
        )
    )
    return report


def mc_weak(cfg: ExperimentConfig) -> StatReport:
    """Monte Carlo weak solution; ``delta = 0`` reads the profile bank."""
    m = cfg.mechanism()
    bank = load_bank(cfg).rescaled(cfg.mechanism_c) if cfg.delta == 0 else None
    rows = []
    report = StatReport()
    for i, t in enumerate(sorted(cfg.pde_times)):
        if bank is None:
            estimate = mc_weak_solution(
                t,
                cfg.delta,
                acceptance.unit_masses,
                m,
                cfg.probes,
                cfg.mc_replicates,
                derive_seed(cfg.seed, _KEY_WEAK, i),
                cfg.workers,
            )
        else:
            if t <= 0:
                raise ConfigError("The infinite-population route needs times > 0")
            estimate = infinite_pop_weak_solution(t, m, cfg.probes, bank.upsilon)
        rows.extend((t, *row) for row in estimate.csv_rows())
        order = np.argsort(estimate.probes)
        means = estimate.means[order]
        in_band = np.all((means >= 0) & (means <= 1))
        report.add(
            CheckResult.hard(
                f"Laplace estimate shape t={t!r}",
                bool(in_band and np.all(np.diff(means) <= 0)),
                detail=f"mean mass {estimate.mean_mass()!r}",
            )
        )
    write_csv(_out(cfg, "mc_weak.csv"), ["t", "lambda", "mean", "stderr"], rows)
    return report


def cpp_mark(cfg: ExperimentConfig) -> StatReport:
    """Eternal-branch markings at level ``delta`` from unit masses, with brackets.

    Marks are read at heights ``delta + t`` for ``t`` in ``pde_times``.
    """
    if cfg.delta <= 0:
        raise ConfigError("cpp-mark marks at a positive level delta")
    m = cfg.mechanism()
    grid = [cfg.delta + t for t in sorted(cfg.pde_times)]

    def task(rng: np.random.Generator):
        cpp = sample_cpp(WINDOW_FACTOR * grid[-1], cfg.delta, rng)
        return eternal_branch_mark(cpp, cfg.delta, 1.0, m, grid, rng, with_brackets=True)

    markings = run_replicates(
        task, derive_seed(cfg.seed, _KEY_MARKS), cfg.cpp_replicates, cfg.workers
    )
    rows: List[tuple] = []
    inside = True
    for i, marking in enumerate(markings):
        rows.extend(marking.csv_rows(i))
        slack = PATHWISE_RTOL * np.maximum(marking.upper, 1.0)
        inside &= bool(
            np.all(marking.lower - slack <= marking.m0)
            and np.all(marking.m0 <= marking.upper + slack)
        )
    write_csv(_out(cfg, "markings.csv"), ["replicate", "t", "m0"], rows)
    report = StatReport()
    report.add(CheckResult.hard("marking brackets", inside))
    return report


def upsilon_bank(cfg: ExperimentConfig) -> StatReport:
    """Sample the self-similar profile and save it for dependent subcommands."""
    bank = acceptance.build_upsilon_bank(cfg)
    bank.save(_out(cfg, BANK_FILE))
    report = StatReport()
    for check in acceptance.check_bank_health(cfg, bank):
        report.add(check)
    report.add(acceptance.check_self_similarity(cfg, bank))
    return report


def profile_ode(cfg: ExperimentConfig) -> StatReport:
    """Shooting solve of the profile equation for ``psi``."""
    if not cfg.mechanism().is_feller:
        raise ConfigError("profile-ode needs mechanism_gamma = 2")
    solution = acceptance.profile_for(cfg)
    solution.export(_out(cfg, "profile.csv"), _out(cfg, "profile.json"))
    report = StatReport()
    report.add(CheckResult.hard("profile bound", bound_holds(solution)))
    report.add(CheckResult.hard("profile is non-increasing", is_nonincreasing(solution)))
    report.add(
        CheckResult.flagged(
            "profile residual",
            float(np.max(np.abs(solution.residual()))),
            detail="finite-difference second derivative",
        )
    )
    return report


def dust(cfg: ExperimentConfig) -> StatReport:
    """Dust solutions along the level sequence ``dust_deltas`` with ``X = 1``."""
    low = acceptance.run_dust(cfg)
    write_csv(
        _out(cfg, "dust.csv"), ["t", "mean", "upper_bound", "lower_bound"], low.csv_rows()
    )
    export_dict_to_json(low.summary(cfg.dust_threshold), _out(cfg, "dust.json"))
    report = StatReport()
    for check in acceptance.check_dust(cfg, low):
        report.add(check)
    return report


def speed_cdi(cfg: ExperimentConfig) -> StatReport:
    """Speed of coming down from infinity against the quadratic profile bank."""
    bank = load_bank(cfg)
    if not bank.mechanism.is_feller:
        raise ConfigError("speed-cdi needs a bank built with mechanism_gamma = 2")
    half = bank.rescaled(cfg.c_gene / 2.0).upsilon
    e_half = float(np.mean(half))
    report = StatReport()
    checks = acceptance.check_speed(cfg, e_half)
    for check in checks:
        report.add(check)
    profile_value = acceptance.profile_for(cfg, coalescent=True).e_upsilon
    report.add(
        CheckResult.flagged(
            "profile E(Upsilon_(c/2))", profile_value, detail=f"bank mean {e_half!r}"
        )
    )
    write_csv(
        _out(cfg, "speed_cdi.csv"),
        ["check", "mean", "stderr", "target"],
        [(c.name, c.observed, c.stderr, c.target) for c in checks],
    )
    return report


def acceptance_suite(cfg: ExperimentConfig) -> StatReport:
    """Run every acceptance criterion; the bank it builds is saved alongside."""
    bank = acceptance.build_upsilon_bank(cfg)
    bank.save(_out(cfg, BANK_FILE))
    return acceptance.run_acceptance(cfg, bank)


EXPERIMENTS: Dict[str, Experiment] = {
    "simulate-coalescent": simulate_coalescent,
    "solve-pde": solve_pde,
    "mc-weak": mc_weak,
    "cpp-mark": cpp_mark,
    "upsilon-bank": upsilon_bank,
    "profile-ode": profile_ode,
    "dust": dust,
    "speed-cdi": speed_cdi,
    "acceptance": acceptance_suite,
}


def report_path(cfg: ExperimentConfig) -> Path:
    return _out(cfg, f"{cfg.experiment.replace('-', '_')}_report.json")


def run(cfg: ExperimentConfig) -> StatReport:
    """Dispatch ``cfg.experiment`` and write its JSON report.

    The report holds the configuration, the checks and, under ``"timing"``, the
    wall-clock duration; everything but ``"timing"`` is reproducible from the seed.

    Raises:
        ConfigError: If the experiment name is unknown.
    """
    if cfg.experiment not in EXPERIMENTS:
        raise ConfigError(
            f"Unknown experiment {cfg.experiment!r}, expected one of {list(EXPERIMENTS)}"
        )
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    _logger.info(f"Running {cfg.experiment} with seed {cfg.seed} into {cfg.out_dir}")
    start = time.perf_counter()
    report = EXPERIMENTS[cfg.experiment](cfg)
    elapsed = time.perf_counter() - start
    export_dict_to_json(
        {
            "experiment": cfg.experiment,
            "config": dataclasses.asdict(cfg),
            "report": report.as_dict(),
            "timing": {"seconds": elapsed},
        },
        report_path(cfg),
    )
    _logger.info(
        f"{cfg.experiment} finished in {elapsed:.1f}s: "
        + ("all checks passed" if report.passed else "some checks FAILED")
    )
    return report
