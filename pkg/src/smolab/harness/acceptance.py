"""Cross-route acceptance checks.

Every check returns :class:`CheckResult` objects; seeds are derived from the run
seed and a fixed per-check key so that checks can run in any order.
"""
import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..coalescent import GeneInitialization, kingman_block_counts, simulate_nested
from ..coalescent import cdi_speed_estimate, species_curve
from ..cpp import (
    DustReport,
    UpsilonBank,
    dust_solution,
    eternal_branch_mark,
    eternal_jump_times,
    maximal_marking_upsilon,
    picard_mkv,
    sample_cpp,
)
from ..cpp.marking import WINDOW_FACTOR
from ..csbp import (
    ProfileSolution,
    ShiftedMechanism,
    bound_holds,
    branching_extinction_mc,
    feller_laplace_exponent,
    feller_transition_sample,
    profile_solve,
    tree_branching_laplace_mc,
)
from ..mechanism import ODE_ORACLE_RTOL, FlowEvaluator, integrate_flow
from ..misc.random import derive_seed, run_replicates, spawn_generators
from ..smoluchowski import (
    LaplaceGrid,
    grid_error_estimate,
    mc_weak_solution,
    propagate_marks,
    random_binary_tree,
    solve_laplace_pde,
    tree_brackets,
)
from .config import ExperimentConfig
from .stats import CheckResult, StatReport, mc_mean

_logger = logging.getLogger(__name__)

KINGMAN_TIMES = np.geomspace(1e-3, 1e-2, 10)
KINGMAN_BAND = (1.9, 2.1)
SPECIES_RTOL = 0.05
MAX_FLAGGED_RATE = 0.01
DUST_READ_TIME = 0.5
PATHWISE_RTOL = 1e-12

# Seed keys, one per check family.
_KEY_KINGMAN, _KEY_SPECIES, _KEY_ROUTES, _KEY_BANK = 1, 2, 3, 4
_KEY_PICARD, _KEY_CPP, _KEY_LONG, _KEY_SPEED = 5, 6, 7, 8
_KEY_DUST, _KEY_DUALITY, _KEY_PROPERTIES, _KEY_EXTINCTION = 9, 10, 11, 12
_KEY_MEASURE = 13


def unit_masses(rng: np.random.Generator, size: int) -> np.ndarray:
    """Sampler of the point mass at 1."""
    return np.ones(size)


def triple_masses(rng: np.random.Generator, size: int) -> np.ndarray:
    """Sampler of the point mass at 3."""
    return np.full(size, 3.0)


def _skip(name: str, reason: str) -> CheckResult:
    _logger.warning(f"{name} skipped: {reason}")
    return CheckResult.flagged(name, math.nan, detail=f"skipped: {reason}")


def _mean_and_stderr(values) -> Tuple[float, float]:
    values = np.asarray(values, dtype=float)
    return mc_mean(values) if values.size > 1 else (float(values[0]), 0.0)


def check_kingman_cdi(cfg: ExperimentConfig) -> CheckResult:
    """``t K_t`` averaged over small times stays in ``[1.9, 2.1] / c``."""
    c = cfg.kingman_c
    times = KINGMAN_TIMES / c
    generators = spawn_generators(derive_seed(cfg.seed, _KEY_KINGMAN), cfg.kingman_replicates)
    values = [
        np.mean(times * kingman_block_counts(cfg.kingman_n, c, times, rng))
        for rng in generators
    ]
    mean, stderr = _mean_and_stderr(values)
    low, high = KINGMAN_BAND
    return CheckResult.within(
        "AC-1 kingman t*K_t", mean, 0.5 * (low + high) / c, 0.5 * (high - low) / c, stderr
    )


def species_fractions(cfg: ExperimentConfig) -> np.ndarray:
    """``s_{t/n} / n`` per replicate and rescaled time."""
    s0 = int(round(cfg.species_ratio * cfg.n))
    times = [t / cfg.n for t in cfg.coalescent_times]

    def task(rng: np.random.Generator) -> List[float]:
        record = simulate_nested(s0, GeneInitialization.minimal(), cfg.c_gene, times, rng)
        return [s / cfg.n for s in record.species]

    seed = derive_seed(cfg.seed, _KEY_SPECIES)
    return np.asarray(run_replicates(task, seed, cfg.coalescent_replicates, cfg.workers))


def check_species_curve(
    cfg: ExperimentConfig, fractions: Optional[np.ndarray] = None
) -> List[CheckResult]:
    """Rescaled species counts within 5% of ``2r / (2 + r t)``."""
    fractions = species_fractions(cfg) if fractions is None else fractions
    checks = []
    for j, t in enumerate(cfg.coalescent_times):
        target = float(species_curve(cfg.species_ratio, t))
        checks.append(
            CheckResult.within(
                f"AC-2 species curve t={t!r}",
                float(fractions[:, j].mean()),
                target,
                SPECIES_RTOL * target,
            )
        )
    return checks


def gene_measure_transforms(cfg: ExperimentConfig) -> np.ndarray:
    """Laplace transforms of the rescaled gene measure started from ``delta_1``.

    ``r n`` species carry ``n`` genes each. Shape ``(replicates, times, probes)``
    with times sorted.
    """
    n = cfg.measure_n
    s0 = max(1, int(round(cfg.species_ratio * n)))
    init = GeneInitialization.constant(n)
    times = [t / n for t in sorted(cfg.coalescent_times)]

    def task(rng: np.random.Generator) -> np.ndarray:
        return simulate_nested(s0, init, cfg.c_gene, times, rng).laplace(n, cfg.probes)

    seed = derive_seed(cfg.seed, _KEY_MEASURE)
    return np.asarray(run_replicates(task, seed, cfg.measure_replicates, cfg.workers))


def check_measure_convergence(
    cfg: ExperimentConfig, transforms: Optional[np.ndarray] = None
) -> List[CheckResult]:
    """Rescaled gene measure against the Laplace grid with ``delta = 2 / r``.

    The grid uses :meth:`ExperimentConfig.coalescent_mechanism`. The tolerance
    adds ``measure_tol`` for the finite-``n`` bias to three standard errors and
    the grid error.
    """
    times = sorted(cfg.coalescent_times)
    transforms = gene_measure_transforms(cfg) if transforms is None else transforms
    grid, errors = grid_error_estimate(
        lambda lam: np.exp(-lam),
        2.0 / cfg.species_ratio,
        cfg.coalescent_mechanism(),
        times,
        cfg.probes,
        n_lambda=cfg.pde_n_lambda,
        lambda_max=cfg.pde_lambda_max,
    )
    checks = []
    for i, t in enumerate(times):
        for j, lam in enumerate(cfg.probes):
            mean, stderr = _mean_and_stderr(transforms[:, i, j])
            grid_error = float(errors[i, j])
            checks.append(
                CheckResult.within(
                    f"gene measure vs Laplace grid t={t!r} lambda={lam!r}",
                    mean,
                    float(grid.at(t, lam)),
                    3.0 * stderr + grid_error + cfg.measure_tol,
                    stderr,
                    detail=f"n={cfg.measure_n} grid_error={grid_error!r}",
                )
            )
    return checks


def check_route_agreement(cfg: ExperimentConfig) -> List[CheckResult]:
    """Finite-difference grid and random-tree Monte Carlo agree at every lambda."""
    m = cfg.mechanism()
    if not m.is_feller or cfg.delta <= 0:
        return [_skip("AC-3 route agreement", "needs gamma = 2 and delta > 0")]
    grid, errors = grid_error_estimate(
        lambda lam: np.exp(-lam),
        cfg.delta,
        m,
        cfg.pde_times,
        cfg.probes,
        n_lambda=cfg.pde_n_lambda,
        lambda_max=cfg.pde_lambda_max,
    )
    checks = []
    for i, t in enumerate(sorted(cfg.pde_times)):
        estimate = mc_weak_solution(
            t,
            cfg.delta,
            unit_masses,
            m,
            cfg.probes,
            cfg.mc_replicates,
            derive_seed(cfg.seed, _KEY_ROUTES, i),
            cfg.workers,
        )
        for j, lam in enumerate(cfg.probes):
            stderr = float(estimate.stderrs[j])
            checks.append(
                CheckResult.within(
                    f"AC-3 route agreement t={t!r} lambda={lam!r}",
                    float(estimate.means[j]),
                    float(grid.at(t, lam)),
                    3.0 * stderr + float(errors[i, j]),
                    stderr,
                    detail=f"grid_error={float(errors[i, j])!r}",
                )
            )
    return checks


def build_upsilon_bank(cfg: ExperimentConfig) -> UpsilonBank:
    return maximal_marking_upsilon(
        cfg.mechanism(),
        cfg.upsilon_replicates,
        derive_seed(cfg.seed, _KEY_BANK),
        time_grid=cfg.upsilon_times,
        delta0=cfg.upsilon_delta0,
        tol_rel=cfg.upsilon_tol,
        k_max=cfg.upsilon_k_max,
        workers=cfg.workers,
    )


def check_bank_health(cfg: ExperimentConfig, bank: UpsilonBank) -> List[CheckResult]:
    """Flagged-replicate rate and the growth condition on every sample."""
    floor = FlowEvaluator(bank.mechanism).phi(1.0)
    return [
        CheckResult.within(
            "upsilon bank flagged rate",
            bank.flagged_rate,
            0.0,
            MAX_FLAGGED_RATE,
            detail=f"n_flagged={bank.n_flagged}",
        ),
        CheckResult.hard(
            "upsilon bank growth condition",
            bool(np.all(bank.samples >= floor * (1.0 - PATHWISE_RTOL))),
            detail=f"phi(1)={floor!r}",
        ),
    ]


def check_self_similarity(cfg: ExperimentConfig, bank: UpsilonBank) -> CheckResult:
    """``t^beta m0+(t)`` has the same law at ``t = 0.5`` and ``t = 2``."""
    name = "AC-4 self-similarity"
    times = list(bank.times)
    if not (np.any(np.isclose(times, 0.5)) and np.any(np.isclose(times, 2.0))):
        return _skip(name, "upsilon_times must contain 0.5 and 2")
    return CheckResult.ks(name, bank.at(0.5), bank.at(2.0), cfg.alpha)


def eternal_marginal(
    cfg: ExperimentConfig, t_abs: float, replicates: int, key: int
) -> np.ndarray:
    """``m0(t_abs)`` of the level-``delta`` marking started from the unit mass."""
    m = cfg.mechanism()
    delta = cfg.delta

    def task(rng: np.random.Generator) -> float:
        cpp = sample_cpp(WINDOW_FACTOR * t_abs, delta, rng)
        return float(eternal_branch_mark(cpp, delta, 1.0, m, [t_abs], rng).m0[-1])

    return np.asarray(
        run_replicates(task, derive_seed(cfg.seed, key), replicates, cfg.workers)
    )


def check_mkv_uniqueness(cfg: ExperimentConfig) -> CheckResult:
    """Picard fixed point and CPP marking share their horizon marginal."""
    name = "AC-5 MK-V uniqueness"
    if cfg.delta <= 0:
        return _skip(name, "needs delta > 0")
    picard = picard_mkv(
        unit_masses,
        cfg.delta,
        cfg.mechanism(),
        cfg.picard_horizon,
        cfg.picard_ensemble,
        cfg.picard_iterations,
        derive_seed(cfg.seed, _KEY_PICARD),
    )
    marks = eternal_marginal(cfg, cfg.delta + cfg.picard_horizon, cfg.cpp_replicates, _KEY_CPP)
    check = CheckResult.ks(name, picard.final, marks, cfg.alpha)
    _logger.debug(f"Picard W1 between iterates: {picard.distances}")
    return check


def profile_for(cfg: ExperimentConfig, coalescent: bool = False) -> ProfileSolution:
    m = cfg.coalescent_mechanism() if coalescent else cfg.mechanism()
    return profile_solve(m, cfg.profile_x_max, cfg.profile_tol)


def check_profile_vs_bank(
    cfg: ExperimentConfig, bank: UpsilonBank, solution: ProfileSolution
) -> List[CheckResult]:
    """``-h'(0)`` matches the bank mean, and ``h`` respects its exponential bound."""
    mean, stderr = mc_mean(bank.upsilon)
    return [
        CheckResult.within(
            "AC-6 profile slope vs bank mean", mean, solution.e_upsilon, 3.0 * stderr, stderr
        ),
        CheckResult.hard("AC-6 profile bound", bound_holds(solution)),
    ]


def check_long_time(cfg: ExperimentConfig, bank: UpsilonBank) -> CheckResult:
    """Rescaled Picard marginal at a long horizon matches the bank in law."""
    name = "AC-7 long-time law"
    if cfg.delta <= 0:
        return _skip(name, "needs delta > 0")
    m = cfg.mechanism()
    horizon = cfg.picard_long_horizon
    picard = picard_mkv(
        unit_masses,
        cfg.delta,
        m,
        horizon,
        cfg.picard_ensemble,
        cfg.picard_iterations,
        derive_seed(cfg.seed, _KEY_LONG),
    )
    # Absolute CPP height of the Picard time ``horizon`` is ``horizon + delta``.
    scaled = (horizon + cfg.delta) ** m.beta * picard.final
    return CheckResult.ks(name, scaled, bank.upsilon, cfg.alpha)


def speed_target(cfg: ExperimentConfig, e_upsilon_half: float) -> float:
    return 2.0 * e_upsilon_half / cfg.speed_t**2


def speed_initializations(cfg: ExperimentConfig) -> Dict[str, GeneInitialization]:
    """Minimal and maximal gene initializations of the speed check.

    ``speed_k_cap = 0`` gives the maximal proxy its default cap ``10 n / (c t)``.
    """
    return {
        "minimal": GeneInitialization.minimal(),
        "maximal": GeneInitialization.maximal(
            cfg.speed_n, cfg.c_gene, cfg.speed_t, k_cap=cfg.speed_k_cap or None
        ),
    }


def check_speed(cfg: ExperimentConfig, e_upsilon_half: float) -> List[CheckResult]:
    """``rho_{t/n} / n^2`` close to ``2 E(Upsilon_{c/2}) / t^2`` for two initializations."""
    target = speed_target(cfg, e_upsilon_half)
    s0 = int(round(cfg.speed_species_ratio * cfg.speed_n))
    checks = []
    for k, (label, init) in enumerate(speed_initializations(cfg).items()):
        mean, stderr = cdi_speed_estimate(
            cfg.speed_n,
            cfg.speed_t,
            cfg.c_gene,
            cfg.speed_replicates,
            derive_seed(cfg.seed, _KEY_SPEED, k),
            init_genes=init,
            s0=s0,
            workers=cfg.workers,
        )
        checks.append(
            CheckResult.within(
                f"AC-8 speed of CDI ({label})",
                mean,
                target,
                cfg.speed_rtol * target,
                stderr,
                detail=f"s0={s0}",
            )
        )
    return checks


def run_dust(
    cfg: ExperimentConfig, sampler=unit_masses, mean_x: float = 1.0, key: int = 0
) -> DustReport:
    return dust_solution(
        sampler,
        cfg.dust_deltas,
        cfg.mechanism(),
        cfg.dust_times,
        cfg.dust_replicates,
        derive_seed(cfg.seed, _KEY_DUST, key),
        mean_x=mean_x,
        workers=cfg.workers,
    )


def exceedance_strictly_increasing(exceedance: np.ndarray) -> bool:
    """Strict increase along increasing times; ties only where both values sit at 0 or 1."""
    p = np.asarray(exceedance, dtype=float)
    tied_at_bound = (p[:-1] == p[1:]) & ((p[1:] == 0.0) | (p[1:] == 1.0))
    return bool(np.all((np.diff(p) > 0) | tied_at_bound))


def check_dust(
    cfg: ExperimentConfig, low: Optional[DustReport] = None
) -> List[CheckResult]:
    """Dust markings vanish as ``t`` decreases yet stay positive, and depend on ``E(X)``."""
    low = run_dust(cfg, unit_masses, 1.0, 0) if low is None else low
    high = run_dust(cfg, triple_masses, 3.0, 1)
    exceedance = low.exceedance(cfg.dust_threshold)
    checks = [
        CheckResult.hard(
            "AC-9 dust exceedance decreases as t decreases",
            exceedance_strictly_increasing(exceedance),
            detail=f"exceedance={exceedance.tolist()}",
        ),
        CheckResult.hard(
            "AC-9 dust has no zero marks",
            int(low.zero_counts().sum() + high.zero_counts().sum()) == 0,
        ),
    ]
    if not np.any(np.isclose(low.times, DUST_READ_TIME)):
        checks.append(_skip("AC-9 dust ordering", "dust_times must contain 0.5"))
        return checks
    j = int(np.flatnonzero(np.isclose(low.times, DUST_READ_TIME))[0])
    gap = float(high.means[j] - low.means[j])
    combined = math.hypot(float(low.stderrs[j]), float(high.stderrs[j]))
    checks.append(
        CheckResult.hard(
            "AC-9 dust ordering by E(X)",
            gap > 3.0 * combined,
            detail=f"gap={gap!r} combined_stderr={combined!r}",
        )
    )
    return checks


def check_duality(cfg: ExperimentConfig) -> List[CheckResult]:
    """Branching-CSBP Laplace transform on fixed trees equals ``exp(-F(tree, 1))``."""
    m = cfg.mechanism()
    if not m.is_feller:
        return [_skip("AC-10 duality", "needs gamma = 2")]
    generators = spawn_generators(derive_seed(cfg.seed, _KEY_DUALITY), 2 * cfg.n_random_trees)
    checks = []
    for i in range(cfg.n_random_trees):
        tree = random_binary_tree(3, 1.0, generators[2 * i])
        ones = np.ones(tree.n_leaves)
        exact = math.exp(-propagate_marks(tree, ones, m))
        mean, stderr = tree_branching_laplace_mc(
            tree, 1.0, ones, m, cfg.tree_replicates, generators[2 * i + 1]
        )
        checks.append(
            CheckResult.within(f"AC-10 duality tree {i}", mean, exact, 4.0 * stderr, stderr)
        )
    return checks


def check_extinction(cfg: ExperimentConfig, solution: ProfileSolution) -> List[CheckResult]:
    """Branching-CSBP extinction brackets against the profile and its bound."""
    m = cfg.mechanism()
    x = cfg.extinction_x
    estimate = branching_extinction_mc(
        ShiftedMechanism.supercritical(m),
        x,
        cfg.extinction_replicates,
        derive_seed(cfg.seed, _KEY_EXTINCTION),
        depth_cap=cfg.depth_cap,
        workers=cfg.workers,
    )
    h_x = float(np.interp(x, solution.x, solution.h))
    bound = math.exp(-x * (m.beta / m.c) ** m.beta)
    slack = 3.0 * estimate.stderr
    checks = [
        CheckResult.hard(
            "extinction lower bracket below bound",
            estimate.lower <= bound + slack,
            detail=f"lower={estimate.lower!r} bound={bound!r}",
        ),
        CheckResult.hard(
            "extinction brackets contain profile",
            estimate.lower - slack <= h_x <= estimate.upper + slack,
            detail=f"h={h_x!r} bracket=[{estimate.lower!r}, {estimate.upper!r}]",
        ),
    ]
    if estimate.flagged:
        checks.append(
            CheckResult.flagged(
                "extinction bracket width", estimate.upper - estimate.lower, "inconclusive"
            )
        )
    return checks


def property_suite(cfg: ExperimentConfig) -> List[CheckResult]:
    """Pathwise and algebraic properties that must hold exactly on every run."""
    m = cfg.mechanism()
    evaluator = FlowEvaluator(m)
    rng = np.random.default_rng(derive_seed(cfg.seed, _KEY_PROPERTIES))
    checks = []

    x = rng.exponential(2.0, 50)
    s, t = rng.uniform(0.0, 3.0, 50), rng.uniform(0.0, 3.0, 50)
    composed = evaluator.flow(evaluator.flow(x, s), t)
    direct = evaluator.flow(x, s + t)
    checks.append(
        CheckResult.hard(
            "flow semigroup",
            bool(np.allclose(composed, direct, rtol=1e-12, atol=0.0)),
        )
    )
    oracle_ok = all(
        math.isclose(
            evaluator.flow(float(x0), float(t0)),
            integrate_flow(m, float(x0), float(t0)),
            rel_tol=ODE_ORACLE_RTOL,
        )
        for x0, t0 in zip(x[:5] + 1e-3, t[:5])
    )
    checks.append(CheckResult.hard("flow matches ODE oracle", oracle_ok))

    brackets_ok = True
    for n_leaves in range(1, 7):
        tree = random_binary_tree(n_leaves, 1.0 + rng.random(), rng)
        marks = rng.exponential(1.0, tree.n_leaves)
        value = propagate_marks(tree, marks, m)
        lower, upper = tree_brackets(tree, marks, m)
        slack = PATHWISE_RTOL * max(upper, 1.0)
        brackets_ok &= lower - slack <= value <= upper + slack
    checks.append(CheckResult.hard("tree brackets", bool(brackets_ok)))

    growth_ok = True
    monotone_ok = True
    grid = np.array([0.5, 1.0, 2.0])
    for _ in range(20):
        cpp = sample_cpp(WINDOW_FACTOR * grid[-1], 0.1, rng)
        previous = None
        for k in range(4):
            delta = 0.1 * 2.0**-k
            cpp = cpp.refine(delta, rng)
            marking = eternal_branch_mark(cpp, delta, math.inf, m, grid, rng)
            cpp = marking.cpp
            phi = evaluator.phi(grid - delta)
            growth_ok &= bool(np.all(marking.m0 >= phi * (1.0 - PATHWISE_RTOL)))
            if previous is not None:
                monotone_ok &= bool(np.all(marking.m0 <= previous * (1.0 + PATHWISE_RTOL)))
            previous = marking.m0
    checks.append(CheckResult.hard("growth condition", growth_ok))
    checks.append(CheckResult.hard("marking monotone in delta", monotone_ok))

    increments = []
    for _ in range(200):
        cpp = sample_cpp(WINDOW_FACTOR * 10.0, 1e-3, rng)
        jumps = eternal_jump_times(cpp, 1e-3, 10.0)
        increments.extend(np.diff(np.log(np.concatenate(([1e-3], jumps)))))
    checks.append(
        CheckResult.ks(
            "eternal jump clock has rate 1/t",
            np.asarray(increments),
            rng.exponential(1.0, len(increments)),
            cfg.alpha,
        )
    )

    if m.is_feller:
        checks.extend(_feller_checks(m, rng))
        checks.extend(grid_shape_checks(cfg))
    return checks


def _feller_checks(m, rng: np.random.Generator) -> List[CheckResult]:
    checks = []
    for r in (0.0, m.beta):
        sm = ShiftedMechanism(m, r)
        for t in (0.1, 1.0):
            z = feller_transition_sample(sm, 1.0, t, rng, size=10_000)
            for lam in (0.2, 1.0, 5.0):
                mean, stderr = mc_mean(np.exp(-lam * z))
                exact = math.exp(-feller_laplace_exponent(sm, t, lam))
                checks.append(
                    CheckResult.within(
                        f"feller transition r={r!r} t={t!r} lambda={lam!r}",
                        mean,
                        exact,
                        4.0 * stderr,
                        stderr,
                    )
                )
    return checks


def grid_shape_checks(
    cfg: ExperimentConfig, grid: Optional[LaplaceGrid] = None
) -> List[CheckResult]:
    """Laplace transforms stay pinned at 1 in 0, non-increasing and convex."""
    if grid is None:
        delta = cfg.delta if cfg.delta > 0 else 1.0
        grid = solve_laplace_pde(
            LaplaceGrid.initial(lambda lam: np.exp(-lam), delta, n_lambda=61),
            cfg.mechanism(),
            1.0,
            record_times=[0.25, 0.5],
        )
    values = grid.values
    second = np.diff(values, n=2, axis=1)
    return [
        CheckResult.hard("grid keeps u(t, 0) = 1", bool(np.all(values[:, 0] == 1.0))),
        CheckResult.hard(
            "grid is non-increasing in lambda", bool(np.all(np.diff(values, axis=1) <= 1e-12))
        ),
        CheckResult.hard(
            "grid is convex in lambda",
            bool(np.all(_divided_second(values, grid.lambdas) >= -1e-8)),
            detail=f"min second difference {float(second.min())!r}",
        ),
    ]


def _divided_second(values: np.ndarray, lambdas: np.ndarray) -> np.ndarray:
    slopes = np.diff(values, axis=1) / np.diff(lambdas)
    return np.diff(slopes, axis=1)


def run_acceptance(cfg: ExperimentConfig, bank: Optional[UpsilonBank] = None) -> StatReport:
    """Run AC-1 to AC-10 and the property suite."""
    report = StatReport()
    report.add(check_kingman_cdi(cfg))
    for check in check_species_curve(cfg):
        report.add(check)
    for check in check_measure_convergence(cfg):
        report.add(check)
    for check in check_route_agreement(cfg):
        report.add(check)
    bank = build_upsilon_bank(cfg) if bank is None else bank
    for check in check_bank_health(cfg, bank):
        report.add(check)
    report.add(check_self_similarity(cfg, bank))
    report.add(check_mkv_uniqueness(cfg))
    if cfg.mechanism().is_feller:
        solution = profile_for(cfg)
        for check in check_profile_vs_bank(cfg, bank, solution):
            report.add(check)
        for check in check_extinction(cfg, solution):
            report.add(check)
    else:
        report.add(_skip("AC-6 profile", "needs gamma = 2"))
    report.add(check_long_time(cfg, bank))
    for check in check_speed(cfg, profile_for(cfg, coalescent=True).e_upsilon):
        report.add(check)
    for check in check_dust(cfg):
        report.add(check)
    for check in check_duality(cfg):
        report.add(check)
    for check in property_suite(cfg):
        report.add(check)
    return report
