import logging
from typing import Callable, List, Optional, TypeVar

import numpy as np
from joblib import Parallel, delayed

_logger = logging.getLogger(__name__)

T = TypeVar("T")


def spawn_generators(seed: int, n: int) -> List[np.random.Generator]:
    """Create independent random generators, one per replicate.

    Stream ``i`` only depends on ``seed`` and ``i``, so a replicate gives the same
    result whatever the number of replicates run alongside it, provided ``n``
    stays the same.

    Args:
        seed (int): Seed of the run. Must be non-negative.
        n (int): Number of streams.

    Returns:
        List[np.random.Generator]: ``n`` generators built from
        ``SeedSequence(seed).spawn(n)``.
    """
    if seed < 0:
        raise ValueError(f"Seed must be non-negative, got {seed}")
    children = np.random.SeedSequence(seed).spawn(n)
    return [np.random.default_rng(child) for child in children]


def as_generator(rng: Optional[np.random.Generator | int]) -> np.random.Generator:
    """Return ``rng`` unchanged or build a generator from an integer seed."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        raise ValueError("An explicit seed or generator is required")
    return np.random.default_rng(rng)


def run_replicates(
    task: Callable[[np.random.Generator], T],
    seed: int,
    n_replicates: int,
    workers: int = 1,
) -> List[T]:
    """Run ``task`` once per replicate on its own random stream.

    Args:
        task (Callable[[np.random.Generator], T]): Replicate task. Must be
            picklable when ``workers > 1``.
        seed (int): Seed of the run.
        n_replicates (int): Number of replicates.
        workers (int): Size of the worker pool. Defaults to 1 (in-process).

    Returns:
        List[T]: Replicate results, in replicate order.
    """
    generators = spawn_generators(seed, n_replicates)
    _logger.debug(f"Running {n_replicates} replicates on {workers} worker(s)")
    if workers <= 1:
        return [task(rng) for rng in generators]
    return list(Parallel(n_jobs=workers)(delayed(task)(rng) for rng in generators))


def derive_seed(seed: int, *keys: int) -> int:
    """Independent integer seed for a sub-task identified by ``keys``."""
    if seed < 0:
        raise ValueError(f"Seed must be non-negative, got {seed}")
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1, np.uint64)[0] >> 1)
