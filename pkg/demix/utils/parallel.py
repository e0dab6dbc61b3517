"""
Parallel execution helpers.

Work items run through joblib with BLAS pinned to a single thread, so results
do not depend on the number of workers.
"""

import logging
from typing import Any, Callable, Iterable, List, Optional

from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from demix.core.config import settings

logger = logging.getLogger(__name__)


def _call_single_threaded(func: Callable, args: tuple) -> Any:
    with threadpool_limits(limits=1):
        return func(*args)


def resolve_jobs(jobs: Optional[int]) -> int:
    """Worker count, falling back to ``settings.DEMIX_THREADS``."""
    return settings.DEMIX_THREADS if jobs is None else max(1, int(jobs))


def run_parallel(
    func: Callable, items: Iterable[tuple], jobs: Optional[int] = None
) -> List[Any]:
    """
    Apply ``func(*item)`` to every item, preserving input order.

    Args:
        func: Module-level callable (it may be shipped to worker processes)
        items: Argument tuples
        jobs: Worker count (default ``settings.DEMIX_THREADS``)

    Returns:
        list: Results in the order of ``items``
    """
    items = list(items)
    n_jobs = resolve_jobs(jobs)
    logger.debug(f"Running {len(items)} work items on {n_jobs} worker(s)")
    if n_jobs == 1:
        return [_call_single_threaded(func, args) for args in items]
    return Parallel(n_jobs=n_jobs)(
        delayed(_call_single_threaded)(func, args) for args in items
    )
