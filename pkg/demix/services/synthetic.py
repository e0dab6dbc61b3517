"""
Synthetic instances and phase-transition sweeps.

Planted entry-wise and column-wise instances drawn from a seeded PCG64
generator, and the sweep harness that runs every (rank, sparsity) cell over
several trials and a lambda grid.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from demix.core.config import settings
from demix.core.exceptions import DemixError, InputError
from demix.models.domain import Components, DemixProblem, OracleModel, normalize_columns
from demix.models.schemas import PhaseCellResult, SolverConfig, SparsityMode
from demix.numerics.linalg import pseudo_inverse
from demix.services.apg_solver import lambda_grid, solve
from demix.services.baselines import identity_problem, transformed_problem
from demix.services.evaluation import entrywise_errors, success_columnwise
from demix.utils.parallel import run_parallel

logger = logging.getLogger(__name__)

SweepMethod = Literal["drpca", "pinv", "identity"]

PHASE_COLUMNS = ["r", "s", "trials", "successes", "best_lambda", "metric1", "metric2", "seed"]


def trial_seed(base_seed: int, r: int, s: int, trial: int) -> int:
    """Seed of one trial, a pure function of its coordinates."""
    sequence = np.random.SeedSequence([base_seed, r, s, trial])
    return int(sequence.generate_state(1, np.uint64)[0])


def _normalized_gaussian(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    a = rng.standard_normal((rows, cols))
    if cols == 0:
        return a
    return normalize_columns(a, "random factor")


def gen_entrywise_instance(
    n: int, m: int, d: int, r: int, s_e: int, seed: int
) -> Tuple[DemixProblem, Components]:
    """
    Planted entry-wise instance.

    ``L = A B^T`` with column-normalized Gaussian ``A`` (``n x r``) and ``B``
    (``m x r``); ``S`` has ``s_e`` uniformly placed +/-1 entries; ``D`` is
    Gaussian with unit columns. Draw order: A, B, D, support, signs.

    Raises:
        InputError: If the rank or sparsity is impossible
    """
    if min(n, m, d) < 1:
        raise InputError("n, m and d must be positive")
    if not 0 <= r <= min(n, m):
        raise InputError(f"rank {r} must lie in [0, {min(n, m)}]")
    if not 0 <= s_e <= d * m:
        raise InputError(f"sparsity {s_e} must lie in [0, {d * m}]")

    rng = np.random.default_rng(seed)
    a = _normalized_gaussian(rng, n, r)
    b = _normalized_gaussian(rng, m, r)
    dictionary = _normalized_gaussian(rng, n, d)
    support = rng.permutation(d * m)[:s_e]
    signs = rng.integers(0, 2, size=s_e) * 2.0 - 1.0

    low_rank = a @ b.T
    sparse = np.zeros((d, m))
    sparse.flat[support] = signs

    problem = DemixProblem(
        m_obs=low_rank + dictionary @ sparse,
        dictionary=dictionary,
        mode=SparsityMode.ENTRY_WISE,
    )
    return problem, Components(low_rank=low_rank, sparse_coeff=sparse)


def gen_columnwise_instance(
    n: int, m: int, d: int, r: int, s_c: int, seed: int
) -> Tuple[DemixProblem, OracleModel, Components]:
    """
    Planted column-wise instance ``L = [U V^T | 0]``, ``S = [0 | W]``.

    Outliers occupy the last ``s_c`` columns; ``W`` is i.i.d. standard
    normal. Draw order: U, V, D, W.

    Raises:
        InputError: If the rank or sparsity is impossible
    """
    if min(n, m, d) < 1:
        raise InputError("n, m and d must be positive")
    if not 0 <= s_c <= m:
        raise InputError(f"outlier count {s_c} must lie in [0, {m}]")
    inliers = m - s_c
    if not 0 <= r <= min(n, inliers):
        raise InputError(f"rank {r} must lie in [0, {min(n, inliers)}]")

    rng = np.random.default_rng(seed)
    u = _normalized_gaussian(rng, n, r)
    v = _normalized_gaussian(rng, inliers, r)
    dictionary = _normalized_gaussian(rng, n, d)
    w = rng.standard_normal((d, s_c))

    low_rank = np.zeros((n, m))
    low_rank[:, :inliers] = u @ v.T
    sparse = np.zeros((d, m))
    sparse[:, inliers:] = w

    problem = DemixProblem(
        m_obs=low_rank + dictionary @ sparse,
        dictionary=dictionary,
        mode=SparsityMode.COLUMN_WISE,
    )
    truth = Components(low_rank=low_rank, sparse_coeff=sparse)
    oracle = OracleModel(
        column_space_basis=np.linalg.qr(u)[0] if r else np.zeros((n, 0)),
        outlier_columns=tuple(range(inliers, m)),
        m=m,
    )
    return problem, oracle, truth


def generate_instance(mode: SparsityMode, n: int, m: int, d: int, r: int, s: int, seed: int):
    """Planted instance of either mode as ``(problem, oracle or None, truth)``."""
    if SparsityMode(mode) is SparsityMode.ENTRY_WISE:
        problem, truth = gen_entrywise_instance(n, m, d, r, s, seed)
        return problem, None, truth
    return gen_columnwise_instance(n, m, d, r, s, seed)


@dataclass(frozen=True)
class SweepSettings:
    """Instance size, method and success rule shared by every cell of a sweep."""

    mode: SparsityMode
    n: int
    m: int
    d: int
    trials: int = 10
    lambda_count: int = 100
    method: SweepMethod = "drpca"
    base_seed: int = 0
    rel_error_tol: Optional[float] = None
    column_threshold: Optional[float] = None
    required_precision: Optional[float] = None
    max_iters: Optional[int] = None


@dataclass(frozen=True)
class TrialOutcome:
    """Best result of one trial over its lambda grid."""

    success: bool
    best_lambda: float
    metric1: float
    metric2: Optional[float]
    failed: bool = False


def _method_problem(problem: DemixProblem, truth: Components, method: SweepMethod):
    if method == "drpca":
        return problem, truth
    if method == "pinv":
        d_pinv = pseudo_inverse(problem.dictionary)
        return transformed_problem(problem), Components(
            low_rank=d_pinv @ truth.low_rank, sparse_coeff=truth.sparse_coeff
        )
    if problem.mode is SparsityMode.ENTRY_WISE:
        # entry-wise robust PCA on the raw data: S lives in data space
        target = DemixProblem(
            m_obs=problem.m_obs,
            dictionary=np.eye(problem.n),
            mode=SparsityMode.ENTRY_WISE,
        )
        return target, Components(
            low_rank=truth.low_rank,
            sparse_coeff=problem.dictionary @ truth.sparse_coeff,
        )
    return identity_problem(problem), Components(
        low_rank=truth.low_rank, sparse_coeff=problem.dictionary @ truth.sparse_coeff
    )


def run_trial(sweep: SweepSettings, r: int, s: int, seed: int) -> TrialOutcome:
    """
    Generate one instance and scan its lambda grid.

    Entry-wise trials keep the lambda minimizing ``max(err_L, err_S)``;
    column-wise trials keep the lambda with the highest precision. Solver
    failures yield a failed, unsuccessful outcome.
    """
    try:
        problem, oracle, truth = generate_instance(sweep.mode, sweep.n, sweep.m, sweep.d, r, s, seed)
        target, target_truth = _method_problem(problem, truth, sweep.method)

        trivial = not np.any(target.m_obs)
        lambdas = [1.0] if trivial else lambda_grid(target, sweep.lambda_count)

        best: Optional[TrialOutcome] = None
        best_key = math.inf
        for lam in lambdas:
            config = SolverConfig.from_settings(float(lam), max_iters=sweep.max_iters)
            found, _ = solve(target, config)
            if sweep.mode is SparsityMode.ENTRY_WISE:
                err_l, err_s = entrywise_errors(target_truth, found)
                key = max(err_l, err_s)
                tol = sweep.rel_error_tol
                success = key <= (settings.SUCCESS_REL_ERROR if tol is None else tol)
                outcome = TrialOutcome(success, float(lam), err_l, err_s)
            else:
                value, success = success_columnwise(
                    found,
                    oracle,
                    threshold=sweep.column_threshold,
                    required=sweep.required_precision,
                )
                key = -value
                outcome = TrialOutcome(success, float(lam), value, None)
            if key < best_key:
                best, best_key = outcome, key

        if trivial:
            best = replace(best, best_lambda=math.nan)
        return best
    except DemixError as e:
        logger.warning(f"Trial (r={r}, s={s}, seed={seed}) failed: {e.message}")
        metric2 = math.nan if sweep.mode is SparsityMode.ENTRY_WISE else None
        return TrialOutcome(False, math.nan, math.nan, metric2, failed=True)


def _nanmean(values: Sequence[float]) -> float:
    finite = [v for v in values if not math.isnan(v)]
    return float(np.mean(finite)) if finite else math.nan


def aggregate_cell(
    sweep: SweepSettings, r: int, s: int, outcomes: Sequence[TrialOutcome]
) -> PhaseCellResult:
    """Fold the trials of one cell into a :class:`PhaseCellResult`."""
    best_lambdas = [o.best_lambda for o in outcomes]
    metric2 = None
    if sweep.mode is SparsityMode.ENTRY_WISE:
        metric2 = _nanmean([o.metric2 for o in outcomes])
    return PhaseCellResult(
        r=r,
        s=s,
        trials=len(outcomes),
        successes=sum(o.success for o in outcomes),
        best_lambda=_nanmean(best_lambdas),
        metric1=_nanmean([o.metric1 for o in outcomes]),
        metric2=metric2,
        seed=sweep.base_seed,
    )


def phase_sweep(
    cells: Iterable[Tuple[int, int]],
    sweep: SweepSettings,
    jobs: Optional[int] = None,
) -> List[PhaseCellResult]:
    """
    Run the phase-transition experiment over a grid of (rank, sparsity) cells.

    Every (cell, trial) pair is an independent work item seeded by
    :func:`trial_seed`, so the output does not depend on ``jobs``.

    Args:
        cells: (r, s) pairs
        sweep: Shared sweep settings
        jobs: Worker count

    Returns:
        list: One result per cell, in input order
    """
    cells = [(int(r), int(s)) for r, s in cells]
    if not cells:
        raise InputError("phase sweep needs at least one cell")
    if sweep.trials < 1:
        raise InputError("phase sweep needs at least one trial")

    items = [
        (sweep, r, s, trial_seed(sweep.base_seed, r, s, trial))
        for r, s in cells
        for trial in range(sweep.trials)
    ]
    logger.info(
        f"Phase sweep: {len(cells)} cells x {sweep.trials} trials, "
        f"mode={sweep.mode.value}, method={sweep.method}"
    )
    outcomes = run_parallel(run_trial, items, jobs)

    results = []
    for index, (r, s) in enumerate(cells):
        chunk = outcomes[index * sweep.trials : (index + 1) * sweep.trials]
        failed = sum(o.failed for o in chunk)
        if failed:
            logger.warning(f"Cell (r={r}, s={s}): {failed} trial(s) failed")
        results.append(aggregate_cell(sweep, r, s, chunk))
    return results


def phase_results_frame(results: Sequence[PhaseCellResult]) -> pd.DataFrame:
    """Tabular form of sweep results with the CSV column order."""
    return pd.DataFrame([result.model_dump() for result in results], columns=PHASE_COLUMNS)
