"""
Accelerated proximal gradient solver.

Solves the entry-wise objective
``nu ||L||_* + nu lam ||S||_1 + 1/2 ||M - L - D S||_F^2`` and its column-wise
counterpart (``||S||_{1,2}`` in place of ``||S||_1``) with Nesterov momentum
and geometric continuation of ``nu`` down to a floor.
"""

import logging
import math
from typing import Iterable, List, Optional, Tuple

import numpy as np

from demix.core.exceptions import InputError, NumericalError
from demix.models.domain import Components, DemixProblem, SolveTrace
from demix.models.schemas import SolverConfig, SparsityMode
from demix.numerics.linalg import MatrixNorm, matrix_norm, spectral_norm
from demix.numerics.prox import (
    column_soft_threshold,
    lipschitz_constant,
    singular_value_threshold,
    soft_threshold_entries,
)
from demix.utils.parallel import run_parallel

logger = logging.getLogger(__name__)


def sparse_norm_kind(mode: SparsityMode) -> MatrixNorm:
    """Norm penalizing S in the given mode."""
    if mode is SparsityMode.ENTRY_WISE:
        return MatrixNorm.L1_ENTRYWISE
    return MatrixNorm.L12_COLUMNS


def objective_value(
    problem: DemixProblem, components: Components, lam: float, nu: float
) -> float:
    """
    Evaluate the demixing objective at ``components``.

    Args:
        problem: Demixing problem
        components: Point ``(L, S)``
        lam: Sparsity weight
        nu: Penalty weight

    Returns:
        float: ``nu ||L||_* + nu lam ||S|| + 1/2 ||M - L - D S||_F^2``
    """
    if not components.consistent_with(problem):
        raise InputError("components do not match the problem dimensions")
    residual = components.residual(problem)
    return (
        nu * matrix_norm(components.low_rank, MatrixNorm.NUCLEAR)
        + nu * lam * matrix_norm(components.sparse_coeff, sparse_norm_kind(problem.mode))
        + 0.5 * float(np.sum(residual * residual))
    )


def lambda_upper_bound(problem: DemixProblem) -> float:
    """Largest useful lambda: ``||D^T M||_inf / ||M||`` or its column analogue."""
    m_spec = spectral_norm(problem.m_obs)
    if m_spec == 0.0:
        raise InputError("degenerate problem: observed matrix is zero")
    correlation = problem.dictionary.T @ problem.m_obs
    if problem.mode is SparsityMode.ENTRY_WISE:
        top = matrix_norm(correlation, MatrixNorm.LINF_ENTRYWISE)
    else:
        top = matrix_norm(correlation, MatrixNorm.LINF2_MAX_COLUMN)
    return top / m_spec


def lambda_grid(problem: DemixProblem, count: int) -> np.ndarray:
    """
    Linearly spaced lambda values in ``(0, upper]``.

    Args:
        problem: Demixing problem
        count: Number of grid points

    Returns:
        np.ndarray: ``count`` values ending exactly at the upper bound

    Raises:
        InputError: If ``count < 1`` or the observed matrix is zero
    """
    if count < 1:
        raise InputError(f"lambda count must be at least 1, got {count}")
    upper = lambda_upper_bound(problem)
    return np.linspace(upper / count, upper, count)


class APGSolver:
    """
    Accelerated proximal gradient solver with continuation.

    The momentum point is ``X + (t_prev - 1)/t (X - X_prev)``; the gradient
    step uses ``1/L_f`` with ``L_f = 1 + sigma_max(D)^2``; ``L`` is updated by
    singular value thresholding at ``nu/L_f`` and ``S`` by entry or column
    shrinkage at ``nu lam/L_f``.
    """

    def __init__(self, config: SolverConfig):
        self.config = config
        self.logger = logger

    def _shrink(self, mode: SparsityMode):
        if mode is SparsityMode.ENTRY_WISE:
            return soft_threshold_entries
        return column_soft_threshold

    def solve(
        self, problem: DemixProblem, initial: Optional[Components] = None
    ) -> Tuple[Components, SolveTrace]:
        """
        Run the solver on one problem.

        Args:
            problem: Demixing problem
            initial: Optional starting iterate (default zeros)

        Returns:
            Tuple[Components, SolveTrace]: Final (or best) iterate and trace

        Raises:
            NumericalError: If the iterates become non-finite
        """
        config = self.config
        m_obs, dictionary = problem.m_obs, problem.dictionary
        lam = config.lam
        trace = SolveTrace()

        m_fro = float(np.linalg.norm(m_obs))
        if m_fro == 0.0:
            self.logger.debug("Observed matrix is zero, returning the zero solution")
            trace.append(0.0, 0.0, config.nu_floor, 1.0)
            return (
                Components(
                    low_rank=np.zeros_like(m_obs),
                    sparse_coeff=np.zeros((problem.d, problem.m)),
                    iterations=1,
                    lam=lam,
                ),
                trace,
            )

        lf = lipschitz_constant(dictionary)
        scale = max(1.0, m_fro)
        shrink = self._shrink(problem.mode)

        if config.nu_initial is not None:
            nu = config.nu_initial
        elif config.continuation:
            nu = spectral_norm(m_obs)
        else:
            nu = config.nu_floor
        if config.continuation:
            nu = max(nu, config.nu_floor)

        if initial is not None:
            if not initial.consistent_with(problem):
                raise InputError("initial iterate does not match the problem dimensions")
            low_rank = initial.low_rank.astype(np.float64, copy=True)
            sparse = initial.sparse_coeff.astype(np.float64, copy=True)
        else:
            low_rank = np.zeros_like(m_obs)
            sparse = np.zeros((problem.d, problem.m))
        low_rank_prev, sparse_prev = low_rank, sparse
        t_prev = t = 1.0

        best: Optional[Tuple[np.ndarray, np.ndarray, float, float, int]] = None
        converged = False
        iteration = 0

        for iteration in range(1, config.max_iters + 1):
            coef = (t_prev - 1.0) / t if config.momentum else 0.0
            probe_l = low_rank + coef * (low_rank - low_rank_prev)
            probe_s = sparse + coef * (sparse - sparse_prev)

            gap = m_obs - probe_l - dictionary @ probe_s
            grad_l = probe_l + gap / lf
            grad_s = probe_s + dictionary.T @ gap / lf

            new_l = singular_value_threshold(grad_l, nu / lf)
            new_s = shrink(grad_s, nu * lam / lf)
            if not (np.all(np.isfinite(new_l)) and np.all(np.isfinite(new_s))):
                raise NumericalError(f"non-finite iterate at iteration {iteration}")

            change = max(
                float(np.linalg.norm(new_l - low_rank)),
                float(np.linalg.norm(new_s - sparse)),
            ) / scale

            low_rank_prev, low_rank = low_rank, new_l
            sparse_prev, sparse = sparse, new_s
            if config.momentum:
                t_prev, t = t, (1.0 + math.sqrt(4.0 * t * t + 1.0)) / 2.0

            point = Components(low_rank=low_rank, sparse_coeff=sparse)
            residual = float(np.linalg.norm(point.residual(problem)))
            objective = objective_value(problem, point, lam, nu)
            trace.append(objective, residual, nu, t)

            at_floor = not config.continuation or nu <= config.nu_floor
            if at_floor and (best is None or objective <= best[2]):
                best = (low_rank, sparse, objective, residual, iteration)

            if at_floor and change < config.convergence_tol:
                converged = True
                break

            if config.continuation:
                nu = max(config.continuation_decay * nu, config.nu_floor)

        if converged:
            final_l, final_s = low_rank, sparse
        elif best is None:
            final_l, final_s = low_rank, sparse
            self.logger.warning(
                f"APG stopped after {config.max_iters} iterations before continuation "
                f"reached nu_floor={config.nu_floor:.1e} (nu={nu:.3e}, lam={lam:.4e}); "
                f"returning the last iterate"
            )
        else:
            final_l, final_s, objective, residual, best_iteration = best
            self.logger.warning(
                f"APG did not converge in {config.max_iters} iterations "
                f"(lam={lam:.4e}, {problem.shape_label}); "
                f"returning best iterate from iteration {best_iteration}"
            )

        self.logger.debug(
            f"APG finished: iterations={iteration}, converged={converged}, "
            f"objective={objective:.6e}, residual={residual:.3e}"
        )

        return (
            Components(
                low_rank=final_l,
                sparse_coeff=final_s,
                iterations=iteration,
                final_residual=residual,
                objective=objective,
                converged=converged,
                lam=lam,
            ),
            trace,
        )


def solve(
    problem: DemixProblem,
    config: SolverConfig,
    initial: Optional[Components] = None,
) -> Tuple[Components, SolveTrace]:
    """Solve one demixing problem (see :class:`APGSolver`)."""
    return APGSolver(config).solve(problem, initial)


def _solve_one(problem: DemixProblem, config: SolverConfig):
    return solve(problem, config)


def solve_grid(
    problem: DemixProblem,
    lambdas: Iterable[float],
    base_config: SolverConfig,
    jobs: Optional[int] = None,
) -> List[Tuple[Components, SolveTrace]]:
    """
    Solve once per lambda, each run restarted from zero.

    Args:
        problem: Demixing problem
        lambdas: Lambda values
        base_config: Configuration whose ``lam`` is replaced per run
        jobs: Worker count

    Returns:
        list: ``(components, trace)`` per lambda, in input order
    """
    configs = [base_config.model_copy(update={"lam": float(lam)}) for lam in lambdas]
    logger.info(f"Solving {len(configs)} lambda values ({problem.shape_label})")
    return run_parallel(_solve_one, [(problem, config) for config in configs], jobs)
