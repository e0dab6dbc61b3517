"""
Comparison methods.

Pseudo-inverse baselines (robust PCA and outlier pursuit on ``D^+ M`` with an
identity dictionary), outlier pursuit on the raw data, and the matched
filter detectors.
"""

import logging
from typing import Tuple

import numpy as np

from demix.core.exceptions import InputError
from demix.models.domain import Components, DemixProblem, SolveTrace
from demix.models.schemas import SolverConfig, SparsityMode
from demix.numerics.linalg import as_matrix, column_norms, pseudo_inverse
from demix.services.apg_solver import solve

logger = logging.getLogger(__name__)


def transformed_problem(problem: DemixProblem) -> DemixProblem:
    """
    Identity-dictionary problem on ``D^+ M``.

    Raises:
        InputError: If the dictionary pseudo-inverse vanishes
    """
    d_pinv = pseudo_inverse(problem.dictionary)
    if not np.any(d_pinv):
        raise InputError("dictionary is zero, pseudo-inverse undefined")
    return DemixProblem(
        m_obs=d_pinv @ problem.m_obs,
        dictionary=np.eye(problem.d),
        mode=problem.mode,
    )


def identity_problem(problem: DemixProblem) -> DemixProblem:
    """Column-wise problem on the raw data with ``D = I_n``."""
    return DemixProblem(
        m_obs=problem.m_obs,
        dictionary=np.eye(problem.n),
        mode=SparsityMode.COLUMN_WISE,
    )


def rpca_pinv(
    problem: DemixProblem, config: SolverConfig
) -> Tuple[Components, SolveTrace]:
    """
    Robust PCA on the pseudo-inverted data.

    The returned low-rank part lives in the transformed (``d``-dimensional)
    space.
    """
    if problem.mode is not SparsityMode.ENTRY_WISE:
        raise InputError("rpca_pinv needs an entry-wise problem")
    return solve(transformed_problem(problem), config)


def op_pinv(
    problem: DemixProblem, config: SolverConfig
) -> Tuple[Components, SolveTrace]:
    """Outlier pursuit on the pseudo-inverted data."""
    if problem.mode is not SparsityMode.COLUMN_WISE:
        raise InputError("op_pinv needs a column-wise problem")
    return solve(transformed_problem(problem), config)


def outlier_pursuit(
    problem: DemixProblem, config: SolverConfig
) -> Tuple[Components, SolveTrace]:
    """Outlier pursuit on the raw data (identity dictionary, column sparsity)."""
    return solve(identity_problem(problem), config)


def _normalized_columns(a: np.ndarray) -> np.ndarray:
    norms = column_norms(a)
    safe = np.where(norms > 0, norms, 1.0)
    return a / safe


def matched_filter(
    m_obs: np.ndarray, dictionary: np.ndarray, pseudo_inverse_first: bool = False
) -> np.ndarray:
    """
    Matched filter scores.

    Plain: largest absolute inner product between each normalized data
    column and the dictionary atoms. With ``pseudo_inverse_first`` the data
    is replaced by ``D^+ M``, column-normalized, and each column is scored by
    its largest absolute entry. Zero columns score 0.

    Args:
        m_obs: ``n x m`` data
        dictionary: ``n x d`` dictionary with unit columns
        pseudo_inverse_first: Score ``D^+ M`` instead of ``D^T M_n``

    Returns:
        np.ndarray: One score per column
    """
    m_obs = as_matrix(m_obs, "observed matrix")
    dictionary = as_matrix(dictionary, "dictionary")
    if m_obs.shape[0] != dictionary.shape[0]:
        raise InputError("dimension mismatch between data and dictionary")

    if pseudo_inverse_first:
        projected = _normalized_columns(pseudo_inverse(dictionary) @ m_obs)
    else:
        projected = dictionary.T @ _normalized_columns(m_obs)

    if projected.shape[0] == 0:
        return np.zeros(m_obs.shape[1])
    return np.max(np.abs(projected), axis=0)
