"""
Dictionary learning.

Learns a unit-column dictionary from class voxels by alternating FISTA sparse
coding with a ridge least-squares dictionary update, minimizing
``||Y - D A||_F^2 + rho ||A||_1``.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from demix.core.exceptions import InputError
from demix.numerics.linalg import as_matrix, column_norms, spectral_norm
from demix.numerics.prox import soft_threshold_entries

logger = logging.getLogger(__name__)

RIDGE = 1e-10


@dataclass
class DictionaryLearningResult:
    """Learned dictionary, its codes and the objective after every outer iteration."""

    dictionary: np.ndarray
    coefficients: np.ndarray
    objective: List[float] = field(default_factory=list)
    reinitialized_atoms: int = 0


def learning_objective(
    y: np.ndarray, dictionary: np.ndarray, coefficients: np.ndarray, rho: float
) -> float:
    """``||Y - D A||_F^2 + rho ||A||_1``."""
    residual = y - dictionary @ coefficients
    return float(np.sum(residual * residual) + rho * np.abs(coefficients).sum())


def fista(
    y: np.ndarray,
    dictionary: np.ndarray,
    rho: float,
    num_iters: int = 100,
    initial: Optional[np.ndarray] = None,
) -> np.ndarray:
    """
    Fast iterative shrinkage-thresholding for the sparse codes.

    Solves ``min_A ||Y - D A||_F^2 + rho ||A||_1`` (equivalently half of it)
    with step ``1/sigma_max(D)^2`` and threshold ``rho / (2 sigma_max(D)^2)``.
    """
    lipschitz = spectral_norm(dictionary) ** 2
    codes = np.zeros((dictionary.shape[1], y.shape[1])) if initial is None else initial.copy()
    if lipschitz == 0:
        return codes
    step = 1.0 / lipschitz
    tau = rho * step / 2.0

    probe = codes.copy()
    t = 1.0
    for _ in range(num_iters):
        previous = codes
        residual = dictionary @ probe - y
        codes = soft_threshold_entries(probe - step * (dictionary.T @ residual), tau)

        t_prev = t
        t = (1.0 + math.sqrt(1.0 + 4.0 * t**2)) / 2.0
        probe = codes + ((t_prev - 1.0) / t) * (codes - previous)
    return codes


def _replace_dead_atoms(
    y: np.ndarray, dictionary: np.ndarray, coefficients: np.ndarray
) -> int:
    dead = np.flatnonzero(np.abs(coefficients).sum(axis=1) == 0)
    if dead.size == 0:
        return 0
    residual_norms = column_norms(y - dictionary @ coefficients)
    candidates = [i for i in np.argsort(-residual_norms) if residual_norms[i] > 0]
    for atom, voxel in zip(dead, candidates):
        dictionary[:, atom] = y[:, voxel] / np.linalg.norm(y[:, voxel])
    replaced = min(dead.size, len(candidates))
    if replaced:
        logger.warning(f"Reinitialized {replaced} unused dictionary atom(s)")
    return replaced


def learn_dictionary(
    y: np.ndarray,
    d: int,
    rho: float,
    outer_iters: int = 50,
    seed: int = 0,
    inner_iters: int = 100,
) -> DictionaryLearningResult:
    """
    Learn a ``n x d`` dictionary with unit columns from voxels ``y``.

    Each half-step (sparse coding, dictionary update) is kept only if it does
    not increase the objective, so the recorded objective is nonincreasing.

    Args:
        y: ``n x N`` matrix of training voxels
        d: Number of atoms
        rho: l1 weight
        outer_iters: Alternations
        seed: Seed of the initial voxel sample
        inner_iters: FISTA iterations per sparse-coding step

    Returns:
        DictionaryLearningResult: Dictionary, codes and objective history

    Raises:
        InputError: If ``d`` exceeds the usable voxel count or ``rho <= 0``
    """
    y = as_matrix(y, "training voxels")
    if rho <= 0:
        raise InputError(f"rho must be positive, got {rho}")
    usable = np.flatnonzero(column_norms(y) > 0)
    if not 1 <= d <= usable.size:
        raise InputError(f"atom count {d} must lie in [1, {usable.size}]")

    rng = np.random.default_rng(seed)
    picks = rng.choice(usable, size=d, replace=False)
    dictionary = y[:, picks] / column_norms(y[:, picks])
    coefficients = np.zeros((d, y.shape[1]))

    current = learning_objective(y, dictionary, coefficients, rho)
    result = DictionaryLearningResult(dictionary, coefficients, [current])

    for iteration in range(outer_iters):
        codes = fista(y, dictionary, rho, inner_iters, initial=coefficients)
        value = learning_objective(y, dictionary, codes, rho)
        if value <= current:
            coefficients, current = codes, value

        gram = coefficients @ coefficients.T
        update = np.linalg.solve(gram + RIDGE * np.eye(d), coefficients @ y.T).T
        norms = column_norms(update)
        alive = norms > 0
        candidate = dictionary.copy()
        candidate[:, alive] = update[:, alive] / norms[alive]
        scaled = coefficients.copy()
        scaled[alive] *= norms[alive, None]
        result.reinitialized_atoms += _replace_dead_atoms(y, candidate, scaled)

        value = learning_objective(y, candidate, scaled, rho)
        if value <= current:
            dictionary, coefficients, current = candidate, scaled, value

        result.objective.append(current)
        logger.debug(f"Dictionary learning iteration {iteration + 1}: objective {current:.6e}")

    result.dictionary = dictionary
    result.coefficients = coefficients
    logger.info(
        f"Learned {d} atoms from {y.shape[1]} voxels, final objective {current:.6e}"
    )
    return result
