"""
Dense linear algebra kernel.

Compact SVD, the matrix norms used throughout the toolkit, the Moore-Penrose
pseudo-inverse and a power-iteration operator norm for linear maps that are
only available as callables.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

import numpy as np
import scipy.linalg

from demix.core.config import settings
from demix.core.exceptions import InputError, NumericalError

logger = logging.getLogger(__name__)

# Singular values at or below this fraction of sigma_max count as zero.
RANK_TOL = 1e-12

LinearMap = Callable[[np.ndarray], np.ndarray]


class MatrixNorm(str, Enum):
    """Matrix norms understood by :func:`matrix_norm`."""

    NUCLEAR = "nuclear"
    FROBENIUS = "frobenius"
    SPECTRAL = "spectral"
    L1_ENTRYWISE = "l1_entrywise"
    L12_COLUMNS = "l12_columns"
    LINF_ENTRYWISE = "linf_entrywise"
    LINF2_MAX_COLUMN = "linf2_max_column"
    LINFINF_MAX_ROW_L1 = "linfinf_max_row_l1"


@dataclass(frozen=True)
class SvdFactors:
    """Compact SVD ``a = u @ diag(sigma) @ v.T`` with orthonormal ``u`` and ``v``."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.sigma.size)

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.sigma) @ self.v.T


@dataclass(frozen=True)
class OperatorNorm:
    """Result of a power-iteration operator norm estimate."""

    value: float
    iterations: int
    converged: bool
    restarted: bool = False


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """
    Coerce input to a finite two-dimensional float64 array.

    Args:
        a: Array-like input
        name: Name used in error messages

    Returns:
        np.ndarray: The validated matrix

    Raises:
        InputError: If the input is not two-dimensional or holds NaN/Inf
    """
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise InputError(f"{name} must be two-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InputError(f"{name} contains non-finite entries")
    return arr


def svd(a, rank_cutoff: Optional[float] = None) -> SvdFactors:
    """
    Compact singular value decomposition.

    Uses LAPACK divide-and-conquer (``gesdd``) and falls back to ``gesvd``
    when it fails to converge.

    Args:
        a: Matrix to decompose
        rank_cutoff: Relative cutoff; singular values at or below
            ``rank_cutoff * sigma_max`` are dropped (default ``RANK_TOL``)

    Returns:
        SvdFactors: Factors of the numerical rank

    Raises:
        NumericalError: If neither LAPACK driver converges
    """
    arr = as_matrix(a)
    n, m = arr.shape
    cutoff = RANK_TOL if rank_cutoff is None else rank_cutoff

    if arr.size == 0:
        return SvdFactors(np.zeros((n, 0)), np.zeros(0), np.zeros((m, 0)))

    try:
        u, sigma, vt = scipy.linalg.svd(
            arr, full_matrices=False, lapack_driver="gesdd", check_finite=False
        )
    except np.linalg.LinAlgError:
        logger.warning(f"gesdd did not converge on a {n}x{m} matrix, retrying gesvd")
        try:
            u, sigma, vt = scipy.linalg.svd(
                arr, full_matrices=False, lapack_driver="gesvd", check_finite=False
            )
        except np.linalg.LinAlgError as e:
            raise NumericalError(
                f"SVD failed to converge on a {n}x{m} matrix", detail=str(e)
            ) from e

    if sigma[0] <= 0.0:
        keep = 0
    else:
        keep = int(np.count_nonzero(sigma > cutoff * sigma[0]))

    return SvdFactors(u[:, :keep], sigma[:keep], vt[:keep].T)


def orthonormal_basis(a, rank_cutoff: Optional[float] = None) -> np.ndarray:
    """Orthonormal basis of the column space of ``a``."""
    return svd(a, rank_cutoff).u


def column_norms(a: np.ndarray) -> np.ndarray:
    """Euclidean norm of every column."""
    return np.linalg.norm(a, axis=0)


def matrix_norm(a, kind: MatrixNorm | str) -> float:
    """
    Evaluate a named matrix norm.

    Args:
        a: Matrix
        kind: One of the :class:`MatrixNorm` members (or its value)

    Returns:
        float: The norm, 0.0 for empty matrices
    """
    arr = as_matrix(a)
    kind = MatrixNorm(kind)
    if arr.size == 0:
        return 0.0

    if kind is MatrixNorm.NUCLEAR:
        return float(np.sum(scipy.linalg.svdvals(arr, check_finite=False)))
    if kind is MatrixNorm.FROBENIUS:
        return float(np.linalg.norm(arr))
    if kind is MatrixNorm.SPECTRAL:
        return float(scipy.linalg.svdvals(arr, check_finite=False)[0])
    if kind is MatrixNorm.L1_ENTRYWISE:
        return float(np.abs(arr).sum())
    if kind is MatrixNorm.L12_COLUMNS:
        return float(column_norms(arr).sum())
    if kind is MatrixNorm.LINF_ENTRYWISE:
        return float(np.abs(arr).max())
    if kind is MatrixNorm.LINF2_MAX_COLUMN:
        return float(column_norms(arr).max())
    return float(np.abs(arr).sum(axis=1).max())


def spectral_norm(a) -> float:
    """Largest singular value."""
    return matrix_norm(a, MatrixNorm.SPECTRAL)


def pseudo_inverse(a) -> np.ndarray:
    """
    Moore-Penrose pseudo-inverse.

    Singular values at or below ``RANK_TOL * sigma_max`` are truncated.
    """
    arr = as_matrix(a)
    if arr.size == 0:
        return np.zeros(arr.shape[::-1])
    return scipy.linalg.pinv(arr, atol=0.0, rtol=RANK_TOL, check_finite=False)


def materialize_operator(apply: LinearMap, in_dims: int, out_dims: int) -> np.ndarray:
    """
    Build the explicit ``out_dims x in_dims`` matrix of a linear map.

    Args:
        apply: Linear map on vectors of length ``in_dims``
        in_dims: Input dimension
        out_dims: Output dimension

    Returns:
        np.ndarray: Matrix whose column ``i`` is ``apply(e_i)``
    """
    matrix = np.zeros((out_dims, in_dims))
    basis_vector = np.zeros(in_dims)
    for i in range(in_dims):
        basis_vector[i] = 1.0
        matrix[:, i] = apply(basis_vector)
        basis_vector[i] = 0.0
    return matrix


def operator_norm(
    apply: LinearMap,
    in_dims: int,
    out_dims: int,
    adjoint: Optional[LinearMap] = None,
    iters: Optional[int] = None,
    tol: Optional[float] = None,
    seed: int = 0,
    exact_below: int = 0,
) -> OperatorNorm:
    """
    Largest singular value of a linear map given as a callable.

    Runs power iteration on ``adjoint(apply(x))`` from a seeded start vector
    and restarts once with a fresh seed if the iterate collapses to zero.
    Without an adjoint, or when ``in_dims * out_dims <= exact_below``, the
    operator is materialized and its spectral norm taken directly.

    Args:
        apply: Linear map from length-``in_dims`` to length-``out_dims`` vectors
        in_dims: Input dimension
        out_dims: Output dimension
        adjoint: Adjoint of ``apply``
        iters: Iteration budget (default ``settings.POWER_ITERATIONS``)
        tol: Relative change tolerance (default ``settings.POWER_TOL``)
        seed: Seed of the start vector
        exact_below: Materialize whenever ``in_dims * out_dims`` is at most this

    Returns:
        OperatorNorm: Estimate, iteration count and convergence status
    """
    iters = settings.POWER_ITERATIONS if iters is None else iters
    tol = settings.POWER_TOL if tol is None else tol
    if iters < 1:
        raise InputError(f"iters must be at least 1, got {iters}")

    if in_dims == 0 or out_dims == 0:
        return OperatorNorm(value=0.0, iterations=0, converged=True)

    if adjoint is None or in_dims * out_dims <= exact_below:
        matrix = materialize_operator(apply, in_dims, out_dims)
        return OperatorNorm(value=spectral_norm(matrix), iterations=0, converged=True)

    restarted = False
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(in_dims)
    x /= np.linalg.norm(x)
    estimate = 0.0

    for iteration in range(1, iters + 1):
        y = apply(x)
        value = float(np.linalg.norm(y))
        z = adjoint(y)
        z_norm = float(np.linalg.norm(z))

        if z_norm == 0.0:
            if restarted:
                return OperatorNorm(
                    value=0.0, iterations=iteration, converged=True, restarted=True
                )
            logger.debug("Power iteration stagnated, restarting with a fresh seed")
            restarted = True
            rng = np.random.default_rng(seed + 1)
            x = rng.standard_normal(in_dims)
            x /= np.linalg.norm(x)
            continue

        if not np.isfinite(z_norm):
            raise NumericalError("Power iteration produced non-finite values")

        x = z / z_norm
        if abs(value - estimate) <= tol * value:
            return OperatorNorm(
                value=value, iterations=iteration, converged=True, restarted=restarted
            )
        estimate = value

    logger.warning(
        f"Power iteration did not converge in {iters} iterations, "
        f"last estimate {estimate:.6e}"
    )
    return OperatorNorm(
        value=estimate, iterations=iters, converged=False, restarted=restarted
    )
