"""
Proximal operators.

Shrinkage maps of the nuclear norm, the entry-wise l1 norm and the sum of
column l2 norms, plus the gradient Lipschitz constant of the demixing
objective's smooth term.
"""

import numpy as np

from demix.core.exceptions import InputError
from demix.numerics.linalg import column_norms, spectral_norm, svd


def _check_tau(tau: float) -> None:
    if tau < 0:
        raise InputError(f"Threshold must be nonnegative, got {tau}")


def soft_threshold_entries(y: np.ndarray, tau: float) -> np.ndarray:
    """Entry-wise shrinkage ``sign(y) * max(|y| - tau, 0)``."""
    _check_tau(tau)
    return np.sign(y) * np.maximum(np.abs(y) - tau, 0.0)


def singular_value_threshold(y: np.ndarray, tau: float) -> np.ndarray:
    """
    Prox of ``tau * ||.||_*``.

    Shrinks every singular value of ``y`` by ``tau`` and drops the ones that
    reach zero.
    """
    _check_tau(tau)
    factors = svd(y)
    shrunk = factors.sigma - tau
    keep = shrunk > 0
    if not np.any(keep):
        return np.zeros_like(y, dtype=np.float64)
    return (factors.u[:, keep] * shrunk[keep]) @ factors.v[:, keep].T


def column_soft_threshold(y: np.ndarray, tau: float) -> np.ndarray:
    """
    Prox of ``tau * ||.||_{1,2}``.

    Scales column ``j`` by ``max(1 - tau / ||y_j||, 0)``. Zero columns stay zero.
    """
    _check_tau(tau)
    norms = column_norms(y)
    scale = np.zeros_like(norms)
    nonzero = norms > 0
    scale[nonzero] = np.maximum(1.0 - tau / norms[nonzero], 0.0)
    return y * scale


def lipschitz_constant(dictionary: np.ndarray) -> float:
    """
    Largest eigenvalue of ``[I D]^T [I D]``.

    Equals ``1 + sigma_max(D)^2`` because the nonzero spectrum of the Gram
    matrix matches that of ``I + D D^T``.
    """
    return 1.0 + spectral_norm(dictionary) ** 2
