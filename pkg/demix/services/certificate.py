"""
Dual certificate verifier for small instances.

Builds the least-norm dual certificate
``Gamma = U V^T + (I - P_U) X (I - P_V)`` by materializing
``A = (I - P_V) kron D^T (I - P_U)`` explicitly, then reports how well the
optimality conditions hold.
"""

import logging
from typing import Optional

import numpy as np
import scipy.linalg

from demix.core.config import settings
from demix.core.exceptions import DegenerateGeometryError, InputError
from demix.models.domain import column_support
from demix.models.schemas import CertificateReport, SparsityMode
from demix.numerics.linalg import as_matrix, column_norms, spectral_norm
from demix.services.diagnostics import (
    frame_bounds,
    incoherence_mu,
    low_rank_factors,
    support_mask,
    tangent_projector,
)

logger = logging.getLogger(__name__)

SINGULAR_TOL = 1e-12


def _vec(x: np.ndarray) -> np.ndarray:
    return x.ravel(order="F")


def _unvec(x: np.ndarray, rows: int, cols: int) -> np.ndarray:
    return x.reshape(rows, cols, order="F")


class CertificateVerifier:
    """
    Constructs and checks dual certificates.

    Args:
        max_size: Largest admissible ``n m`` and ``d m``
            (default ``settings.CERTIFICATE_MAX_SIZE``)
    """

    def __init__(self, max_size: Optional[int] = None):
        self.max_size = settings.CERTIFICATE_MAX_SIZE if max_size is None else max_size
        self.logger = logger

    def verify(
        self,
        l: np.ndarray,
        s: np.ndarray,
        d: np.ndarray,
        mode: SparsityMode | str,
        lam: float,
        seed: int = 0,
    ) -> CertificateReport:
        """
        Build the certificate for ``(L, S)`` and evaluate its conditions.

        Args:
            l: ``n x m`` low-rank component
            s: ``d x m`` coefficients defining the support and signs
            d: ``n x d`` dictionary
            mode: Sparsity mode
            lam: Regularization weight
            seed: Seed for the frame-bound estimate of fat dictionaries

        Returns:
            CertificateReport: Residuals, condition values and the
            smallest singular value of the support block

        Raises:
            InputError: If the instance exceeds the size limit
            DegenerateGeometryError: If the support system is singular
        """
        mode = SparsityMode(mode)
        l = as_matrix(l, "low-rank component")
        s = as_matrix(s, "coefficient matrix")
        dictionary = as_matrix(d, "dictionary")
        n, m = l.shape
        atoms = dictionary.shape[1]
        if dictionary.shape[0] != n or s.shape != (atoms, m):
            raise InputError("dimension mismatch between L, S and the dictionary")
        if lam <= 0:
            raise InputError(f"lambda must be positive, got {lam}")
        if n * m > self.max_size or atoms * m > self.max_size:
            raise InputError(
                f"certificate needs n*m and d*m at most {self.max_size}, "
                f"got {n * m} and {atoms * m}"
            )

        u, v = low_rank_factors(l)
        complement_u = np.eye(n) - u @ u.T
        complement_v = np.eye(m) - v @ v.T
        uv = u @ v.T
        project = tangent_projector(u, v)

        if mode is SparsityMode.ENTRY_WISE:
            mask = s != 0
            target = lam * np.sign(s)
        else:
            outliers = column_support(s, 0.0)
            mask = support_mask(outliers, mode, atoms, m)
            norms = column_norms(s)
            target = np.zeros_like(s)
            target[:, outliers] = s[:, outliers] / norms[outliers]
            target *= lam

        support = np.flatnonzero(_vec(mask))
        operator = np.kron(complement_v, dictionary.T @ complement_u)
        a_s = operator[support]
        b = _vec(target - np.where(mask, dictionary.T @ uv, 0.0))[support]

        if support.size:
            sigma = scipy.linalg.svdvals(a_s, check_finite=False)
            sigma_min = float(sigma[-1]) if sigma.size == support.size else 0.0
            if sigma_min <= SINGULAR_TOL * max(1.0, float(sigma[0])):
                raise DegenerateGeometryError(
                    "degenerate support geometry: A_S A_S^T is singular",
                    detail=f"sigma_min(A_S) = {sigma_min:.3e}",
                )
            try:
                weights = scipy.linalg.solve(a_s @ a_s.T, b, assume_a="pos")
            except np.linalg.LinAlgError as e:
                raise DegenerateGeometryError(
                    "degenerate support geometry: A_S A_S^T is singular", detail=str(e)
                ) from e
            x = _unvec(a_s.T @ weights, n, m)
        else:
            sigma_min = 0.0
            x = np.zeros((n, m))

        gamma = uv + complement_u @ x @ complement_v
        dual = dictionary.T @ gamma

        c1 = float(np.linalg.norm(project(gamma) - uv))
        c2 = float(np.linalg.norm(np.where(mask, dual - target, 0.0)))
        c3 = spectral_norm(complement_u @ gamma @ complement_v)
        if mode is SparsityMode.ENTRY_WISE:
            off = np.where(mask, 0.0, dual)
            c4 = float(np.max(np.abs(off))) if off.size else 0.0
        else:
            inliers = ~mask.any(axis=0)
            c4 = float(np.max(column_norms(dual[:, inliers]))) if inliers.any() else 0.0

        bounds = frame_bounds(dictionary, seed=seed)
        mu = incoherence_mu(u, v, dictionary, mask, method="exact")
        sigma_bound = float(np.sqrt(bounds.lower) * (1.0 - mu))

        self.logger.info(
            f"Certificate ({mode.value}, lam={lam:.4e}): C1={c1:.2e}, C2={c2:.2e}, "
            f"C3={c3:.4f}, C4={c4:.4f}, sigma_min={sigma_min:.4f} "
            f"(bound {sigma_bound:.4f})"
        )

        return CertificateReport(
            mode=mode,
            lam=lam,
            support_size=int(support.size),
            c1_residual=c1,
            c2_residual=c2,
            c3_value=c3,
            c4_value=c4,
            sigma_min=sigma_min,
            sigma_min_bound=sigma_bound,
        )


def verify_dual_certificate(
    l: np.ndarray,
    s: np.ndarray,
    d: np.ndarray,
    mode: SparsityMode | str,
    lam: float,
    seed: int = 0,
) -> CertificateReport:
    """Build and check the dual certificate (see :class:`CertificateVerifier`)."""
    return CertificateVerifier().verify(l, s, d, mode, lam, seed)
