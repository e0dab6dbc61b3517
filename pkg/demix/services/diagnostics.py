"""
Incoherence diagnostics and recovery bounds.

Computes the incoherence parameters (mu, gamma_U, gamma_V, beta_U, xi_e,
xi_c), the generalized frame bounds of the dictionary, and the lambda
interval and sparsity/rank ceilings under which exact recovery is guaranteed.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Literal, Optional, Tuple

import numpy as np
import scipy.linalg

from demix.core.config import settings
from demix.core.exceptions import InputError
from demix.models.domain import column_support
from demix.models.schemas import RANGE_TOL, IncoherenceReport, RecoveryBounds, SparsityMode
from demix.numerics.linalg import (
    as_matrix,
    column_norms,
    materialize_operator,
    operator_norm,
    orthonormal_basis,
    spectral_norm,
    svd,
)

logger = logging.getLogger(__name__)

MuMethod = Literal["auto", "exact", "power"]


@dataclass(frozen=True)
class FrameBounds:
    """Generalized frame bounds ``alpha_l ||v||^2 <= ||Dv||^2 <= alpha_u ||v||^2``."""

    lower: float
    upper: float
    estimated: bool
    k: Optional[int] = None


def low_rank_factors(l: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Left and right singular vectors ``(U, V)`` of the numerical rank."""
    factors = svd(l)
    return factors.u, factors.v


def tangent_projector(u: np.ndarray, v: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """
    Projection onto the tangent space ``{U A^T + B V^T}`` of the low-rank part.

    ``P_L(X) = P_U X + X P_V - P_U X P_V``.
    """

    def project(x: np.ndarray) -> np.ndarray:
        utx = u.T @ x
        xv = x @ v
        return u @ utx + xv @ v.T - u @ (utx @ v) @ v.T

    return project


def support_mask(support, mode: SparsityMode, d: int, m: int) -> np.ndarray:
    """
    Boolean ``d x m`` mask of the coefficient support.

    Args:
        support: Boolean ``d x m`` mask or ``(row, col)`` index pairs for
            entry-wise sparsity; column indices for column-wise sparsity
        mode: Sparsity mode
        d: Dictionary size
        m: Number of columns

    Returns:
        np.ndarray: The mask (full columns in column-wise mode)
    """
    mode = SparsityMode(mode)
    if mode is SparsityMode.COLUMN_WISE:
        columns = np.asarray(support, dtype=np.int64).ravel()
        if columns.size and (columns.min() < 0 or columns.max() >= m):
            raise InputError(f"column support must lie in [0, {m})")
        mask = np.zeros((d, m), dtype=bool)
        mask[:, columns] = True
        return mask

    support = np.asarray(support)
    if support.dtype == bool:
        if support.shape != (d, m):
            raise InputError(f"entry support mask must have shape {(d, m)}")
        return support.copy()
    pairs = support.reshape(-1, 2).astype(np.int64)
    if pairs.size and (
        pairs[:, 0].min() < 0
        or pairs[:, 0].max() >= d
        or pairs[:, 1].min() < 0
        or pairs[:, 1].max() >= m
    ):
        raise InputError("entry support indices out of range")
    mask = np.zeros((d, m), dtype=bool)
    mask[pairs[:, 0], pairs[:, 1]] = True
    return mask


def default_sparsity_k(n: int, d: int) -> int:
    """Per-column sparsity ``k ~ d / log(n)`` used for fat dictionaries."""
    if n <= 1:
        return d
    return int(min(d, max(1, math.floor(d / math.log(n)))))


def frame_bounds(
    dictionary: np.ndarray,
    k: Optional[int] = None,
    samples: Optional[int] = None,
    seed: int = 0,
) -> FrameBounds:
    """
    Generalized frame bounds of a dictionary.

    Thin dictionaries (``d <= n``) get the exact bounds ``sigma_min^2`` and
    ``sigma_max^2``. For fat dictionaries the extremes of ``||Dv||^2`` over
    ``k``-sparse unit vectors are estimated from seeded random draws.

    Args:
        dictionary: ``n x d`` dictionary
        k: Sparsity of the probe vectors (fat case)
        samples: Number of probes (default ``settings.MONTE_CARLO_SAMPLES``)
        seed: Probe seed

    Returns:
        FrameBounds: Bounds and whether they are estimates
    """
    dictionary = as_matrix(dictionary, "dictionary")
    n, d = dictionary.shape
    if d <= n:
        sigma = scipy.linalg.svdvals(dictionary, check_finite=False)
        return FrameBounds(
            lower=float(sigma[-1] ** 2), upper=float(sigma[0] ** 2), estimated=False
        )

    k = default_sparsity_k(n, d) if k is None else k
    if not 1 <= k <= d:
        raise InputError(f"sparsity k must lie in [1, {d}], got {k}")
    samples = settings.MONTE_CARLO_SAMPLES if samples is None else samples

    rng = np.random.default_rng(seed)
    lower, upper = math.inf, 0.0
    for _ in range(samples):
        idx = rng.choice(d, size=k, replace=False)
        values = rng.standard_normal(k)
        values /= np.linalg.norm(values)
        energy = float(np.sum((dictionary[:, idx] @ values) ** 2))
        lower = min(lower, energy)
        upper = max(upper, energy)

    logger.debug(
        f"Monte Carlo frame bounds over {samples} {k}-sparse vectors: "
        f"[{lower:.4f}, {upper:.4f}]"
    )
    return FrameBounds(lower=lower, upper=upper, estimated=True, k=k)


def incoherence_mu(
    u: np.ndarray,
    v: np.ndarray,
    dictionary: np.ndarray,
    mask: np.ndarray,
    method: MuMethod = "auto",
    seed: int = 0,
) -> float:
    """
    Largest fraction of a dictionary-sparse matrix captured by ``P_L``.

    ``mu = max ||P_L(D H)||_F / ||D H||_F`` over ``H`` supported on ``mask``.
    Writing ``D H`` column by column in an orthonormal basis ``Q_j`` of the
    atoms active in column ``j`` turns this into the operator norm of
    ``c -> P_L(sum_j Q_j c_j e_j^T)``.

    Args:
        u: Left singular vectors of L
        v: Right singular vectors of L
        dictionary: ``n x d`` dictionary
        mask: Boolean ``d x m`` support mask
        method: ``exact`` materializes the operator, ``power`` runs power
            iteration, ``auto`` materializes when ``d m`` is at most
            ``settings.CERTIFICATE_MAX_SIZE``
        seed: Power-iteration seed

    Returns:
        float: mu in [0, 1]; values within ``RANGE_TOL`` of 1 are reported as 1
    """
    n, d = dictionary.shape
    m = mask.shape[1]
    if u.shape[1] == 0:
        return 0.0

    columns, bases, offsets = [], [], [0]
    for j in range(m):
        rows = np.flatnonzero(mask[:, j])
        if rows.size == 0:
            continue
        basis = orthonormal_basis(dictionary[:, rows])
        if basis.shape[1] == 0:
            continue
        columns.append(j)
        bases.append(basis)
        offsets.append(offsets[-1] + basis.shape[1])

    in_dims = offsets[-1]
    if in_dims == 0:
        return 0.0

    project = tangent_projector(u, v)

    def apply(c: np.ndarray) -> np.ndarray:
        z = np.zeros((n, m))
        for j, basis, start, stop in zip(columns, bases, offsets, offsets[1:]):
            z[:, j] = basis @ c[start:stop]
        return project(z).ravel()

    def adjoint(y: np.ndarray) -> np.ndarray:
        projected = project(y.reshape(n, m))
        c = np.empty(in_dims)
        for j, basis, start, stop in zip(columns, bases, offsets, offsets[1:]):
            c[start:stop] = basis.T @ projected[:, j]
        return c

    if method == "auto":
        method = "exact" if d * m <= settings.CERTIFICATE_MAX_SIZE else "power"

    if method == "exact":
        value = spectral_norm(materialize_operator(apply, in_dims, n * m))
    else:
        result = operator_norm(apply, in_dims, n * m, adjoint=adjoint, seed=seed)
        value = result.value

    if value >= 1.0 - RANGE_TOL:
        return 1.0
    return float(max(value, 0.0))


def incoherence_report(
    l: np.ndarray,
    d: np.ndarray,
    support,
    mode: SparsityMode | str,
    k: Optional[int] = None,
    seed: int = 0,
    mu_method: MuMethod = "auto",
) -> IncoherenceReport:
    """
    Compute every incoherence parameter of an instance.

    Args:
        l: ``n x m`` low-rank component
        d: ``n x d`` dictionary
        support: Coefficient support (see :func:`support_mask`)
        mode: Sparsity mode
        k: Per-column sparsity for fat frame bounds
        seed: Seed of the Monte Carlo and power-iteration draws
        mu_method: How mu is computed (see :func:`incoherence_mu`)

    Returns:
        IncoherenceReport: The parameters

    Raises:
        InputError: On dimension mismatch or a zero dictionary column
    """
    mode = SparsityMode(mode)
    l = as_matrix(l, "low-rank component")
    dictionary = as_matrix(d, "dictionary")
    n, m = l.shape
    if dictionary.shape[0] != n:
        raise InputError(
            f"dimension mismatch: L has {n} rows, dictionary has {dictionary.shape[0]}"
        )
    atoms = dictionary.shape[1]
    atom_norms = column_norms(dictionary)
    if np.any(atom_norms == 0):
        raise InputError(
            f"zero dictionary column: index {int(np.flatnonzero(atom_norms == 0)[0])}"
        )

    mask = support_mask(support, mode, atoms, m)
    u, v = low_rank_factors(l)
    r = u.shape[1]

    if r:
        gamma_u = float(np.max(column_norms(u.T @ dictionary) ** 2 / atom_norms**2))
        gamma_v = float(np.max(np.sum(v * v, axis=1)))
        correlation = dictionary.T @ (u @ v.T)
        xi_e = float(np.max(np.abs(correlation)))
        xi_c = float(np.max(column_norms(correlation)))
    else:
        gamma_u = gamma_v = xi_e = xi_c = 0.0

    range_basis = orthonormal_basis(dictionary)
    complement = range_basis - u @ (u.T @ range_basis)
    beta_u = spectral_norm(complement) ** 2

    bounds = frame_bounds(dictionary, k=k, seed=seed)
    mu = incoherence_mu(u, v, dictionary, mask, method=mu_method, seed=seed)

    if mode is SparsityMode.ENTRY_WISE:
        sparsity = int(mask.sum())
    else:
        sparsity = int(np.count_nonzero(mask.any(axis=0)))

    logger.info(
        f"Incoherence: mu={mu:.4f}, gamma_u={gamma_u:.4f}, gamma_v={gamma_v:.4f}, "
        f"beta_u={beta_u:.4f}, r={r}, sparsity={sparsity}"
    )

    return IncoherenceReport(
        mu=mu,
        gamma_u=min(gamma_u, 1.0),
        gamma_v=min(gamma_v, 1.0),
        beta_u=min(beta_u, 1.0),
        xi_e=xi_e,
        xi_c=xi_c,
        alpha_lower=bounds.lower,
        alpha_upper=bounds.upper,
        alpha_estimated=bounds.estimated,
        sparsity_k=bounds.k,
        rank_r=r,
        sparsity=sparsity,
        n=n,
        m=m,
        d=atoms,
        mode=mode,
    )


def support_from_coefficients(
    s: np.ndarray, mode: SparsityMode, threshold: float = 0.0
):
    """Support of a coefficient matrix in the form :func:`support_mask` expects."""
    if SparsityMode(mode) is SparsityMode.ENTRY_WISE:
        return np.abs(s) > threshold
    return column_support(s, threshold)


def _ratio(numerator: float, denominator: float) -> float:
    if denominator == 0:
        return math.inf if numerator > 0 else 0.0
    return numerator / denominator


def gamma_u_bound(
    report: IncoherenceReport, s: int, s_max: float, k: Optional[int] = None
) -> Optional[float]:
    """
    Ceiling on gamma_U that keeps the entry-wise lower lambda nonnegative.

    Returns ``None`` when ``s`` exceeds ``s_max`` (no ceiling applies).
    """
    slack = (1.0 - report.mu) ** 2 - 2.0 * s * report.gamma_v
    if report.is_fat:
        return _ratio(slack, 2.0 * (k + s * report.gamma_v))
    if s <= min(report.d, s_max):
        return _ratio(slack, 2.0 * s * (1.0 + report.gamma_v))
    if report.d < s <= s_max:
        return _ratio(slack, 2.0 * (report.d + s * report.gamma_v))
    return None


def _entrywise_bounds(report: IncoherenceReport, s: int, r: int, k: Optional[int]):
    mu, gamma_u, gamma_v = report.mu, report.gamma_u, report.gamma_v
    a_lo, a_up = report.alpha_lower, report.alpha_upper
    reasons = []

    if report.is_fat:
        k = k if k is not None else report.sparsity_k
        if k is None:
            raise InputError("fat dictionaries need the per-column sparsity k")
        base = float(k)
    else:
        base = float(min(s, report.d))

    spread = base + s * gamma_v
    c_const = (
        a_up * ((1.0 + 2.0 * gamma_u) * spread + 2.0 * gamma_v * min(s, report.m)) / 2.0
        - a_lo * spread / 2.0
    )
    denominator = a_lo * (1.0 - mu) ** 2 - c_const
    big_c = c_const / denominator if denominator > 0 else math.inf
    c_valid = 0.0 <= big_c < 1.0
    if not c_valid:
        reasons.append(f"C_e={big_c:.4g} outside [0, 1)")
        lambda_min = math.inf
        amplification = math.inf
    else:
        amplification = (1.0 + big_c) / (1.0 - big_c)
        lambda_min = amplification * report.xi_e

    lambda_max = _ratio(math.sqrt(a_lo) * (1.0 - mu) - math.sqrt(r * a_up) * mu, math.sqrt(s))
    s_max = _ratio((1.0 - mu) ** 2 * report.m, 2.0 * r)

    if mu == 0:
        rank_bound = math.inf
    elif not c_valid or a_up == 0:
        rank_bound = 0.0
    else:
        head = math.sqrt(a_lo / a_up) * (1.0 - mu) / mu
        tail = report.xi_e / (math.sqrt(a_up) * mu) * amplification * math.sqrt(s)
        rank_bound = max(head - tail, 0.0) ** 2

    ceiling = gamma_u_bound(report, s, s_max, k)
    extra = {
        "c_const": c_const,
        "gamma_u_bound": ceiling,
        "gamma_u_ok": None if ceiling is None else bool(gamma_u <= ceiling),
    }
    return lambda_min, lambda_max, big_c, s_max, rank_bound, reasons, extra


def _columnwise_bounds(report: IncoherenceReport, s: int, r: int):
    mu, gamma_v, beta_u = report.mu, report.gamma_v, report.beta_u
    a_lo, a_up = report.alpha_lower, report.alpha_upper
    reasons = []

    big_c = _ratio(_ratio(a_up, a_lo) * gamma_v * beta_u, (1.0 - mu) ** 2)
    denominator = 1.0 - s * big_c
    if denominator <= 0 or not math.isfinite(big_c):
        reasons.append(f"s_c * C_c = {s * big_c:.4g} not below 1")
        lambda_min = math.inf
    else:
        lambda_min = (report.xi_c + math.sqrt(r * s * a_up) * mu * big_c) / denominator

    lambda_max = _ratio(math.sqrt(a_lo) * (1.0 - mu) - math.sqrt(r * a_up) * mu, math.sqrt(s))
    s_max = _ratio(_ratio(a_lo, a_up * gamma_v) * (1.0 - mu) ** 2, beta_u)

    if mu == 0:
        rank_bound = math.inf
    elif a_up == 0:
        rank_bound = 0.0
    else:
        head = math.sqrt(a_lo / a_up) * (1.0 - mu) / mu
        tail = report.xi_c / (math.sqrt(a_up) * mu) * math.sqrt(s)
        rank_bound = max(head - tail, 0.0) ** 2

    return lambda_min, lambda_max, big_c, s_max, rank_bound, reasons, {}


def recovery_bounds(
    report: IncoherenceReport,
    s: Optional[int] = None,
    r: Optional[int] = None,
    k: Optional[int] = None,
) -> RecoveryBounds:
    """
    Lambda interval and sparsity/rank ceilings for exact recovery.

    Infeasible configurations are reported through ``feasible=False`` and a
    list of reasons, never raised.

    Args:
        report: Incoherence parameters (``n``, ``m``, ``d`` are taken from it)
        s: Sparsity ``s_e`` or ``s_c`` (default ``report.sparsity``)
        r: Rank (default ``report.rank_r``)
        k: Per-column sparsity for fat entry-wise dictionaries

    Returns:
        RecoveryBounds: Bounds and feasibility verdict
    """
    s = report.sparsity if s is None else s
    r = report.rank_r if r is None else r
    if s < 0 or r < 0:
        raise InputError("sparsity and rank must be nonnegative")

    if report.mode is SparsityMode.ENTRY_WISE:
        result = _entrywise_bounds(report, s, r, k)
    else:
        result = _columnwise_bounds(report, s, r)
    lambda_min, lambda_max, big_c, s_max, rank_bound, reasons, extra = result

    identifiable = report.mu < 1.0 - RANGE_TOL
    if not identifiable:
        reasons.append("mu = 1: components are not identifiable")
    if lambda_min < 0:
        reasons.append(f"lambda_min={lambda_min:.4g} is negative")
    if math.isfinite(lambda_min) and not lambda_min < lambda_max:
        reasons.append(f"empty interval [{lambda_min:.4g}, {lambda_max:.4g}]")
    if s > s_max:
        reasons.append(f"sparsity {s} exceeds s_max={s_max:.4g}")

    feasible = (
        math.isfinite(lambda_min)
        and 0.0 <= lambda_min < lambda_max
        and s <= s_max
        and identifiable
    )

    return RecoveryBounds(
        mode=report.mode,
        sparsity=s,
        rank_r=r,
        lambda_min=lambda_min,
        lambda_max=lambda_max,
        big_c=big_c,
        s_max=s_max,
        rank_bound=rank_bound,
        feasible=feasible,
        reasons=reasons,
        **extra,
    )
