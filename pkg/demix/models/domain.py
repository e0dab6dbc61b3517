"""
Array-carrying domain types.

Problems, recovered components, oracle-model ground truth, solver traces,
hyperspectral cubes and ROC curves, plus the support and oracle-match
operations shared by the solver, the diagnostics and the harnesses.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from demix.core.config import settings
from demix.core.exceptions import InputError
from demix.models.schemas import SparsityMode
from demix.numerics.linalg import as_matrix, column_norms, svd

logger = logging.getLogger(__name__)

UNIT_NORM_TOL = 1e-8


def normalize_columns(a: np.ndarray, name: str = "dictionary") -> np.ndarray:
    """
    Scale every column to unit Euclidean norm.

    Raises:
        InputError: If a column is zero
    """
    norms = column_norms(a)
    zero = np.flatnonzero(norms == 0)
    if zero.size:
        raise InputError(f"zero dictionary column in {name}: index {int(zero[0])}")
    return a / norms


@dataclass(frozen=True)
class DemixProblem:
    """Observed matrix ``M = L + D S``, the dictionary ``D`` and the sparsity mode."""

    m_obs: np.ndarray
    dictionary: np.ndarray
    mode: SparsityMode

    def __post_init__(self):
        m_obs = as_matrix(self.m_obs, "observed matrix")
        dictionary = as_matrix(self.dictionary, "dictionary")
        if m_obs.shape[0] != dictionary.shape[0]:
            raise InputError(
                f"dimension mismatch: data has {m_obs.shape[0]} rows, "
                f"dictionary has {dictionary.shape[0]}"
            )
        if dictionary.shape[1] == 0:
            raise InputError("dictionary has no columns")
        norms = column_norms(dictionary)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            raise InputError("dictionary columns must have unit norm")
        object.__setattr__(self, "m_obs", m_obs)
        object.__setattr__(self, "dictionary", dictionary)
        object.__setattr__(self, "mode", SparsityMode(self.mode))

    @classmethod
    def create(cls, m_obs, dictionary, mode: SparsityMode | str) -> "DemixProblem":
        """Build a problem, normalizing the dictionary columns first."""
        dictionary = normalize_columns(as_matrix(dictionary, "dictionary"))
        return cls(m_obs=m_obs, dictionary=dictionary, mode=SparsityMode(mode))

    @property
    def n(self) -> int:
        return self.m_obs.shape[0]

    @property
    def m(self) -> int:
        return self.m_obs.shape[1]

    @property
    def d(self) -> int:
        return self.dictionary.shape[1]

    @property
    def shape_label(self) -> str:
        return f"n={self.n}, m={self.m}, d={self.d}"


@dataclass
class Components:
    """Recovered (or planted) pair ``(L, S)`` with solver telemetry."""

    low_rank: np.ndarray
    sparse_coeff: np.ndarray
    iterations: int = 0
    final_residual: float = 0.0
    objective: float = 0.0
    converged: bool = True
    lam: Optional[float] = None

    def __post_init__(self):
        if self.final_residual < 0:
            raise InputError("final_residual must be nonnegative")
        if self.low_rank.shape[1] != self.sparse_coeff.shape[1]:
            raise InputError("L and S must have the same number of columns")

    def rank(self, rank_cutoff: Optional[float] = None) -> int:
        """Numerical rank of the low-rank component."""
        return svd(self.low_rank, rank_cutoff).rank

    def entry_support_size(self) -> int:
        """Number of nonzero entries of S (s_e)."""
        return int(np.count_nonzero(self.sparse_coeff))

    def column_support_size(self, threshold: float = 0.0) -> int:
        """Number of columns of S with norm above ``threshold`` (s_c)."""
        return int(column_support(self.sparse_coeff, threshold).size)

    def consistent_with(self, problem: DemixProblem) -> bool:
        return (
            self.low_rank.shape == problem.m_obs.shape
            and self.sparse_coeff.shape == (problem.d, problem.m)
        )

    def residual(self, problem: DemixProblem) -> np.ndarray:
        return problem.m_obs - self.low_rank - problem.dictionary @ self.sparse_coeff


@dataclass(frozen=True)
class OracleModel:
    """Column space of ``L`` and outlier column indices of ``S``."""

    column_space_basis: np.ndarray
    outlier_columns: Tuple[int, ...]
    m: int

    def __post_init__(self):
        basis = np.asarray(self.column_space_basis, dtype=np.float64)
        if basis.ndim != 2:
            raise InputError("column space basis must be two-dimensional")
        gram = basis.T @ basis
        if not np.allclose(gram, np.eye(basis.shape[1]), atol=1e-10, rtol=0.0):
            raise InputError("column space basis must have orthonormal columns")
        indices = tuple(int(i) for i in self.outlier_columns)
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise InputError("outlier columns must be strictly increasing")
        if indices and (indices[0] < 0 or indices[-1] >= self.m):
            raise InputError(f"outlier columns must lie in [0, {self.m})")
        object.__setattr__(self, "column_space_basis", basis)
        object.__setattr__(self, "outlier_columns", indices)

    @classmethod
    def from_components(
        cls, truth: Components, col_tol: float = 0.0
    ) -> "OracleModel":
        """Oracle model of a planted pair."""
        return cls(
            column_space_basis=svd(truth.low_rank).u,
            outlier_columns=tuple(column_support(truth.sparse_coeff, col_tol)),
            m=truth.low_rank.shape[1],
        )

    @property
    def rank(self) -> int:
        return self.column_space_basis.shape[1]

    def inlier_columns(self) -> np.ndarray:
        mask = np.ones(self.m, dtype=bool)
        mask[list(self.outlier_columns)] = False
        return np.flatnonzero(mask)


@dataclass
class OracleMatchReport:
    """Outcome of comparing recovered components with an oracle model."""

    matched: bool
    subspace_ok: bool
    support_ok: bool
    max_angle: float = 0.0
    missing: List[int] = field(default_factory=list)
    spurious: List[int] = field(default_factory=list)
    degenerate: bool = False
    message: str = ""


def column_support(s: np.ndarray, threshold: float = 0.0) -> np.ndarray:
    """
    Indices of the columns of ``s`` whose Euclidean norm exceeds ``threshold``.

    Args:
        s: Coefficient matrix
        threshold: Nonnegative column-norm threshold

    Returns:
        np.ndarray: Sorted column indices
    """
    if threshold < 0:
        raise InputError(f"threshold must be nonnegative, got {threshold}")
    return np.flatnonzero(column_norms(s) > threshold)


def oracle_match(
    found: Components,
    truth: OracleModel,
    col_tol: Optional[float] = None,
    space_tol: Optional[float] = None,
    rank_cutoff: float = 1e-6,
) -> OracleMatchReport:
    """
    Check whether recovered components belong to an oracle model.

    The recovered column space is taken from the inlier columns of ``L`` and
    compared to the truth through principal angles; the recovered column
    support of ``S`` must equal the truth's outlier set.

    Args:
        found: Recovered components
        truth: Oracle model of the planted instance
        col_tol: Column-norm threshold (default ``settings.COLUMN_THRESHOLD``)
        space_tol: Largest admissible principal angle in radians
            (default ``settings.SUBSPACE_TOL``)
        rank_cutoff: Relative singular value cutoff for the recovered rank

    Returns:
        OracleMatchReport: Verdict with the offending indices and angle
    """
    col_tol = settings.COLUMN_THRESHOLD if col_tol is None else col_tol
    space_tol = settings.SUBSPACE_TOL if space_tol is None else space_tol
    if found.low_rank.shape[1] != truth.m:
        raise InputError("recovered components and oracle model differ in m")

    predicted = set(column_support(found.sparse_coeff, col_tol).tolist())
    expected = set(truth.outlier_columns)
    missing = sorted(expected - predicted)
    spurious = sorted(predicted - expected)
    support_ok = not missing and not spurious

    inliers = truth.inlier_columns()
    found_basis = svd(found.low_rank[:, inliers], rank_cutoff).u
    degenerate = found_basis.shape[1] == 0
    max_angle = 0.0

    if degenerate or truth.rank == 0:
        subspace_ok = found_basis.shape[1] == truth.rank
    elif found_basis.shape[1] != truth.rank:
        subspace_ok = False
        max_angle = float(np.pi / 2)
    else:
        angles = scipy.linalg.subspace_angles(found_basis, truth.column_space_basis)
        max_angle = float(np.max(angles))
        subspace_ok = max_angle < space_tol

    parts = []
    if degenerate:
        parts.append("degenerate: recovered low-rank part is zero")
    if not subspace_ok and not degenerate:
        parts.append(
            f"column space mismatch (rank {found_basis.shape[1]} vs {truth.rank}, "
            f"max angle {max_angle:.3e})"
        )
    if missing:
        parts.append(f"missing outlier columns {missing}")
    if spurious:
        parts.append(f"spurious outlier columns {spurious}")

    return OracleMatchReport(
        matched=subspace_ok and support_ok,
        subspace_ok=subspace_ok,
        support_ok=support_ok,
        max_angle=max_angle,
        missing=missing,
        spurious=spurious,
        degenerate=degenerate,
        message="; ".join(parts) if parts else "match",
    )


@dataclass
class SolveTrace:
    """Per-iteration record of the solver state."""

    objective: List[float] = field(default_factory=list)
    residual: List[float] = field(default_factory=list)
    nu: List[float] = field(default_factory=list)
    t: List[float] = field(default_factory=list)

    def append(self, objective: float, residual: float, nu: float, t: float) -> None:
        self.objective.append(objective)
        self.residual.append(residual)
        self.nu.append(nu)
        self.t.append(t)

    def __len__(self) -> int:
        return len(self.objective)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "iteration": np.arange(1, len(self) + 1),
                "objective": self.objective,
                "residual": self.residual,
                "nu": self.nu,
                "t": self.t,
            }
        )


@dataclass(frozen=True)
class HyperCube:
    """
    Hyperspectral image stored band-major.

    ``voxels`` has shape ``(bands, height, width)``; ``labels`` is an optional
    ``(height, width)`` class map of nonnegative integers.
    """

    voxels: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        voxels = np.asarray(self.voxels, dtype=np.float64)
        if voxels.ndim != 3 or min(voxels.shape) < 1:
            raise InputError(f"cube must have shape (bands, height, width), got {voxels.shape}")
        if not np.all(np.isfinite(voxels)):
            raise InputError("cube contains non-finite values")
        object.__setattr__(self, "voxels", voxels)
        if self.labels is not None:
            labels = np.asarray(self.labels)
            if labels.shape != voxels.shape[1:]:
                raise InputError(
                    f"label map shape {labels.shape} does not match cube {voxels.shape[1:]}"
                )
            if not np.issubdtype(labels.dtype, np.integer):
                if not np.all(labels == np.round(labels)):
                    raise InputError("labels must be integers")
                labels = labels.astype(np.int64)
            if np.any(labels < 0):
                raise InputError("labels must be nonnegative")
            object.__setattr__(self, "labels", labels)

    @property
    def bands(self) -> int:
        return self.voxels.shape[0]

    @property
    def height(self) -> int:
        return self.voxels.shape[1]

    @property
    def width(self) -> int:
        return self.voxels.shape[2]

    @property
    def pixels(self) -> int:
        return self.height * self.width


@dataclass(frozen=True)
class RocCurve:
    """ROC curve over a descending threshold grid."""

    thresholds: np.ndarray
    tpr: np.ndarray
    fpr: np.ndarray
    auc: float
    flipped: bool = False

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {"threshold": self.thresholds, "tpr": self.tpr, "fpr": self.fpr}
        )
