"""
Pydantic models for configuration and reports.

This module contains the validated, JSON-serializable models exchanged
between the solver, the diagnostics, the harnesses and the CLI.
"""

import math
from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from demix.core.config import settings

RANGE_TOL = 1e-9


class SparsityMode(str, Enum):
    """Sparsity pattern of the coefficient matrix."""

    ENTRY_WISE = "entry"
    COLUMN_WISE = "column"


class DictionarySource(str, Enum):
    """Where a localization dictionary comes from."""

    SAMPLED = "sampled"
    LEARNED = "learned"
    FILE = "file"


class ThresholdMode(str, Enum):
    """How localization picks the column-norm pre-threshold."""

    FIXED = "fixed"
    AUC = "auc"


class SolverConfig(BaseModel):
    """Parameters of the accelerated proximal gradient solver."""

    model_config = ConfigDict(frozen=True)

    lam: float = Field(..., gt=0.0, description="Sparsity weight (lambda_e or lambda_c)")
    continuation_decay: float = Field(
        default=0.95, gt=0.0, lt=1.0, description="Continuation decay factor v"
    )
    nu_floor: float = Field(default=1e-4, gt=0.0, description="Continuation floor")
    max_iters: int = Field(default=2000, ge=1, description="Iteration budget")
    convergence_tol: float = Field(
        default=1e-6, gt=0.0, description="Relative iterate-change tolerance"
    )
    momentum: bool = Field(default=True, description="Use Nesterov momentum")
    continuation: bool = Field(
        default=True, description="Decay nu from its initial value to the floor"
    )
    nu_initial: Optional[float] = Field(
        default=None, gt=0.0, description="Initial nu (default: spectral norm of M)"
    )

    @classmethod
    def from_settings(cls, lam: float, **overrides) -> "SolverConfig":
        """Build a configuration from the global settings."""
        values = {
            "lam": lam,
            "continuation_decay": settings.CONTINUATION_DECAY,
            "nu_floor": settings.NU_FLOOR,
            "max_iters": settings.MAX_ITERS,
            "convergence_tol": settings.CONVERGENCE_TOL,
        }
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


class IncoherenceReport(BaseModel):
    """Incoherence parameters of a (low-rank, dictionary, support) triple."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    mu: float = Field(..., description="Incoherence between L and dictionary-sparse matrices")
    gamma_u: float = Field(..., description="Max alignment of an atom with col(L)")
    gamma_v: float = Field(..., description="Max squared row norm of V")
    beta_u: float = Field(..., description="Alignment of range(D) with col(L) complement")
    xi_e: float = Field(..., ge=0.0, description="Max absolute entry of D^T U V^T")
    xi_c: float = Field(..., ge=0.0, description="Max column norm of D^T U V^T")
    alpha_lower: float = Field(..., ge=0.0, description="Lower generalized frame bound")
    alpha_upper: float = Field(..., ge=0.0, description="Upper generalized frame bound")
    alpha_estimated: bool = Field(
        default=False, description="Frame bounds are Monte Carlo estimates"
    )
    sparsity_k: Optional[int] = Field(
        default=None, description="Per-column sparsity used for fat frame bounds"
    )
    rank_r: int = Field(..., ge=0, description="Rank of the low-rank component")
    sparsity: int = Field(..., ge=0, description="s_e (entries) or s_c (columns)")
    n: int = Field(..., ge=1)
    m: int = Field(..., ge=1)
    d: int = Field(..., ge=1)
    mode: SparsityMode

    @model_validator(mode="after")
    def validate_ranges(self) -> "IncoherenceReport":
        """Check the documented parameter ranges."""
        errors = []
        for name in ("mu", "gamma_u", "beta_u"):
            value = getattr(self, name)
            if not -RANGE_TOL <= value <= 1 + RANGE_TOL:
                errors.append(f"{name}={value} outside [0, 1]")
        if not self.rank_r / self.m - RANGE_TOL <= self.gamma_v <= 1 + RANGE_TOL:
            errors.append(f"gamma_v={self.gamma_v} outside [r/m, 1]")
        if self.alpha_lower > self.alpha_upper:
            errors.append("alpha_lower exceeds alpha_upper")
        if errors:
            raise ValueError("; ".join(errors))
        return self

    @property
    def is_fat(self) -> bool:
        return self.d > self.n


class RecoveryBounds(BaseModel):
    """Regularization interval and sparsity/rank ceilings of the recovery guarantees."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    mode: SparsityMode
    sparsity: int = Field(..., ge=0)
    rank_r: int = Field(..., ge=0)
    lambda_min: float
    lambda_max: float
    c_const: Optional[float] = Field(
        default=None, description="c_t or c_f (entry-wise only)"
    )
    big_c: float = Field(..., description="C_e or C_c")
    s_max: float = Field(..., description="s_e^max or s_c^max")
    rank_bound: float = Field(..., description="Sufficient rank ceiling")
    gamma_u_bound: Optional[float] = Field(
        default=None, description="Ceiling on gamma_u (entry-wise only)"
    )
    gamma_u_ok: Optional[bool] = None
    feasible: bool
    reasons: List[str] = Field(default_factory=list)

    @model_validator(mode="after")
    def validate_feasibility(self) -> "RecoveryBounds":
        if self.feasible and not self.lambda_min < self.lambda_max:
            raise ValueError("feasible bounds need lambda_min < lambda_max")
        return self


class CertificateReport(BaseModel):
    """Numerical check of the dual certificate conditions."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    mode: SparsityMode
    lam: float = Field(..., gt=0.0)
    support_size: int = Field(..., ge=0, description="Rows of A_S")
    c1_residual: float = Field(..., description="||P_L(Gamma) - U V^T||_F")
    c2_residual: float = Field(..., description="Residual on the support")
    c3_value: float = Field(..., description="||P_Lperp(Gamma)||_2")
    c4_value: float = Field(..., description="Off-support dual norm of D^T Gamma")
    sigma_min: float = Field(..., description="Smallest singular value of A_S")
    sigma_min_bound: float = Field(..., description="sqrt(alpha_l) (1 - mu)")
    residual_tol: float = Field(default=1e-8)

    @property
    def conditions_hold(self) -> bool:
        return (
            self.c1_residual < self.residual_tol
            and self.c2_residual < self.residual_tol
            and self.c3_value < 1.0
            and self.c4_value < self.lam
        )


class PhaseCellResult(BaseModel):
    """Aggregated trials of one (rank, sparsity) cell of a phase sweep."""

    r: int = Field(..., ge=0)
    s: int = Field(..., ge=0)
    trials: int = Field(..., ge=1)
    successes: int = Field(..., ge=0)
    best_lambda: float = Field(..., description="Lambda of the best trial, NaN if none")
    metric1: float = Field(..., description="Mean rel. error of L, or mean precision")
    metric2: Optional[float] = Field(
        default=None, description="Mean rel. error of S (entry-wise only)"
    )
    seed: int = Field(..., ge=0, description="Base seed of the sweep")

    @model_validator(mode="after")
    def validate_counts(self) -> "PhaseCellResult":
        if self.successes > self.trials:
            raise ValueError("successes cannot exceed trials")
        return self

    @property
    def success_rate(self) -> float:
        return self.successes / self.trials


class DictionarySpec(BaseModel):
    """How to build the dictionary of a localization run."""

    source: DictionarySource
    class_id: Optional[int] = Field(default=None, ge=0, description="Target class")
    atoms: Optional[int] = Field(default=None, ge=1, description="Dictionary size d")
    rho: Optional[float] = Field(default=None, gt=0.0, description="Sparse coding weight")
    iters: int = Field(default=50, ge=1, description="Outer learning iterations")
    seed: int = Field(default=0, ge=0)
    path: Optional[str] = Field(default=None, description="Dictionary file")

    @model_validator(mode="after")
    def validate_source(self) -> "DictionarySpec":
        if self.source is DictionarySource.FILE:
            if not self.path:
                raise ValueError("file dictionaries need a path")
            return self
        if self.class_id is None or self.atoms is None:
            raise ValueError(f"{self.source.value} dictionaries need class_id and atoms")
        if self.source is DictionarySource.LEARNED and self.rho is None:
            raise ValueError("learned dictionaries need rho")
        return self

    @property
    def is_learned(self) -> bool:
        return self.source is DictionarySource.LEARNED


class OperatingPoint(BaseModel):
    """A single point of a ROC curve."""

    threshold: float
    tpr: float = Field(..., ge=0.0, le=1.0)
    fpr: float = Field(..., ge=0.0, le=1.0)


class MethodResult(BaseModel):
    """Localization performance of one method on one scene."""

    model_config = ConfigDict(ser_json_inf_nan="constants")

    method: str
    lam: Optional[float] = None
    threshold: float
    tpr: float
    fpr: float
    auc: float
    flipped: bool = False

    @field_validator("auc")
    @classmethod
    def validate_auc(cls, v: float) -> float:
        if not math.isnan(v) and not 0.0 <= v <= 1.0:
            raise ValueError(f"AUC must lie in [0, 1], got {v}")
        return v


class MethodSummary(BaseModel):
    """Mean and standard deviation of a method's results over several runs."""

    method: str
    runs: int = Field(..., ge=1)
    tpr_mean: float
    tpr_std: float
    fpr_mean: float
    fpr_std: float
    auc_mean: float
    auc_std: float
