"""
The ``diagnose`` command: incoherence parameters, recovery bounds and the
optional dual certificate of a known decomposition.
"""

import logging
from pathlib import Path
from typing import Optional

import typer

from demix.cli.common import command_errors
from demix.core.exceptions import InputError
from demix.models.domain import normalize_columns
from demix.models.schemas import SparsityMode
from demix.services.certificate import verify_dual_certificate
from demix.services.diagnostics import (
    incoherence_report,
    recovery_bounds,
    support_from_coefficients,
)
from demix.utils.file_utils import read_matrix, write_json
from demix.utils.responses import create_summary

logger = logging.getLogger(__name__)


def _certificate_lambda(bounds, lam: Optional[float]) -> float:
    if lam is not None:
        return lam
    if not bounds.feasible:
        raise InputError(
            "the recovery interval is empty; pass --lambda to test the certificate anyway",
            detail="; ".join(bounds.reasons),
        )
    return 0.5 * (bounds.lambda_min + bounds.lambda_max)


def diagnose(
    dictionary: Path = typer.Option(..., "--dict", help="Dictionary D"),
    coeff: Path = typer.Option(..., help="Coefficients S; its nonzero pattern is the support"),
    low_rank: Optional[Path] = typer.Option(None, help="Low-rank component L"),
    data: Optional[Path] = typer.Option(None, help="Data M; L is taken as M - D S"),
    mode: SparsityMode = typer.Option(SparsityMode.ENTRY_WISE, help="Sparsity model"),
    k: Optional[int] = typer.Option(None, min=1, help="Per-column sparsity for fat dictionaries"),
    support_tol: float = typer.Option(0.0, min=0.0, help="Entries/columns above this are support"),
    mu_method: str = typer.Option("auto", help="auto, exact or power"),
    certificate: bool = typer.Option(False, "--certificate", help="Also verify the dual certificate"),
    lam: Optional[float] = typer.Option(None, "--lambda", help="Certificate lambda"),
    seed: int = typer.Option(0, min=0),
    out: Path = typer.Option(..., help="Output directory"),
) -> None:
    """Write report.json with incoherence, bounds and (optionally) certificate checks."""
    with command_errors() as run_id:
        if (low_rank is None) == (data is None):
            raise InputError("pass exactly one of --low-rank and --data")
        if mu_method not in ("auto", "exact", "power"):
            raise InputError(f"unknown mu method {mu_method!r}")

        d = normalize_columns(read_matrix(dictionary))
        s = read_matrix(coeff)
        if s.shape[0] != d.shape[1]:
            raise InputError(f"S has {s.shape[0]} rows, D has {d.shape[1]} columns")
        if low_rank is not None:
            l = read_matrix(low_rank)
        else:
            m_obs = read_matrix(data)
            if m_obs.shape != (d.shape[0], s.shape[1]):
                raise InputError(f"M has shape {m_obs.shape}, expected {(d.shape[0], s.shape[1])}")
            l = m_obs - d @ s

        support = support_from_coefficients(s, mode, support_tol)
        report = incoherence_report(l, d, support, mode, k=k, seed=seed, mu_method=mu_method)
        bounds = recovery_bounds(report, k=k)
        logger.info(
            f"mu={report.mu:.4f}, lambda in [{bounds.lambda_min:.4g}, {bounds.lambda_max:.4g}], "
            f"feasible={bounds.feasible}"
        )

        document = {
            "incoherence": report.model_dump(mode="json"),
            "bounds": bounds.model_dump(mode="json"),
            "feasible": bounds.feasible,
        }
        if certificate:
            cert = verify_dual_certificate(
                l, s, d, mode, _certificate_lambda(bounds, lam), seed=seed
            )
            document["certificate"] = {
                **cert.model_dump(mode="json"),
                "conditions_hold": cert.conditions_hold,
            }

        write_json(out / "report.json", create_summary(document, run_id))
