"""
The ``demix`` command: solve one demixing problem from files.
"""

import logging
from pathlib import Path
from typing import Optional

import pandas as pd
import typer

from demix.cli.common import command_errors, write_summary
from demix.core.config import settings
from demix.core.exceptions import InputError
from demix.models.domain import Components, DemixProblem, SolveTrace
from demix.models.schemas import SolverConfig, SparsityMode
from demix.services.apg_solver import lambda_grid, solve, solve_grid
from demix.utils.file_utils import ensure_directory, read_matrix, write_frame, write_matrix

logger = logging.getLogger(__name__)


def _run_summary(problem: DemixProblem, components: Components) -> dict:
    if problem.mode is SparsityMode.ENTRY_WISE:
        support = components.entry_support_size()
    else:
        support = components.column_support_size(settings.COLUMN_THRESHOLD)
    return {
        "mode": problem.mode.value,
        "n": problem.n,
        "m": problem.m,
        "d": problem.d,
        "lambda": components.lam,
        "objective": components.objective,
        "residual": components.final_residual,
        "iterations": components.iterations,
        "converged": components.converged,
        "rank": components.rank(),
        "support_size": support,
    }


def _write_run(out: Path, problem: DemixProblem, components: Components, trace: SolveTrace) -> dict:
    ensure_directory(out)
    write_matrix(out / "L.dmx", components.low_rank)
    write_matrix(out / "S.dmx", components.sparse_coeff)
    write_frame(out / "trace.csv", trace.to_frame())
    return _run_summary(problem, components)


def demix(
    data: Path = typer.Option(..., help="Data matrix M (DMX1 or CSV)"),
    dictionary: Path = typer.Option(..., "--dict", help="Dictionary D (DMX1 or CSV)"),
    mode: SparsityMode = typer.Option(SparsityMode.ENTRY_WISE, help="Sparsity model"),
    lam: Optional[float] = typer.Option(None, "--lambda", help="Sparsity weight"),
    grid: Optional[int] = typer.Option(None, "--lambda-grid", min=1, help="Solve on an N-point grid"),
    out: Path = typer.Option(..., help="Output directory"),
    max_iters: Optional[int] = typer.Option(None, help="Iteration budget"),
    tol: Optional[float] = typer.Option(None, help="Convergence tolerance"),
    decay: Optional[float] = typer.Option(None, help="Continuation decay factor"),
    nu_floor: Optional[float] = typer.Option(None, help="Continuation floor"),
    momentum: bool = typer.Option(True, "--momentum/--no-momentum", help="Nesterov momentum"),
    continuation: bool = typer.Option(
        True, "--continuation/--no-continuation", help="Decay nu toward its floor"
    ),
    jobs: Optional[int] = typer.Option(None, min=1, help="Workers for --lambda-grid"),
) -> None:
    """
    Decompose M into L + D S.

    Writes L.dmx, S.dmx, trace.csv and summary.json. With --lambda-grid one
    sub-directory per lambda is written plus grid.csv.
    """
    with command_errors() as run_id:
        if (lam is None) == (grid is None):
            raise InputError("pass exactly one of --lambda and --lambda-grid")

        problem = DemixProblem.create(read_matrix(data), read_matrix(dictionary), mode)
        overrides = dict(
            max_iters=max_iters,
            convergence_tol=tol,
            continuation_decay=decay,
            nu_floor=nu_floor,
            momentum=momentum,
            continuation=continuation,
        )

        if lam is not None:
            config = SolverConfig.from_settings(lam, **overrides)
            components, trace = solve(problem, config)
            summary = _write_run(out, problem, components, trace)
            if not components.converged:
                logger.warning("Solver stopped before convergence; reporting the best iterate")
            write_summary(out, summary, run_id)
            return

        lambdas = lambda_grid(problem, grid)
        base = SolverConfig.from_settings(float(lambdas[0]), **overrides)
        rows = []
        for index, (components, trace) in enumerate(solve_grid(problem, lambdas, base, jobs)):
            run_dir = out / f"lambda_{index:03d}"
            summary = _write_run(run_dir, problem, components, trace)
            write_summary(run_dir, summary, run_id)
            rows.append({"index": index, **summary})
        write_frame(out / "grid.csv", pd.DataFrame(rows))
        write_summary(out, {"mode": problem.mode.value, "lambda_count": len(rows)}, run_id)
