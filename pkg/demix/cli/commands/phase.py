"""
The ``phase`` command: phase-transition sweep over a (rank, sparsity) grid.
"""

import itertools
import logging
from pathlib import Path
from typing import Optional

import typer

from demix.cli.common import command_errors, parse_int_list, print_table
from demix.core.exceptions import InputError
from demix.models.schemas import SparsityMode
from demix.services.synthetic import SweepSettings, phase_results_frame, phase_sweep
from demix.utils.file_utils import write_frame

logger = logging.getLogger(__name__)


def phase(
    mode: SparsityMode = typer.Option(SparsityMode.ENTRY_WISE, help="Sparsity model"),
    n: int = typer.Option(..., min=1),
    m: int = typer.Option(..., min=1),
    d: int = typer.Option(..., min=1),
    r_grid: str = typer.Option(..., help="Ranks, e.g. '1,2,5' or '2:20:2'"),
    s_grid: str = typer.Option(..., help="Sparsities, same syntax"),
    trials: int = typer.Option(10, min=1),
    lambdas: int = typer.Option(100, min=1, help="Lambda grid size per trial"),
    method: str = typer.Option("drpca", help="drpca, pinv or identity"),
    seed: int = typer.Option(0, min=0, help="Base seed"),
    jobs: Optional[int] = typer.Option(None, min=1, help="Workers (default DEMIX_THREADS)"),
    max_iters: Optional[int] = typer.Option(None, help="Iteration budget per solve"),
    out: Path = typer.Option(..., help="Output CSV"),
) -> None:
    """Run the phase-transition experiment and write one CSV row per cell."""
    with command_errors():
        if method not in ("drpca", "pinv", "identity"):
            raise InputError(f"unknown method {method!r}, expected drpca, pinv or identity")
        cells = list(
            itertools.product(parse_int_list(r_grid, "--r-grid"), parse_int_list(s_grid, "--s-grid"))
        )
        sweep = SweepSettings(
            mode=mode,
            n=n,
            m=m,
            d=d,
            trials=trials,
            lambda_count=lambdas,
            method=method,
            base_seed=seed,
            max_iters=max_iters,
        )
        results = phase_sweep(cells, sweep, jobs)
        frame = phase_results_frame(results)
        write_frame(out, frame)
        logger.info(f"Wrote {len(frame)} cells to {out}")
        print_table(
            "Phase transition",
            [{"r": c.r, "s": c.s, "success rate": c.success_rate} for c in results],
        )
