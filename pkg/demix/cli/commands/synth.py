"""
The ``synth`` command: write a planted instance to disk.
"""

import logging
from pathlib import Path

import typer

from demix.cli.common import command_errors, write_summary
from demix.models.schemas import SparsityMode
from demix.services.synthetic import generate_instance
from demix.utils.file_utils import ensure_directory, write_matrix

logger = logging.getLogger(__name__)


def synth(
    mode: SparsityMode = typer.Option(SparsityMode.ENTRY_WISE, help="Sparsity model"),
    n: int = typer.Option(..., min=1, help="Rows of M"),
    m: int = typer.Option(..., min=1, help="Columns of M"),
    d: int = typer.Option(..., min=1, help="Dictionary atoms"),
    r: int = typer.Option(..., min=0, help="Rank of L"),
    s: int = typer.Option(..., min=0, help="Nonzero entries (entry) or outlier columns (column)"),
    seed: int = typer.Option(0, min=0, help="Generator seed"),
    out: Path = typer.Option(..., help="Output directory"),
) -> None:
    """Generate a planted instance: M.dmx, D.dmx, L.dmx, S.dmx and summary.json."""
    with command_errors() as run_id:
        problem, oracle, truth = generate_instance(mode, n, m, d, r, s, seed)
        ensure_directory(out)
        write_matrix(out / "M.dmx", problem.m_obs)
        write_matrix(out / "D.dmx", problem.dictionary)
        write_matrix(out / "L.dmx", truth.low_rank)
        write_matrix(out / "S.dmx", truth.sparse_coeff)

        summary = {
            "mode": mode.value,
            "n": n,
            "m": m,
            "d": d,
            "r": r,
            "s": s,
            "seed": seed,
        }
        if oracle is not None:
            summary["outlier_columns"] = list(oracle.outlier_columns)
        write_summary(out, summary, run_id)
        logger.info(f"Wrote {mode.value} instance ({problem.shape_label}, r={r}, s={s}) to {out}")
