"""
Shared helpers for the command modules.

Maps toolkit errors to exit codes and writes the standard error document to
stderr, the way a global exception handler would for a web service.
"""

import json
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, List, Optional

import click
import typer
from pydantic import ValidationError
from rich.console import Console
from rich.table import Table

from demix.core.exceptions import DemixError, InputError
from demix.utils.file_utils import ensure_directory, write_json
from demix.utils.responses import (
    create_error_report,
    create_summary,
    derive_run_id,
    generate_run_id,
)

logger = logging.getLogger(__name__)

console = Console()

# Parameters that do not change what a command computes
RUN_ID_EXCLUDED = ("out", "jobs")


@contextmanager
def command_errors(run_id: Optional[str] = None) -> Iterator[str]:
    """
    Run a command body and translate failures into exit codes.

    Yields the run ID used in the command's documents. Inside a CLI invocation
    it is derived from the command name and its parameters.

    Raises:
        typer.Exit: 2 for input errors, 3 for numerical and unexpected failures
    """
    run_id = run_id or current_run_id()
    try:
        yield run_id
    except typer.Exit:
        raise
    except ValidationError as e:
        _fail(InputError("invalid parameters", detail=str(e)), run_id)
    except DemixError as e:
        _fail(e, run_id)
    except Exception as e:
        logger.error(f"Unhandled exception: {e}", exc_info=True)
        _fail(e, run_id)


def current_run_id() -> str:
    """Run ID of the active CLI invocation, or a fresh one outside the CLI."""
    ctx = click.get_current_context(silent=True)
    if ctx is None:
        return generate_run_id()
    params = {key: value for key, value in ctx.params.items() if key not in RUN_ID_EXCLUDED}
    return derive_run_id(ctx.info_name or ctx.command.name, params)


def _fail(error: Exception, run_id: str) -> None:
    report = create_error_report(error, run_id)
    logger.error(f"{report['error']}: {report['message']}")
    typer.echo(json.dumps(report, indent=2, default=str), err=True)
    raise typer.Exit(code=report["exit_code"])


def parse_int_list(text: str, option: str) -> List[int]:
    """
    Parse ``"1,2,5"`` or ``"start:stop:step"`` (stop inclusive) into integers.

    Raises:
        InputError: On malformed input
    """
    values: List[int] = []
    try:
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if ":" in part:
                pieces = [int(p) for p in part.split(":")]
                if len(pieces) not in (2, 3) or (len(pieces) == 3 and pieces[2] < 1):
                    raise ValueError(part)
                start, stop = pieces[0], pieces[1]
                step = pieces[2] if len(pieces) == 3 else 1
                values.extend(range(start, stop + 1, step))
            else:
                values.append(int(part))
    except ValueError as e:
        raise InputError(f"{option}: cannot parse {text!r}") from e
    if not values:
        raise InputError(f"{option} is empty")
    return values


def write_summary(out_dir: Path, data, run_id: str) -> Path:
    """Write ``summary.json`` with the standard success fields."""
    ensure_directory(out_dir)
    return write_json(out_dir / "summary.json", create_summary(data, run_id))


def print_table(title: str, rows: List[dict]) -> None:
    """Render rows as a rich table on stdout."""
    if not rows:
        return
    table = Table(title=title)
    for column in rows[0]:
        table.add_column(str(column))
    for row in rows:
        table.add_row(*(_cell(value) for value in row.values()))
    console.print(table)


def _cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.4g}"
    return "" if value is None else str(value)
