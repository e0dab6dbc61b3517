"""
Main command-line application module.

This module sets up the typer application with its callback and subcommands.
"""

import logging
from typing import Optional

import typer

from demix.cli.commands import demix, diagnose, localize, phase, synth
from demix.core.config import settings
from demix.core.logging_config import setup_logging

app = typer.Typer(
    name="demix",
    help=(
        "Dictionary-sparse low-rank demixing: decompose M = L + D S, diagnose "
        "recoverability, sweep phase transitions and localize hyperspectral targets."
    ),
    no_args_is_help=True,
    add_completion=False,
    pretty_exceptions_enable=False,
)


@app.callback()
def main(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Log at DEBUG level"),
    log_level: Optional[str] = typer.Option(None, help="Override LOG_LEVEL"),
) -> None:
    """
    Set up logging before any subcommand runs.
    """
    setup_logging("DEBUG" if verbose else log_level)
    logger = logging.getLogger(__name__)
    logger.debug(f"{settings.APP_NAME} v{settings.APP_VERSION}")
    if settings.DEBUG:
        settings.log_configuration()


app.command("synth")(synth.synth)
app.command("demix")(demix.demix)
app.command("phase")(phase.phase)
app.command("diagnose")(diagnose.diagnose)
app.command("localize")(localize.localize)


if __name__ == "__main__":
    app()
