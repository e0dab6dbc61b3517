"""
Toolkit exception hierarchy.

Every error raised by library code carries the process exit code the CLI
reports for it: 2 for usage and input errors, 3 for numerical failures.
"""

from typing import Optional


class DemixError(Exception):
    """Base class for all toolkit errors."""

    exit_code: int = 1
    error_type: str = "DemixError"

    def __init__(self, message: str, detail: Optional[str] = None):
        super().__init__(message)
        self.message = message
        self.detail = detail


class InputError(DemixError):
    """Invalid arguments, malformed files or degenerate input data."""

    exit_code = 2
    error_type = "InputError"


class NumericalError(DemixError):
    """A decomposition failed to converge or produced non-finite values."""

    exit_code = 3
    error_type = "NumericalError"


class DegenerateGeometryError(NumericalError):
    """The certificate system is singular (the mu = 1 geometry)."""

    error_type = "DegenerateGeometryError"
