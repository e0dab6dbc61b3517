"""
Summary document utilities.

Provides the standard success and error documents written by every command.
Documents carry no wall-clock data, so identical seeded runs write identical
files.
"""

import hashlib
import json
import logging
import uuid
from datetime import datetime, timezone
from typing import Any, Dict, Mapping, Optional

from demix.core.config import settings
from demix.core.exceptions import DemixError

logger = logging.getLogger(__name__)


def generate_run_id() -> str:
    """Generate a unique run ID for tracking."""
    return f"run_{uuid.uuid4().hex[:12]}"


def derive_run_id(command: str, params: Mapping[str, Any]) -> str:
    """
    Derive a run ID from a command name and its parameters.

    The same command with the same parameters (seed included) always maps to
    the same ID.
    """
    payload = json.dumps({"command": command, "params": dict(params)}, sort_keys=True, default=str)
    return f"run_{hashlib.sha256(payload.encode('utf-8')).hexdigest()[:12]}"


def create_summary(data: Any, run_id: Optional[str] = None) -> Dict[str, Any]:
    """
    Create a standardized success document.

    Args:
        data: Pydantic model or dict with the command's fields
        run_id: Optional run identifier

    Returns:
        dict: ``data`` plus success, run_id and version fields
    """
    if hasattr(data, "model_dump"):
        document = data.model_dump(mode="json")
    elif isinstance(data, dict):
        document = dict(data)
    else:
        document = {"data": data}

    document.setdefault("success", True)
    document.setdefault("run_id", run_id or generate_run_id())
    document.setdefault("version", settings.APP_VERSION)
    logger.info(
        f"Run {document['run_id']} finished at {datetime.now(timezone.utc).isoformat()}"
    )
    return document


def create_error_report(error: Exception, run_id: Optional[str] = None) -> Dict[str, Any]:
    """
    Create a standardized error document.

    Args:
        error: The exception that ended the command
        run_id: Optional run identifier

    Returns:
        dict: Error type, message, detail and exit code
    """
    if isinstance(error, DemixError):
        error_type, message, detail = error.error_type, error.message, error.detail
        exit_code = error.exit_code
    else:
        error_type, message, detail = type(error).__name__, str(error), None
        exit_code = 3

    return {
        "success": False,
        "error": error_type,
        "message": message,
        "detail": detail,
        "exit_code": exit_code,
        "run_id": run_id or generate_run_id(),
    }
