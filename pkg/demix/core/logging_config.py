"""
Logging configuration for the toolkit.

This module sets up structured logging with appropriate formatters and handlers.
"""

import logging
import logging.config
from datetime import datetime
from typing import Optional

from demix.core.config import settings


def setup_logging(level: Optional[str] = None) -> None:
    """
    Set up logging configuration for the toolkit.

    Console output goes to stderr so that stdout stays free for command output.
    A rotating file handler is added when ``LOG_TO_FILE`` is enabled.

    Args:
        level: Optional level overriding ``settings.LOG_LEVEL``
    """
    root_level = (level or settings.LOG_LEVEL.value).upper()

    handlers = {
        "console": {
            "class": "logging.StreamHandler",
            "level": root_level,
            "formatter": "simple",
            "stream": "ext://sys.stderr",
        },
    }
    handler_names = ["console"]

    log_filename = None
    if settings.LOG_TO_FILE:
        log_filename = str(
            settings.get_log_path(f"demix_{datetime.now().strftime('%Y%m%d')}.log")
        )
        handlers["file"] = {
            "class": "logging.handlers.RotatingFileHandler",
            "level": "DEBUG",
            "formatter": "detailed",
            "filename": log_filename,
            "maxBytes": 10485760,
            "backupCount": 5,
        }
        handler_names.append("file")

    LOGGING_CONFIG = {
        "version": 1,
        "disable_existing_loggers": False,
        "formatters": {
            "detailed": {
                "format": "%(asctime)s - %(name)s - %(levelname)s - %(funcName)s:%(lineno)d - %(message)s",
                "datefmt": "%Y-%m-%d %H:%M:%S",
            },
            "simple": {"format": "%(levelname)s - %(message)s"},
        },
        "handlers": handlers,
        "loggers": {
            "": {
                "level": root_level,
                "handlers": handler_names,
            },
            "joblib": {
                "level": "WARNING",
                "handlers": handler_names,
                "propagate": False,
            },
        },
    }

    logging.config.dictConfig(LOGGING_CONFIG)

    logger = logging.getLogger(__name__)
    logger.debug("Logging system initialized")
    if log_filename:
        logger.debug(f"Log file: {log_filename}")
    logger.debug(f"Log level: {root_level}")

