"""
Application configuration settings.

This module handles all configuration settings for the toolkit,
including environment variables and default values with proper validation.
"""

import os
from enum import Enum
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv
from pydantic import Field, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

env_file = Path(__file__).parent.parent.parent / ".env"
if env_file.exists():
    load_dotenv(env_file)


class LogLevel(str, Enum):
    """Log levels."""

    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class Settings(BaseSettings):
    """
    Toolkit settings class with comprehensive validation.

    All settings are loaded from environment variables with fallback defaults.
    Solver, evaluation and diagnostics defaults live here so that every
    subcommand and library entry point agrees on them.
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=True,
        extra="ignore",
    )

    # Application settings
    APP_NAME: str = "Dictionary Demixing Toolkit"
    APP_VERSION: str = "1.0.0"
    DEBUG: bool = Field(default=False, description="Enable debug mode")
    LOG_LEVEL: LogLevel = LogLevel.INFO
    LOG_TO_FILE: bool = Field(
        default=False, description="Also write a rotating log file"
    )
    LOG_DIRECTORY: str = Field(default="logs", description="Directory for log files")

    # Datasets
    DEMIX_DATA_DIR: Optional[str] = Field(
        default=None, description="Directory holding hyperspectral scenes"
    )

    # Parallelism
    DEMIX_THREADS: int = Field(
        default=1, ge=1, description="Default worker count for --jobs"
    )

    # Solver defaults
    CONTINUATION_DECAY: float = Field(
        default=0.95, gt=0.0, lt=1.0, description="Continuation decay v"
    )
    NU_FLOOR: float = Field(default=1e-4, gt=0.0, description="Continuation floor")
    MAX_ITERS: int = Field(default=2000, ge=1, description="Maximum APG iterations")
    CONVERGENCE_TOL: float = Field(
        default=1e-6, gt=0.0, description="Relative iterate-change tolerance"
    )

    # Evaluation defaults
    LAMBDA_COUNT: int = Field(default=100, ge=1, description="Points in a lambda grid")
    COLUMN_THRESHOLD: float = Field(
        default=2e-3, ge=0.0, description="Column-norm threshold for supports"
    )
    SUBSPACE_TOL: float = Field(
        default=1e-3, gt=0.0, description="Principal-angle tolerance in radians"
    )
    ROC_THRESHOLD_COUNT: int = Field(
        default=1000, ge=2, description="Threshold values scanned per ROC"
    )
    SUCCESS_REL_ERROR: float = Field(
        default=0.02, gt=0.0, description="Entry-wise success relative error"
    )
    SUCCESS_PRECISION: float = Field(
        default=0.99, gt=0.0, le=1.0, description="Column-wise success precision"
    )

    # Diagnostics defaults
    MONTE_CARLO_SAMPLES: int = Field(
        default=10000, ge=1, description="Sparse vectors for fat frame bounds"
    )
    CERTIFICATE_MAX_SIZE: int = Field(
        default=2500, ge=1, description="Limit on n*m and d*m for certificates"
    )
    POWER_ITERATIONS: int = Field(
        default=10000, ge=1, description="Power iteration budget"
    )
    POWER_TOL: float = Field(
        default=1e-13, gt=0.0, description="Power iteration relative tolerance"
    )

    @field_validator("LOG_LEVEL", mode="before")
    @classmethod
    def validate_log_level(cls, v):
        """Validate log level setting."""
        if isinstance(v, str):
            try:
                return LogLevel(v.upper())
            except ValueError:
                raise ValueError(
                    f"Invalid log level: {v}. Must be one of: {list(LogLevel)}"
                )
        return v

    @model_validator(mode="after")
    def validate_solver_settings(self) -> "Settings":
        """Validate cross-field solver settings."""
        errors = []

        if self.NU_FLOOR >= 1.0:
            errors.append("NU_FLOOR should be well below the data spectral norm")

        if self.CONVERGENCE_TOL >= 1.0:
            errors.append("CONVERGENCE_TOL must be a relative tolerance below 1")

        if errors:
            raise ValueError(f"Solver configuration errors: {'; '.join(errors)}")

        return self

    def get_log_path(self, filename: str = "") -> Path:
        """Get the full log path for a file."""
        log_dir = Path(self.LOG_DIRECTORY)
        log_dir.mkdir(parents=True, exist_ok=True)

        if filename:
            return log_dir / filename
        return log_dir

    def log_configuration(self) -> None:
        """Log current configuration."""
        import logging

        logger = logging.getLogger(__name__)

        config_info = {
            "app_name": self.APP_NAME,
            "version": self.APP_VERSION,
            "debug": self.DEBUG,
            "log_level": self.LOG_LEVEL.value,
            "threads": self.DEMIX_THREADS,
            "continuation_decay": self.CONTINUATION_DECAY,
            "nu_floor": self.NU_FLOOR,
            "max_iters": self.MAX_ITERS,
            "convergence_tol": self.CONVERGENCE_TOL,
            "lambda_count": self.LAMBDA_COUNT,
            "column_threshold": self.COLUMN_THRESHOLD,
        }

        logger.info(f"Toolkit configuration: {config_info}")


def create_settings() -> Settings:
    """
    Create and validate toolkit settings.

    Returns:
        Settings: Validated settings instance

    Raises:
        SystemExit: If configuration validation fails
    """
    try:
        return Settings()
    except Exception as e:
        print(f"Configuration error: {e}")
        print("Please check your environment variables and .env file")
        raise SystemExit(1) from e


# Global settings instance
settings = create_settings()

if os.getenv("SKIP_CONFIG_LOG") != "true" and settings.DEBUG:
    settings.log_configuration()
