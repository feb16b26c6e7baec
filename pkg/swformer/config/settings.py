"""Runtime settings loaded from the environment."""

import logging
from typing import Literal, Optional

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

logger = logging.getLogger(__name__)


class Settings(BaseSettings):
    """Process-wide knobs that are not part of an experiment.

    Values come from ``SWFORMER_*`` environment variables or a ``.env`` file
    in the working directory; experiment parameters live in
    :class:`swformer.config.yaml_config.SWFormerConfig` instead.
    """

    model_config = SettingsConfigDict(
        env_prefix="SWFORMER_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging
    log_level: str = Field(default="INFO")
    log_format: Literal["text", "json"] = Field(default="text")
    log_file: Optional[str] = Field(default=None)

    # Execution
    workers: int = Field(default=1, ge=1, le=64)
    precision: Literal["float32", "float64"] = Field(default="float32")

    # Metrics
    metrics_enabled: bool = Field(default=True)

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Normalise and check the level name."""
        level = v.upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"Unknown log level: {v}")
        return level


# Global settings instance (singleton pattern)
_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Get the global settings instance (singleton)."""
    global _settings  # noqa: PLW0603
    if _settings is None:
        _settings = Settings()
    return _settings


def reload_settings() -> Settings:
    """Reload settings from the environment."""
    global _settings  # noqa: PLW0603
    _settings = Settings()
    return _settings
