"""
Application configuration module.

This module defines settings for the laboratory using pydantic Settings,
including the workspace root, logging destinations and the worker pool size.
Experiment parameters are not settings: they live in the experiment manifest.
"""

from functools import lru_cache
from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Application settings loaded from environment variables.
    """
    PROJECT_NAME: str = "SAC Stealing-Detection Lab"
    VERSION: str = "1.0.0"

    # Workspace settings
    SAC_WORKSPACE: Path = Path("workspace")
    DATABASE_NAME: str = "ledger.sqlite3"

    # Logging settings
    LOG_DIR: Path = Path("logs")
    LOG_LEVEL: str = "INFO"
    LOG_TO_CONSOLE: bool = True

    # Scheduler settings
    MAX_WORKERS: int = 4

    model_config = SettingsConfigDict(env_file=".env", extra="ignore")


@lru_cache
def get_settings():
    """
    Cached function to get application settings.

    Returns:
        Settings: An instance of the Settings class.
    """
    return Settings()


settings = get_settings()
