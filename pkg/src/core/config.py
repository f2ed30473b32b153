"""
Configuration management for filecache
"""
import os
import yaml
import psutil
from pathlib import Path
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from typing import Optional

from core.errors import ConfigurationError


class Settings(BaseSettings):
    # Application settings
    app_name: str = "filecache"
    version: str = "0.1.0"

    # Parallelism (CACHE_SIM_THREADS); None means machine parallelism
    threads: Optional[int] = Field(default=None, ge=1)
    chunk_size: int = Field(default=256, ge=1)

    # Analytic defaults
    ode_step_factor: int = Field(default=50, ge=1)  # h = 1 / (factor * K)
    ode_tolerance: float = Field(default=1e-9, gt=0)
    exact_bits_budget: int = Field(default=100_000, ge=1)

    # Check every exact coded trial for decodability
    verify_trials: bool = True

    # Logging
    log_level: str = "INFO"
    log_file: Optional[str] = None

    model_config = SettingsConfigDict(
        env_prefix="CACHE_SIM_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    def worker_count(self) -> int:
        """Number of trial workers to use"""
        if self.threads:
            return self.threads
        return psutil.cpu_count(logical=True) or 1


def load_config(config_file: Optional[str] = None) -> Settings:
    """Load configuration from file and environment variables"""
    if config_file and Path(config_file).exists():
        with open(config_file, 'r') as f:
            config_data = yaml.safe_load(f) or {}

        # Environment wins over file
        for key, value in config_data.items():
            env_key = f"CACHE_SIM_{key.upper()}"
            if not os.getenv(env_key):
                os.environ[env_key] = str(value)

    return Settings()


def reload_settings(config_file: str) -> Settings:
    """Refresh the shared settings instance from a YAML file and the environment"""
    if not Path(config_file).exists():
        raise ConfigurationError(f"settings file not found: {config_file}")
    fresh = load_config(config_file)
    for name in Settings.model_fields:
        setattr(settings, name, getattr(fresh, name))
    return settings


# Global configuration instance
settings = load_config()
