import re
from functools import lru_cache

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings

_TERMCOND_PATTERN = re.compile(r"^(exact|budget|cover-stable:[1-9][0-9]*)$")


class Settings(BaseSettings):
    """Runtime settings for the kamsynth pipeline."""

    # App settings
    app_name: str = Field(default="kamsynth")
    version: str = Field(default="1.0.0")
    debug: bool = Field(default=False)

    # Logging
    log_level: str = Field(default="INFO")
    log_format: str = Field(default="console")

    # Algorithm defaults
    default_budget: int = Field(default=10, ge=1)
    default_termcond: str = Field(default="cover-stable:2")
    seed: int = Field(default=0)

    # Resource caps
    prefix_node_limit: int = Field(default=200_000, ge=1)
    kam_node_limit: int = Field(default=2_000_000, ge=1)
    refine_step_limit: int = Field(default=5_000_000, ge=1)
    bisim_block_limit: int = Field(default=100_000, ge=1)
    ka_cell_limit: int = Field(default=500_000, ge=1)

    # Reports
    report_indent: int = Field(default=2, ge=0)

    @field_validator("debug", mode="before")
    @classmethod
    def parse_debug(cls, v) -> bool:
        """Parse debug value from string or bool."""
        if isinstance(v, str):
            return v.lower() in ("true", "1", "yes", "on")
        return bool(v)

    @field_validator("log_level")
    @classmethod
    def normalize_log_level(cls, v: str) -> str:
        """Upper-case the level and reject unknown names."""
        level = v.strip().upper()
        if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level: {v}")
        return level

    @field_validator("log_format")
    @classmethod
    def check_log_format(cls, v: str) -> str:
        if v not in ("console", "json"):
            raise ValueError("log_format must be 'console' or 'json'")
        return v

    @field_validator("default_termcond")
    @classmethod
    def check_termcond(cls, v: str) -> str:
        """Accept exact, budget or cover-stable:k."""
        if not _TERMCOND_PATTERN.match(v):
            raise ValueError(f"invalid termination condition: {v}")
        return v

    model_config = {
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "env_prefix": "KAMSYNTH_",
        "extra": "ignore",
    }


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


# For testing or dynamic reloading
def reload_settings() -> Settings:
    """Clear cache and reload settings."""
    get_settings.cache_clear()
    return get_settings()
