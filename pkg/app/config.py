from pathlib import Path
from functools import lru_cache

from pydantic_settings import BaseSettings, SettingsConfigDict

PACKAGE_DATA_DIR = Path(__file__).resolve().parent / "data"


class Settings(BaseSettings):
    """Toolkit settings loaded from environment variables."""

    # Data files (rule packs, word sets, affix lists, fold tables)
    DATA_DIR: Path = PACKAGE_DATA_DIR

    # Parallelism (0 = all available CPUs)
    THREADS: int = 1
    SHARD_COUNT: int = 8

    # Logging
    LOG_LEVEL: str = "INFO"

    # E-step execution: "local" or "celery"
    ESTEP_BACKEND: str = "local"

    # Celery
    CELERY_BROKER_URL: str = "redis://redis:6379/1"
    CELERY_RESULT_BACKEND: str = "redis://redis:6379/2"
    CELERY_ALWAYS_EAGER: bool = False
    CELERY_TASK_TIMEOUT: int = 600  # 10 minutes per shard

    model_config = SettingsConfigDict(
        env_prefix="BITOK_",
        env_file=".env",
        case_sensitive=True,
    )


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()
