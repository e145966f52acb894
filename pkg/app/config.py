"""
Application configuration using Pydantic Settings
"""
from pydantic_settings import BaseSettings
from functools import lru_cache
import logging


class Settings(BaseSettings):
    """Application settings loaded from environment variables"""

    # Basis / runs
    DEGREE: int = 4
    BUDGET_SOLVES: int = 100
    BASIS_SIZE_CAP: int = 1_000_000
    MAX_CONSECUTIVE_INFEASIBLE: int = 10
    DEFAULT_SEEDS: str = "1-20"
    MAX_WORKERS: int = 4

    # Convex solver
    SOLVER_TOL: float = 1e-7
    SOLVER_MAX_ITER: int = 200
    RANK_TOL: float = 1e-10
    FEASIBILITY_TOL: float = 1e-9

    # Sensitivity analysis
    SALTELLI_N_BASE: int = 32768

    # App Configuration
    LOG_LEVEL: str = "INFO"
    API_BASE_URL: str = "http://localhost:8000"

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = True


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance"""
    return Settings()


settings = get_settings()


def setup_logging(level: str | None = None) -> None:
    """Configure root logging once for the service and the CLI"""
    logging.basicConfig(
        level=getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.INFO),
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
    )
