from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Load from env (and .env file). CLI flags override these defaults."""

    # Stopping: ||b - Ax|| < eps ||b||
    default_eps: float = 1e-6
    default_k_max: int = 2000

    # Decomposition: two mesh steps of overlap
    default_overlap: int = 2

    # Two-level: corrections per coarse solution and the fine/coarse blend weight
    default_max_corr: int = 5
    coarse_weight: float = 0.5

    # Runtime: watchdog bound is k_max * (max_delay + 2) * watchdog_factor ticks
    watchdog_factor: int = 4

    # Harness
    weak_local_size: int = 10

    # Logging
    log_level: str = "INFO"

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        extra = "ignore"


def get_settings() -> Settings:
    return Settings()
