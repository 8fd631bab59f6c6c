# rlstate/settings.py
"""
Process configuration read from the environment (and an optional .env file).
"""

import os
from functools import lru_cache
from dotenv import load_dotenv, find_dotenv
from pydantic import BaseModel, Field

# Pick up a .env next to the working directory if there is one
load_dotenv(find_dotenv(usecwd=True))


class Settings(BaseModel):
    log_level: str = "INFO"
    seed: int = 2018
    points_per_try: float = Field(default=6.0, gt=0)
    big_play_percentile: float = Field(default=0.95, gt=0, lt=1)
    float_format: str = "%.6f"


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Build settings from RLSTATE_* environment variables, falling back to defaults."""
    defaults = Settings()
    return Settings(
        log_level=os.getenv("RLSTATE_LOG_LEVEL", defaults.log_level).upper(),
        seed=int(os.getenv("RLSTATE_SEED", defaults.seed)),
        points_per_try=float(os.getenv("RLSTATE_POINTS_PER_TRY", defaults.points_per_try)),
        big_play_percentile=float(os.getenv("RLSTATE_BIG_PLAY_PERCENTILE", defaults.big_play_percentile)),
        float_format=os.getenv("RLSTATE_FLOAT_FORMAT", defaults.float_format),
    )


def reset_settings() -> None:
    get_settings.cache_clear()
