import os
import logging
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ValidationError, field_validator

from smooth_cruiser.core.errors import InvalidArgumentError

# Load environment variables from .env file if it exists
load_dotenv()

ENV_PREFIX = "SMOOTHCRUISER_"
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


class RuntimeConfig(BaseModel):
    seed: Optional[int] = None
    log_level: str = "WARNING"
    log_file: Optional[str] = None
    workers: Optional[int] = None

    @field_validator("seed")
    @classmethod
    def _seed_nonnegative(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value < 0:
            raise ValueError("must be nonnegative")
        return value

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, value: str) -> str:
        level = value.strip().upper()
        if level not in LOG_LEVELS:
            raise ValueError(f"must be one of {', '.join(LOG_LEVELS)}")
        return level

    @field_validator("workers")
    @classmethod
    def _workers_positive(cls, value: Optional[int]) -> Optional[int]:
        if value is not None and value < 1:
            raise ValueError("must be at least 1")
        return value

    def resolve_seed(self, flag: Optional[int]) -> int:
        """--seed wins over SMOOTHCRUISER_SEED, which wins over 0."""
        if flag is not None:
            return flag
        return self.seed if self.seed is not None else 0


def load_config() -> RuntimeConfig:
    raw = {}
    for field in RuntimeConfig.model_fields:
        value = os.getenv(ENV_PREFIX + field.upper())
        if value not in (None, ""):
            raw[field] = value
    try:
        return RuntimeConfig(**raw)
    except ValidationError as e:
        first = e.errors()[0]
        name = ENV_PREFIX + str(first["loc"][0]).upper()
        logging.getLogger(__name__).debug(f"Rejected environment: {e}")
        raise InvalidArgumentError(
            f"{name}={raw.get(first['loc'][0])!r}: {first['msg']}"
        ) from e
