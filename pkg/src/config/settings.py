from typing import Literal

from pydantic import Field
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    POINTER_SIZE: int = Field(8)
    NULL_PAGE_SIZE: int = Field(4096)

    TEXT_BASE: int = Field(0x1000)
    GLOBAL_BASE: int = Field(0x10_0000)
    STACK_BASE: int = Field(0x100_0000)
    STACK_LIMIT: int = Field(0x1000_0000)
    HEAP_BASE: int = Field(0x1_0000_0000)
    HEAP_LIMIT: int = Field(0x2_0000_0000)
    ALLOC_ALIGNMENT: int = Field(16)

    MAX_CALL_DEPTH: int = Field(512, ge=1)
    EXTERNAL_ALLOC_SIZE: int = Field(32, gt=0)

    SWEEP_MODE: Literal["sync", "async"] = "sync"
    STACK_POINTERS: bool = True
    APP_THREADS: int = Field(1, ge=1)
    SEED: int = 0
    SWEEPER_POLL_SECONDS: float = Field(0.05, gt=0)

    LOG_LEVEL: str = "WARNING"

    INSTRUCTION_COST: int = 1
    HOOK_COST: int = 4
    EVENT_COST: int = 2
    EVENT_COST_BYTES: int = 48

    model_config = {
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "extra": "ignore",
    }


def get_settings() -> Settings:
    return Settings()
