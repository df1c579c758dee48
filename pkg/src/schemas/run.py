from enum import Enum
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

RunMode = Literal["analyze", "emit", "run", "stats", "bench", "check-uaf"]
SweepMode = Literal["sync", "async"]


class RunConfig(BaseModel):
    mode: RunMode
    input: Optional[Path] = None
    metadata: Optional[Path] = None
    report: Optional[Path] = None
    output: Optional[Path] = None
    protected: bool = True
    threads: int = Field(1, ge=1)
    iterations: int = Field(1, ge=1)
    seed: int = 0
    stack_pointers: bool = True
    sweep: SweepMode = "sync"

    model_config = ConfigDict(frozen=True)


class BenchRow(BaseModel):
    workload: str
    configuration: str
    threads: int = Field(..., ge=1)
    instructions: int
    hook_calls: int
    events: int
    simulated_cost: int
    peak_memory: int
    wall_time_seconds: float
    cost_ratio: float = 1.0
    memory_ratio: float = 1.0
    time_ratio: float = 1.0

    model_config = ConfigDict(frozen=True)


class Verdict(str, Enum):
    PREVENTED = "PREVENTED"
    NOT_PREVENTED = "NOT-PREVENTED"
    NOT_APPLICABLE = "NOT-APPLICABLE"


class UafVerdict(BaseModel):
    scenario: str
    verdict: Verdict
    protected_trapped: bool = False
    protected_stale: int = 0
    unprotected_stale: int = 0
    nullified: int = 0

    model_config = ConfigDict(frozen=True)

    @property
    def demonstrated(self) -> bool:
        """Whether the unprotected run actually touched freed memory."""
        return self.unprotected_stale > 0

    def line(self) -> str:
        shown = "stale read shown" if self.demonstrated else "no stale read"
        return f"{self.scenario}: {self.verdict.value} (nullified {self.nullified}, unprotected: {shown})"
