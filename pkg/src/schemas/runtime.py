from enum import Enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field


class ProtectionMode(str, Enum):
    PROTECTED = "protected"
    UNPROTECTED = "unprotected"


class FaultKind(str, Enum):
    NULL_DEREFERENCE = "null-dereference"
    UNMAPPED_ACCESS = "unmapped-access"
    INVALID_FREE = "invalid-free"
    DOUBLE_FREE = "double-free"
    UNKNOWN_FRAME = "unknown-frame"
    OUT_OF_MEMORY = "out-of-memory"
    CALL_DEPTH = "call-depth"
    BAD_CALL = "bad-call"


class Fault(BaseModel):
    kind: FaultKind
    function: Optional[str] = None
    index: Optional[int] = None
    address: Optional[int] = None
    thread: int = 0
    message: str = ""

    model_config = ConfigDict(frozen=True)

    @property
    def is_trap(self) -> bool:
        return self.kind in (FaultKind.NULL_DEREFERENCE, FaultKind.UNMAPPED_ACCESS)


class StaleAccess(BaseModel):
    """
    A load or store that touched heap memory outside every live allocation:
    the observable effect of a use-after-free.
    """

    operation: str
    function: str
    index: int
    address: int
    thread: int = 0

    model_config = ConfigDict(frozen=True)


class SweepReport(BaseModel):
    events_processed: int = 0
    allocs_seen: int = 0
    frees_processed: int = 0
    frames_reclaimed: int = 0
    nullified_heap: int = 0
    nullified_global: int = 0
    nullified_stack: int = 0
    released_bytes: int = 0
    cells_scanned: int = 0
    stack_slots_scanned: int = 0
    diagnostics: List[str] = Field(default_factory=list)

    @property
    def nullified_total(self) -> int:
        return self.nullified_heap + self.nullified_global + self.nullified_stack


class ExecutionReport(BaseModel):
    mode: ProtectionMode
    stack_pointers: bool = True
    sweep_mode: str = "sync"
    threads: int = Field(1, ge=1)
    iterations: int = Field(1, ge=1)
    completed: bool = True
    return_values: List[Optional[int]] = Field(default_factory=list)
    faults: List[Fault] = Field(default_factory=list)
    stale_accesses: List[StaleAccess] = Field(default_factory=list)
    instructions: int = 0
    allocations: int = 0
    frees: int = 0
    frame_entries: int = 0
    hook_calls: int = 0
    events: int = 0
    simulated_cost: int = 0
    peak_memory: int = 0
    metadata_bytes: int = 0
    quarantine_violations: int = 0
    wall_time_seconds: float = 0.0
    trace_digest: str = ""
    sweep: Optional[SweepReport] = None

    @property
    def traps(self) -> List[Fault]:
        return [fault for fault in self.faults if fault.is_trap]

    @property
    def trapped_on_null(self) -> bool:
        return any(fault.kind == FaultKind.NULL_DEREFERENCE for fault in self.faults)

    @property
    def nullified(self) -> int:
        return self.sweep.nullified_total if self.sweep else 0

    def summary_lines(self) -> List[str]:
        lines = [
            f"mode: {self.mode.value}",
            f"stack pointers: {'on' if self.stack_pointers else 'off'}",
            f"threads: {self.threads} x {self.iterations}",
            f"completed: {self.completed}",
            f"instructions: {self.instructions}",
            f"allocations: {self.allocations}",
            f"frees: {self.frees}",
            f"faults: {len(self.faults)}",
            f"stale accesses: {len(self.stale_accesses)}",
            f"nullified pointers: {self.nullified}",
            f"peak memory: {self.peak_memory}",
            f"simulated cost: {self.simulated_cost}",
            f"wall time: {self.wall_time_seconds:.6f}s",
        ]
        for fault in self.faults:
            where = f"{fault.function}:{fault.index}" if fault.function is not None else "-"
            address = f" at {fault.address:#x}" if fault.address is not None else ""
            lines.append(f"fault {fault.kind.value} {where}{address} {fault.message}".rstrip())
        for stale in self.stale_accesses:
            lines.append(f"stale {stale.operation} {stale.function}:{stale.index} at {stale.address:#x}")
        return lines
