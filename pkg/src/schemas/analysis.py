from typing import ClassVar, Optional

from pydantic import BaseModel, ConfigDict, Field


class StatsRecord(BaseModel):
    """
    Per-module statistics row: static object, free site and static pointer
    counts, plus the runtime columns when a protected run was measured.
    """

    module: str = ""
    static_objects: int = Field(0, ge=0)
    free_sites: int = Field(0, ge=0)
    heap_pointers: int = Field(0, ge=0)
    global_pointers: int = Field(0, ge=0)
    stack_pointers: int = Field(0, ge=0)
    runtime_objects: Optional[int] = Field(None, ge=0)
    runtime_frees: Optional[int] = Field(None, ge=0)
    invalidated_pointers: Optional[int] = Field(None, ge=0)

    model_config = ConfigDict(frozen=True)

    HEADER: ClassVar[tuple[str, ...]] = (
        "module",
        "static objects",
        "free sites",
        "heap ptrs",
        "global ptrs",
        "stack ptrs",
        "runtime objects",
        "runtime frees",
        "invalidated ptrs",
    )

    def row(self) -> tuple[str, ...]:
        def cell(value: Optional[int]) -> str:
            return "-" if value is None else str(value)

        return (
            self.module,
            str(self.static_objects),
            str(self.free_sites),
            str(self.heap_pointers),
            str(self.global_pointers),
            str(self.stack_pointers),
            cell(self.runtime_objects),
            cell(self.runtime_frees),
            cell(self.invalidated_pointers),
        )
