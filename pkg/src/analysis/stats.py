from typing import Optional

from src.analysis.classify import PointerPartition, classify_pointers
from src.analysis.state import PointsToState
from src.ir.module import Module
from src.schemas.analysis import StatsRecord
from src.schemas.runtime import ExecutionReport


def count_free_sites(module: Module) -> int:
    return sum(1 for _, _, inst in module.instructions() if inst.is_free)


def emit_statistics(
    state: PointsToState,
    module: Module,
    classes: Optional[PointerPartition] = None,
    execution: Optional[ExecutionReport] = None,
    name: str = "",
) -> StatsRecord:
    if classes is None:
        classes = classify_pointers(state, module)
    runtime = {}
    if execution is not None:
        runtime = {
            "runtime_objects": execution.allocations,
            "runtime_frees": execution.frees,
            "invalidated_pointers": execution.nullified,
        }
    return StatsRecord(
        module=name,
        static_objects=len(state.objects.heap),
        free_sites=count_free_sites(module),
        heap_pointers=len(classes.heap),
        global_pointers=len(classes.globals),
        stack_pointers=len(classes.stack),
        **runtime,
    )


def format_stats_table(records: list[StatsRecord]) -> str:
    rows = [StatsRecord.HEADER] + [record.row() for record in records]
    widths = [max(len(row[col]) for row in rows) for col in range(len(StatsRecord.HEADER))]
    return "\n".join("  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip() for row in rows) + "\n"
