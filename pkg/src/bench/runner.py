import logging
import math
from typing import Iterable, Optional, Sequence

from src.bench.workloads import DEFAULT_SCALE, WORKLOADS, build_workload
from src.config.settings import Settings, get_settings
from src.exceptions import ConfigurationError
from src.runtime.interpreter import interp_run
from src.schemas.run import BenchRow
from src.schemas.runtime import ExecutionReport, ProtectionMode
from src.toolchain import compile_module

logger = logging.getLogger(__name__)

UNPROTECTED = "unprotected"
HEAP_GLOBAL = "protected-heap-global"
ALL_POINTERS = "protected-all"

# name -> (mode, stack pointers)
CONFIGURATIONS = {
    UNPROTECTED: (ProtectionMode.UNPROTECTED, False),
    HEAP_GLOBAL: (ProtectionMode.PROTECTED, False),
    ALL_POINTERS: (ProtectionMode.PROTECTED, True),
}
DEFAULT_THREADS = (1, 2, 4)
OVERHEAD_FLOOR = 0.01


def _ratio(value: float, baseline: float) -> float:
    if baseline <= 0:
        return 1.0 if value <= 0 else math.inf
    return value / baseline


def _row(workload: str, configuration: str, report: ExecutionReport, baseline: Optional[ExecutionReport]) -> BenchRow:
    base = baseline or report
    return BenchRow(
        workload=workload,
        configuration=configuration,
        threads=report.threads,
        instructions=report.instructions,
        hook_calls=report.hook_calls,
        events=report.events,
        simulated_cost=report.simulated_cost,
        peak_memory=report.peak_memory,
        wall_time_seconds=report.wall_time_seconds,
        cost_ratio=_ratio(report.simulated_cost, base.simulated_cost),
        memory_ratio=_ratio(report.peak_memory, base.peak_memory),
        time_ratio=_ratio(report.wall_time_seconds, base.wall_time_seconds),
    )


def run_workload(
    name: str,
    threads: int = 1,
    iterations: int = 1,
    scale: int = DEFAULT_SCALE,
    seed: int = 0,
    sweep_mode: str = "async",
    settings: Optional[Settings] = None,
) -> list[BenchRow]:
    """
    One row per protection configuration for ``name`` at ``threads``
    threads, with ratios taken against the unprotected run.
    """
    settings = settings or get_settings()
    compiled = compile_module(build_workload(name, scale, seed))
    rows, baseline = [], None
    for configuration, (mode, stack_pointers) in CONFIGURATIONS.items():
        metadata = compiled.metadata if mode == ProtectionMode.PROTECTED else None
        report = interp_run(
            compiled.module,
            metadata,
            mode,
            settings,
            stack_pointers=stack_pointers,
            sweep_mode=sweep_mode,
            threads=threads,
            iterations=iterations,
        )
        if report.faults:
            logger.warning("Workload %s (%s) faulted: %s", name, configuration, report.faults[0].kind.value)
        if baseline is None:
            baseline = report
        rows.append(_row(name, configuration, report, baseline))
    return rows


def run_bench(
    workloads: Optional[Iterable[str]] = None,
    thread_counts: Sequence[int] = DEFAULT_THREADS,
    iterations: int = 1,
    scale: int = DEFAULT_SCALE,
    seed: int = 0,
    sweep_mode: str = "async",
    settings: Optional[Settings] = None,
) -> list[BenchRow]:
    names = list(workloads) if workloads else list(WORKLOADS)
    for name in names:
        if name not in WORKLOADS:
            raise ConfigurationError(f"Unknown workload '{name}' (known: {', '.join(WORKLOADS)})")
    rows: list[BenchRow] = []
    for name in names:
        for threads in thread_counts:
            logger.info("Benchmarking %s with %d thread(s)", name, threads)
            rows += run_workload(name, threads, iterations, scale, seed, sweep_mode, settings)
    return rows


def overhead_geomean(rows: Iterable[BenchRow], configuration: str = ALL_POINTERS, metric: str = "cost_ratio") -> float:
    """
    Geometric mean of ``ratio - 1`` over the matching rows, each overhead
    floored at one percent.
    """
    overheads = [
        max(getattr(row, metric) - 1.0, OVERHEAD_FLOOR) for row in rows if row.configuration == configuration
    ]
    if not overheads:
        return 0.0
    return math.exp(sum(math.log(value) for value in overheads) / len(overheads))


def format_bench_table(rows: Sequence[BenchRow]) -> str:
    header = ("workload", "configuration", "threads", "events", "cost", "cost x", "memory", "memory x", "time x")
    body = [
        (
            row.workload,
            row.configuration,
            str(row.threads),
            str(row.events),
            str(row.simulated_cost),
            f"{row.cost_ratio:.3f}",
            str(row.peak_memory),
            f"{row.memory_ratio:.3f}",
            f"{row.time_ratio:.3f}",
        )
        for row in rows
    ]
    widths = [max(len(line[column]) for line in [header, *body]) for column in range(len(header))]
    lines = ["  ".join(cell.ljust(width) for cell, width in zip(line, widths)).rstrip() for line in [header, *body]]
    for configuration in (HEAP_GLOBAL, ALL_POINTERS):
        cost = overhead_geomean(rows, configuration)
        memory = overhead_geomean(rows, configuration, "memory_ratio")
        lines.append(f"geomean overhead {configuration}: cost {cost:.2%}, memory {memory:.2%}")
    return "\n".join(lines)
