import logging
from dataclasses import dataclass
from typing import Optional

from src.analysis.pipeline import AnalysisResult, analyze_module
from src.analysis.stats import count_free_sites, emit_statistics
from src.config.settings import Settings, get_settings
from src.ir.module import Module
from src.metadata.builder import build_tables
from src.metadata.records import ObjectPointerTable
from src.runtime.interpreter import interp_run
from src.schemas.analysis import StatsRecord
from src.schemas.run import UafVerdict, Verdict
from src.schemas.runtime import ExecutionReport, FaultKind, ProtectionMode

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CompiledModule:
    analysis: AnalysisResult
    metadata: ObjectPointerTable

    @property
    def module(self) -> Module:
        return self.analysis.module


def compile_module(module: Module) -> CompiledModule:
    """
    Analyze ``module`` and build its pointer tables.
    """
    analysis = analyze_module(module)
    metadata = build_tables(analysis.stage2, analysis.classes, module)
    return CompiledModule(analysis=analysis, metadata=metadata)


def module_statistics(
    compiled: CompiledModule, name: str = "", settings: Optional[Settings] = None, run: bool = False
) -> StatsRecord:
    execution = None
    if run:
        execution = interp_run(compiled.module, compiled.metadata, ProtectionMode.PROTECTED, settings)
    return emit_statistics(
        compiled.analysis.stage2, compiled.module, compiled.analysis.classes, execution=execution, name=name
    )


def check_uaf(
    module: Module,
    name: str = "",
    settings: Optional[Settings] = None,
    stack_pointers: bool = True,
) -> tuple[UafVerdict, ExecutionReport, ExecutionReport]:
    """
    Run a scenario unprotected and protected (synchronous sweeps) and judge
    whether the protection kept every access away from freed memory.
    """
    settings = settings or get_settings()
    compiled = compile_module(module)
    unprotected = interp_run(module, None, ProtectionMode.UNPROTECTED, settings, sweep_mode="sync")
    protected = interp_run(
        module, compiled.metadata, ProtectionMode.PROTECTED, settings, sweep_mode="sync", stack_pointers=stack_pointers
    )
    demonstrated = bool(unprotected.stale_accesses)
    unrelated_traps = [fault for fault in protected.faults if fault.kind != FaultKind.NULL_DEREFERENCE]
    if count_free_sites(module) == 0:
        verdict = Verdict.NOT_APPLICABLE
    elif protected.stale_accesses or (demonstrated and unrelated_traps):
        verdict = Verdict.NOT_PREVENTED
    else:
        verdict = Verdict.PREVENTED
    result = UafVerdict(
        scenario=name,
        verdict=verdict,
        protected_trapped=protected.trapped_on_null,
        protected_stale=len(protected.stale_accesses),
        unprotected_stale=len(unprotected.stale_accesses),
        nullified=protected.nullified,
    )
    logger.info("Scenario %s: %s", name or "<module>", verdict.value)
    return result, protected, unprotected
