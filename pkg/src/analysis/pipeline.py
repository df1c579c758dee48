import logging
from dataclasses import dataclass

from src.analysis.classify import PointerPartition, classify_pointers
from src.analysis.solver import solve_stage1, solve_stage2
from src.analysis.state import PointsToState
from src.ir.module import Module

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnalysisResult:
    module: Module
    stage1: PointsToState
    stage2: PointsToState
    classes: PointerPartition


def analyze_module(module: Module) -> AnalysisResult:
    stage1 = solve_stage1(module)
    stage2 = solve_stage2(module, stage1)
    classes = classify_pointers(stage2, module)
    logger.info("Analysis finished: %d abstract objects, %d heap sites", len(stage2.objects), len(stage2.objects.heap))
    return AnalysisResult(module=module, stage1=stage1, stage2=stage2, classes=classes)
