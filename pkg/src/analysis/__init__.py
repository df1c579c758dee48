from .classify import ClassifiedPointer, PointerClass, PointerPartition, classify_pointers
from .facts import export_facts
from .objects import STAR, AbstractObject, FieldObject, ObjectTable, RegisterVar, SiteKind, SymbolVar
from .pipeline import AnalysisResult, analyze_module
from .solver import PointsToSolver, resolve_calls, solve_stage1, solve_stage2
from .soundness import LocationKind, ObservedFact, check_soundness
from .state import Diagnostic, PointsToState
from .stats import emit_statistics, format_stats_table
