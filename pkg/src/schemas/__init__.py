from .analysis import StatsRecord
from .run import BenchRow, RunConfig, UafVerdict, Verdict
from .runtime import ExecutionReport, Fault, FaultKind, ProtectionMode, StaleAccess, SweepReport
