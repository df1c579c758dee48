from .runner import CONFIGURATIONS, format_bench_table, overhead_geomean, run_bench, run_workload
from .workloads import WORKLOADS, build_workload, workload_source
