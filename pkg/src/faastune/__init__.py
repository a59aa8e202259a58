"""SLO-aware per-function memory sizing for serverless applications."""

from .estimate import combine_times, estimate_cost, estimate_time
from .model import (
    CallGraph,
    CostModel,
    ExecutionSample,
    FunctionNode,
    FunctionProfile,
    MemoryLadder,
    Objective,
    Parallel,
    Sequence,
    SloSpec,
    configuration_cost,
    normalize_graph,
)
from .profiles import (
    build_profiles,
    load_profiles,
    monotone_repair,
    percentile_linear,
    save_profiles,
    select_alpha,
)
from .search import (
    SearchResult,
    brute_force,
    greedy_min_cost,
    greedy_min_time,
    greedy_slo,
)
from .sim import (
    SimApp,
    SimFunctionSpec,
    ValidationReport,
    generate_app,
    load_app,
    profile_application,
    run_load,
    save_app,
    sim_duration,
    validate_config,
)
from .traces import (
    TraceLog,
    TraceSegment,
    build_call_graph,
    extract_samples,
    load_manual_graph,
    parse_trace_file,
    write_trace_file,
)

__version__ = "0.1.0"

__all__ = [
    "CallGraph",
    "CostModel",
    "ExecutionSample",
    "FunctionNode",
    "FunctionProfile",
    "MemoryLadder",
    "Objective",
    "Parallel",
    "SearchResult",
    "Sequence",
    "SimApp",
    "SimFunctionSpec",
    "SloSpec",
    "TraceLog",
    "TraceSegment",
    "ValidationReport",
    "brute_force",
    "build_call_graph",
    "build_profiles",
    "combine_times",
    "configuration_cost",
    "estimate_cost",
    "estimate_time",
    "extract_samples",
    "generate_app",
    "greedy_min_cost",
    "greedy_min_time",
    "greedy_slo",
    "load_app",
    "load_manual_graph",
    "load_profiles",
    "monotone_repair",
    "normalize_graph",
    "parse_trace_file",
    "percentile_linear",
    "profile_application",
    "run_load",
    "save_app",
    "save_profiles",
    "select_alpha",
    "sim_duration",
    "validate_config",
    "write_trace_file",
]
