from ._typedattr import definenumpy, attrs_from_dict, NamedTupleMixin
from ._typedparser import add_argument, TypedParser, TypedCommandParser, VerboseQuietArgs
from .errors import (
    NetdiffInputError,
    StackFormatError,
    InvariantViolationError,
    ReplicationError,
)
from .fdr_baseline import MultipleTestResult, estimate_fdp, run_baseline_test, threshold_search
from .global_test import GlobalTestResult, critical_value, null_quantile, run_global_test
from .harness import (
    ReplicationReport,
    analyze_real_data,
    emit_report,
    parse_report,
    run_replications,
)
from .netdata import LinkIndexMap, NetworkSampleStack, load_stack, write_stack
from .power_gap import GapConfig, GroupPartition, bh_procedure, build_grid, run_enhanced_test
from .simgen import FAMILIES, ScenarioSpec, ScenarioTruth, generate_scenario
from .stats_core import LinkStatistics, LinkSummaries, compute_link_statistics

__all__ = [
    "definenumpy",
    "attrs_from_dict",
    "NamedTupleMixin",
    "add_argument",
    "TypedParser",
    "TypedCommandParser",
    "VerboseQuietArgs",
    "NetdiffInputError",
    "StackFormatError",
    "InvariantViolationError",
    "ReplicationError",
    "MultipleTestResult",
    "estimate_fdp",
    "run_baseline_test",
    "threshold_search",
    "GlobalTestResult",
    "critical_value",
    "null_quantile",
    "run_global_test",
    "ReplicationReport",
    "analyze_real_data",
    "emit_report",
    "parse_report",
    "run_replications",
    "LinkIndexMap",
    "NetworkSampleStack",
    "load_stack",
    "write_stack",
    "GapConfig",
    "GroupPartition",
    "bh_procedure",
    "build_grid",
    "run_enhanced_test",
    "FAMILIES",
    "ScenarioSpec",
    "ScenarioTruth",
    "generate_scenario",
    "LinkStatistics",
    "LinkSummaries",
    "compute_link_statistics",
]


__version__ = "0.1.0"
