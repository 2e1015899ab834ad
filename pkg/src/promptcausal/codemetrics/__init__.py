"""Code-quality metrics for generated solutions."""

from promptcausal.codemetrics.aggregate import (
    METRIC_DIRECTIONS,
    METRIC_NAMES,
    CodeMetricVector,
    MetricsConfig,
    compute_metrics,
)
from promptcausal.codemetrics.execution import (
    PASS,
    RUNTIME_ERROR,
    TIMEOUT,
    WRONG_OUTPUT,
    ExecutionOutcome,
    TestResult,
    run_tests,
)
from promptcausal.codemetrics.parsing import count_syntax_errors, parse_with_recovery
from promptcausal.codemetrics.similarity import (
    CodeBleuScore,
    bleu,
    codebleu,
    mutual_similarity,
    tokenize_code,
)
from promptcausal.codemetrics.style import style_report, style_violations

__all__ = [
    "METRIC_DIRECTIONS",
    "METRIC_NAMES",
    "CodeBleuScore",
    "CodeMetricVector",
    "ExecutionOutcome",
    "MetricsConfig",
    "PASS",
    "RUNTIME_ERROR",
    "TIMEOUT",
    "TestResult",
    "WRONG_OUTPUT",
    "bleu",
    "codebleu",
    "compute_metrics",
    "count_syntax_errors",
    "mutual_similarity",
    "parse_with_recovery",
    "run_tests",
    "style_report",
    "style_violations",
    "tokenize_code",
]
