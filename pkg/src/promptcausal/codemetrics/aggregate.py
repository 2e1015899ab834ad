"""Record-level code-quality metrics.

Aggregation order is fixed and documented: every per-cell quantity is first
reduced within a solution (over its test cases), then averaged across the
record's solutions.  Execution rates are carried as exact rationals until
the final conversion to float, so the four status rates always sum to 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Dict, Sequence, Tuple

from promptcausal.codemetrics.execution import (
    PASS,
    RUNTIME_ERROR,
    STATUSES,
    TIMEOUT,
    ExecutionLimits,
    ExecutionOutcome,
    run_tests,
)
from promptcausal.codemetrics.parsing import count_syntax_errors
from promptcausal.codemetrics.similarity import (
    bleu,
    codebleu,
    mutual_similarity,
    tokenize_code,
)
from promptcausal.codemetrics.style import style_violations
from promptcausal.dataset import PromptRecord

__all__ = [
    "METRIC_NAMES",
    "METRIC_DIRECTIONS",
    "MetricsConfig",
    "CodeMetricVector",
    "aggregate_rates",
    "compute_metrics",
]

#: Canonical metric order used in matrices, reports, and CSV output.
METRIC_NAMES = (
    "pass_rate",
    "run_err_rate",
    "timeout_rate",
    "syn_err",
    "gold_sim_CB",
    "gold_sim_B",
    "mut_sim_CB",
    "mut_sim_B",
    "black_count",
)

#: +1 when larger values are better, -1 when smaller values are better.
METRIC_DIRECTIONS: Dict[str, int] = {
    "pass_rate": +1,
    "run_err_rate": -1,
    "timeout_rate": -1,
    "syn_err": -1,
    "gold_sim_CB": +1,
    "gold_sim_B": +1,
    "mut_sim_CB": +1,
    "mut_sim_B": +1,
    "black_count": -1,
}


@dataclass(frozen=True)
class MetricsConfig:
    timeout_s: float = 4.0
    memory_mb: int = 256
    interpreter: Tuple[str, ...] = ()
    codebleu_weights: Tuple[float, float, float] = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    max_n: int = 4
    smooth_k: float = 1.0
    max_workers: int = 4


@dataclass(frozen=True)
class CodeMetricVector:
    """Per-record code metrics; missing values are NaN.

    ``black_count`` is the violation count from the built-in style-rule
    subset (see :mod:`promptcausal.codemetrics.style`).
    """

    pass_rate: float
    run_err_rate: float
    timeout_rate: float
    syn_err: float
    gold_sim_CB: float
    gold_sim_B: float
    mut_sim_CB: float
    mut_sim_B: float
    black_count: float

    def __post_init__(self) -> None:
        for name in ("pass_rate", "run_err_rate", "timeout_rate"):
            v = getattr(self, name)
            if math.isfinite(v) and not 0.0 <= v <= 1.0 + 1e-12:
                raise ValueError(f"{name} out of [0,1]: {v}")
        for name in ("gold_sim_CB", "gold_sim_B", "mut_sim_CB", "mut_sim_B"):
            v = getattr(self, name)
            if math.isfinite(v) and not -1e-12 <= v <= 1.0 + 1e-12:
                raise ValueError(f"{name} out of [0,1]: {v}")

    def as_dict(self) -> Dict[str, float]:
        return {name: getattr(self, name) for name in METRIC_NAMES}


def aggregate_rates(outcomes: Sequence[ExecutionOutcome]) -> Dict[str, Fraction]:
    """Exact mean status rates: per solution first, then across solutions.

    The returned fractions over the four statuses sum to exactly 1.
    """
    if not outcomes:
        raise ValueError("no execution outcomes to aggregate")
    n = len(outcomes)
    return {
        status: sum((o.rate(status) for o in outcomes), Fraction(0)) / n
        for status in STATUSES
    }


def compute_metrics(
    record: PromptRecord,
    gold: str,
    config: MetricsConfig = MetricsConfig(),
) -> CodeMetricVector:
    """All code metrics for one record's generated solutions.

    Requires at least one solution and a non-empty gold program.  Execution
    rates are NaN when the record has no test cases; mutual similarities are
    NaN when there is only one solution.
    """
    if not record.solutions:
        raise ValueError(f"record {record.id!r} has no solutions")
    if not gold.strip():
        raise ValueError(f"record {record.id!r}: gold program is empty")
    solutions = list(record.solutions)
    n = len(solutions)

    if record.test_cases:
        limits = ExecutionLimits(timeout_s=config.timeout_s, memory_mb=config.memory_mb)
        outcomes = [
            run_tests(
                sol,
                record.test_cases,
                limits=limits,
                interpreter=config.interpreter,
                max_workers=config.max_workers,
            )
            for sol in solutions
        ]
        rates = aggregate_rates(outcomes)
        pass_rate = float(rates[PASS])
        run_err_rate = float(rates[RUNTIME_ERROR])
        timeout_rate = float(rates[TIMEOUT])
    else:
        pass_rate = run_err_rate = timeout_rate = math.nan

    syn_err = sum(count_syntax_errors(sol) for sol in solutions) / n
    gold_tokens = tokenize_code(gold)
    gold_sim_cb = (
        sum(
            codebleu(
                sol,
                gold,
                weights=config.codebleu_weights,
                max_n=config.max_n,
                smooth_k=config.smooth_k,
            ).score
            for sol in solutions
        )
        / n
    )
    gold_sim_b = (
        sum(
            bleu(tokenize_code(sol), gold_tokens, max_n=config.max_n, smooth_k=config.smooth_k)
            for sol in solutions
        )
        / n
    )
    if n >= 2:
        mut_sim_cb = mutual_similarity(
            solutions, metric="codebleu", max_n=config.max_n, smooth_k=config.smooth_k
        )
        mut_sim_b = mutual_similarity(
            solutions, metric="bleu", max_n=config.max_n, smooth_k=config.smooth_k
        )
    else:
        mut_sim_cb = mut_sim_b = math.nan
    black_count = sum(style_violations(sol) for sol in solutions) / n

    return CodeMetricVector(
        pass_rate=pass_rate,
        run_err_rate=run_err_rate,
        timeout_rate=timeout_rate,
        syn_err=syn_err,
        gold_sim_CB=gold_sim_cb,
        gold_sim_B=gold_sim_b,
        mut_sim_CB=mut_sim_cb,
        mut_sim_B=mut_sim_b,
        black_count=black_count,
    )
