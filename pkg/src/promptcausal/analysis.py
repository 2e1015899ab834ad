"""Prompt-effect analysis and graph verification.

``analyze`` answers, for one meta-prompt variable M: which code metrics does
M move the most (top 3 by absolute treatment effect), and which linguistic
ancestors of each affected metric carry the effect (top 2 by absolute
effect, using the conditional means of the feature under M=1 vs M=0 as the
intervention pair).

``verify_graph`` checks the learned structure's predictive value: each
metric is predicted out-of-sample from its meta/linguistic ancestors only,
reporting R-squared and MSE per metric.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from promptcausal.dataset import ObservationMatrix
from promptcausal.errors import EmptyStratum, InsufficientData, UnknownNode
from promptcausal.graph import CausalGraph
from promptcausal.inference import (
    AteConfig,
    AteEstimate,
    conditional_mean,
    estimate_ate,
    make_regressor,
)

__all__ = [
    "AnalysisConfig",
    "FeatureAttribution",
    "MetricExplanation",
    "AnalysisReport",
    "analyze",
    "VerificationConfig",
    "MetricVerification",
    "VerificationReport",
    "verify_graph",
]


@dataclass(frozen=True)
class AnalysisConfig:
    top_metrics: int = 3
    top_features: int = 2
    #: |ATE| below this (standardized scale) counts as no detectable effect.
    negligible: float = 0.01
    ate: AteConfig = field(default_factory=AteConfig)


@dataclass(frozen=True)
class FeatureAttribution:
    feature: str
    estimate: AteEstimate
    primary: bool


@dataclass(frozen=True)
class MetricExplanation:
    metric: str
    meta_effect: AteEstimate
    features: Tuple[FeatureAttribution, ...]
    #: True when the metric has no linguistic ancestors in the graph.
    no_ancestors: bool


@dataclass(frozen=True)
class AnalysisReport:
    meta_var: str
    ranked_metrics: Tuple[Tuple[str, float], ...]
    top_metrics: Tuple[str, ...]
    explanations: Dict[str, MetricExplanation]
    #: True when even the largest |ATE| is below the negligible threshold.
    negligible: bool

    def as_dict(self) -> dict:
        return {
            "meta_var": self.meta_var,
            "ranked_metrics": [[m, a] for m, a in self.ranked_metrics],
            "top_metrics": list(self.top_metrics),
            "negligible": self.negligible,
            "explanations": {
                metric: {
                    "ate": exp.meta_effect.as_dict(),
                    "no_ancestors": exp.no_ancestors,
                    "features": [
                        {
                            "feature": fa.feature,
                            "primary": fa.primary,
                            "ate": fa.estimate.as_dict(),
                        }
                        for fa in exp.features
                    ],
                }
                for metric, exp in self.explanations.items()
            },
        }


def analyze(
    graph: CausalGraph,
    m: ObservationMatrix,
    meta_var: str,
    config: AnalysisConfig = AnalysisConfig(),
) -> AnalysisReport:
    """Rank metrics by the effect of ``meta_var`` and explain the top ones.

    Requires ``meta_var`` to be an M-tier node of the graph with both
    strata present in the data.  Ties in |effect| break lexicographically
    by metric (then feature) name, so reports are reproducible.
    """
    if meta_var not in m.schema.meta_names:
        raise UnknownNode(meta_var)
    if meta_var not in graph.tiers or graph.tiers[meta_var] != "M":
        raise UnknownNode(meta_var)
    meta_col = m.column(meta_var)
    if not (meta_col == 1.0).any() or not (meta_col == 0.0).any():
        raise EmptyStratum(f"{meta_var} does not take both values 0 and 1")

    effects: Dict[str, AteEstimate] = {}
    for metric in m.schema.metric_names:
        effects[metric] = estimate_ate(
            m, graph, meta_var, metric, x1=1.0, x0=0.0, config=config.ate
        )
    ranked = sorted(
        ((metric, est.point) for metric, est in effects.items()),
        key=lambda pair: (-abs(pair[1]), pair[0]),
    )
    top = tuple(metric for metric, _ in ranked[: config.top_metrics])

    explanations: Dict[str, MetricExplanation] = {}
    for metric in top:
        if metric in graph.tiers:
            ling_ancestors = sorted(graph.ancestors(metric, tier="L"))
        else:
            ling_ancestors = []
        attributions: List[Tuple[str, AteEstimate]] = []
        for feature in ling_ancestors:
            l1 = conditional_mean(m, feature, (meta_var, 1.0))
            l0 = conditional_mean(m, feature, (meta_var, 0.0))
            est = estimate_ate(m, graph, feature, metric, x1=l1, x0=l0, config=config.ate)
            attributions.append((feature, est))
        attributions.sort(key=lambda pair: (-abs(pair[1].point), pair[0]))
        features = tuple(
            FeatureAttribution(feature=f, estimate=e, primary=i < config.top_features)
            for i, (f, e) in enumerate(attributions)
        )
        explanations[metric] = MetricExplanation(
            metric=metric,
            meta_effect=effects[metric],
            features=features,
            no_ancestors=not ling_ancestors,
        )
    max_effect = max((abs(a) for _, a in ranked), default=0.0)
    return AnalysisReport(
        meta_var=meta_var,
        ranked_metrics=tuple(ranked),
        top_metrics=top,
        explanations=explanations,
        negligible=max_effect < config.negligible,
    )


# ---------------------------------------------------------------------------
# Graph verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VerificationConfig:
    test_fraction: float = 0.2
    min_n: int = 50
    seed: int = 0
    regressor: str = "ridge"


@dataclass(frozen=True)
class MetricVerification:
    metric: str
    r2: float
    mse: float
    predictors: Tuple[str, ...]
    n_train: int
    n_test: int


@dataclass(frozen=True)
class VerificationReport:
    entries: Tuple[MetricVerification, ...]
    test_fraction: float
    seed: int

    def entry(self, metric: str) -> MetricVerification:
        for e in self.entries:
            if e.metric == metric:
                return e
        raise KeyError(metric)


def verify_graph(
    graph: CausalGraph,
    m: ObservationMatrix,
    config: VerificationConfig = VerificationConfig(),
) -> VerificationReport:
    """Out-of-sample predictive check of the learned graph.

    Each metric column is predicted from its meta/linguistic ancestors in
    the graph (a metric with no ancestors gets the train-mean predictor)
    on a deterministic seeded 80/20 split.  Metric columns are never used
    as predictors of other metrics unless the graph makes them ancestors --
    and tier rules mean it never does for M/L-restricted inputs.
    """
    n = m.n_rows
    if n < config.min_n:
        raise InsufficientData(f"need >= {config.min_n} rows, got {n}")
    rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n)
    n_test = max(1, int(round(config.test_fraction * n)))
    test_idx, train_idx = perm[:n_test], perm[n_test:]

    entries: List[MetricVerification] = []
    upstream = set(m.schema.meta_names) | set(m.schema.ling_names)
    for metric in m.schema.metric_names:
        if metric in graph.tiers:
            predictors = tuple(
                sorted(node for node in graph.ancestors(metric) if node in upstream)
            )
        else:
            predictors = ()
        y = m.column(metric)
        if predictors:
            X = np.column_stack([m.column(p) for p in predictors])
        else:
            X = np.empty((n, 0))
        model = make_regressor(config.regressor, config.seed)
        model.fit(X[train_idx], y[train_idx])
        pred = model.predict(X[test_idx])
        resid = y[test_idx] - pred
        ss_res = float(resid @ resid)
        centered = y[test_idx] - y[test_idx].mean()
        ss_tot = float(centered @ centered)
        if ss_tot < 1e-12:
            r2 = 1.0 if ss_res < 1e-12 else 0.0
        else:
            r2 = 1.0 - ss_res / ss_tot
        entries.append(
            MetricVerification(
                metric=metric,
                r2=r2,
                mse=ss_res / len(test_idx),
                predictors=predictors,
                n_train=len(train_idx),
                n_test=len(test_idx),
            )
        )
    return VerificationReport(
        entries=tuple(entries), test_fraction=config.test_fraction, seed=config.seed
    )
