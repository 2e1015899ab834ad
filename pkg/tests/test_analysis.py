"""Effect ranking with linguistic attributions, and out-of-sample graph
verification, on synthetic generators with known answers."""

import numpy as np
import pytest

from promptcausal.analysis import (
    AnalysisConfig,
    VerificationConfig,
    analyze,
    verify_graph,
)
from promptcausal.dataset import VariableSchema
from promptcausal.errors import EmptyStratum, InsufficientData, UnknownNode
from promptcausal.graph import CausalGraph, Edge
from promptcausal.scm import Assignment, SyntheticScm, tiered_chain, to_matrix

CHAIN_SCHEMA = VariableSchema(meta_names=("M",), ling_names=("L1", "L2"), metric_names=("C1",))

WIDE_SCHEMA = VariableSchema(
    meta_names=("M",), ling_names=("L1", "L2"), metric_names=("C1", "C2", "C3")
)


def chain_graph():
    return CausalGraph(
        nodes=("M", "L1", "C1"),
        tiers={"M": "M", "L1": "L", "C1": "C"},
        edges=(Edge("M", "L1", 1.0), Edge("L1", "C1", 2.0)),
    )


def wide_scm():
    """M -> L1 with metrics C1 = 2 L1, C2 = 0.5 L1, C3 = noise."""
    return SyntheticScm({
        "M": Assignment(noise_kind="bernoulli", p=0.5),
        "L1": Assignment(parents=("M",), coeffs=(1.0,), noise_std=0.3),
        "L2": Assignment(noise_std=1.0),
        "C1": Assignment(parents=("L1",), coeffs=(2.0,), noise_std=0.3),
        "C2": Assignment(parents=("L1",), coeffs=(0.5,), noise_std=0.3),
        "C3": Assignment(noise_std=1.0),
    })


def wide_graph():
    return CausalGraph(
        nodes=("M", "L1", "C1", "C2"),
        tiers={"M": "M", "L1": "L", "C1": "C", "C2": "C"},
        edges=(Edge("M", "L1"), Edge("L1", "C1"), Edge("L1", "C2")),
    )


# ---------------------------------------------------------------------------
# analyze
# ---------------------------------------------------------------------------


def test_analyze_hand_chain_oracle():
    # [DERIVED] slopes 1 then 2: the (0,1) intervention on M moves C1 by
    # 2.0; the only linguistic ancestor is L1 and its attributed effect,
    # evaluated between the conditional means of L1 under the two strata,
    # is also close to 2.
    m = to_matrix(tiered_chain().sample(4000, seed=0), CHAIN_SCHEMA)
    report = analyze(chain_graph(), m, "M")
    assert report.top_metrics == ("C1",)
    assert report.ranked_metrics[0][0] == "C1"
    assert report.ranked_metrics[0][1] == pytest.approx(2.0, abs=0.2)
    assert not report.negligible
    explanation = report.explanations["C1"]
    assert not explanation.no_ancestors
    assert explanation.features[0].feature == "L1"
    assert explanation.features[0].primary
    assert explanation.features[0].estimate.point == pytest.approx(2.0, abs=0.25)


def test_analyze_is_deterministic():
    m = to_matrix(tiered_chain().sample(1000, seed=4), CHAIN_SCHEMA)
    a = analyze(chain_graph(), m, "M")
    b = analyze(chain_graph(), m, "M")
    assert a.as_dict() == b.as_dict()


def test_analyze_ranks_metrics_by_absolute_effect():
    # [DERIVED] effect magnitudes 2.0 > 0.5 > ~0 fix the rank order.
    m = to_matrix(wide_scm().sample(4000, seed=1), WIDE_SCHEMA)
    report = analyze(wide_graph(), m, "M")
    assert [name for name, _ in report.ranked_metrics] == ["C1", "C2", "C3"]
    assert report.top_metrics == ("C1", "C2", "C3")
    points = dict(report.ranked_metrics)
    assert points["C1"] == pytest.approx(2.0, abs=0.2)
    assert points["C2"] == pytest.approx(0.5, abs=0.15)
    assert abs(points["C3"]) < 0.15


def test_analyze_top_metrics_limit():
    m = to_matrix(wide_scm().sample(2000, seed=2), WIDE_SCHEMA)
    report = analyze(wide_graph(), m, "M", AnalysisConfig(top_metrics=1))
    assert report.top_metrics == ("C1",)
    assert set(report.explanations) == {"C1"}
    # ranking still covers every metric
    assert len(report.ranked_metrics) == 3


def test_analyze_flags_metrics_without_linguistic_ancestors():
    # C3 is not in the graph at all -> isolated, no ancestors to attribute
    m = to_matrix(wide_scm().sample(2000, seed=3), WIDE_SCHEMA)
    report = analyze(wide_graph(), m, "M")
    explanation = report.explanations["C3"]
    assert explanation.no_ancestors
    assert explanation.features == ()


def test_analyze_negligible_flag():
    # a meta variable with no outgoing edges moves nothing; with the
    # threshold above sampling noise the report says so
    scm = wide_scm()
    m = to_matrix(scm.sample(2000, seed=5), WIDE_SCHEMA)
    graph = CausalGraph(
        nodes=("M", "L1", "C1", "C2", "C3"),
        tiers={"M": "M", "L1": "L", "C1": "C", "C2": "C", "C3": "C"},
        edges=(Edge("L1", "C1"), Edge("L1", "C2")),
    )
    report = analyze(graph, m, "M", AnalysisConfig(negligible=0.5))
    assert report.negligible


def test_analyze_secondary_features_not_primary():
    # two linguistic ancestors: the weaker one is listed but not primary
    # when top_features=1
    scm = SyntheticScm({
        "M": Assignment(noise_kind="bernoulli", p=0.5),
        "L1": Assignment(parents=("M",), coeffs=(1.0,), noise_std=0.3),
        "L2": Assignment(parents=("M",), coeffs=(1.0,), noise_std=0.3),
        "C1": Assignment(parents=("L1", "L2"), coeffs=(2.0, 0.3), noise_std=0.3),
    })
    schema = VariableSchema(meta_names=("M",), ling_names=("L1", "L2"), metric_names=("C1",))
    m = to_matrix(scm.sample(4000, seed=6), schema)
    graph = CausalGraph(
        nodes=("M", "L1", "L2", "C1"),
        tiers={"M": "M", "L1": "L", "L2": "L", "C1": "C"},
        edges=(Edge("M", "L1"), Edge("M", "L2"), Edge("L1", "C1"), Edge("L2", "C1")),
    )
    report = analyze(graph, m, "M", AnalysisConfig(top_features=1))
    features = report.explanations["C1"].features
    assert [f.feature for f in features] == ["L1", "L2"]  # sorted by |effect|
    assert features[0].primary and not features[1].primary


def test_analyze_input_validation():
    m = to_matrix(tiered_chain().sample(200, seed=0), CHAIN_SCHEMA)
    with pytest.raises(UnknownNode):
        analyze(chain_graph(), m, "L1")  # not a meta variable
    graph_without_m = CausalGraph(
        nodes=("L1", "C1"), tiers={"L1": "L", "C1": "C"}, edges=(Edge("L1", "C1"),)
    )
    with pytest.raises(UnknownNode):
        analyze(graph_without_m, m, "M")
    samples = tiered_chain().sample(200, seed=0)
    samples["M"] = np.ones(200)
    m_one_stratum = to_matrix(samples, CHAIN_SCHEMA)
    with pytest.raises(EmptyStratum):
        analyze(chain_graph(), m_one_stratum, "M")


# ---------------------------------------------------------------------------
# verify_graph
# ---------------------------------------------------------------------------


def test_verify_noiseless_chain_is_perfect():
    # [DERIVED] with zero structural noise, C1 = 2 L1 = 2 M exactly, so the
    # out-of-sample fit from graph ancestors reaches machine precision.
    m = to_matrix(tiered_chain(noise_std=0.0).sample(500, seed=0), CHAIN_SCHEMA)
    report = verify_graph(chain_graph(), m)
    entry = report.entry("C1")
    assert entry.predictors == ("L1", "M")
    assert entry.r2 == pytest.approx(1.0, abs=1e-6)
    assert entry.mse <= 1e-10
    assert entry.n_train + entry.n_test == 500
    assert entry.n_test == 100  # round(0.2 * 500)


def test_verify_pure_noise_metric_has_no_skill():
    # [DERIVED] C1 independent of the claimed predictor: out-of-sample R^2
    # stays at chance level (<= 0.05 at n=2000).
    rng = np.random.default_rng(7)
    samples = {
        "M": (rng.random(2000) < 0.5).astype(float),
        "L1": rng.normal(size=2000),
        "L2": rng.normal(size=2000),
        "C1": rng.normal(size=2000),
    }
    m = to_matrix(samples, CHAIN_SCHEMA)
    report = verify_graph(chain_graph(), m)
    assert report.entry("C1").r2 <= 0.05


def test_verify_metric_without_ancestors_uses_mean_predictor():
    m = to_matrix(tiered_chain().sample(400, seed=1), CHAIN_SCHEMA)
    graph = CausalGraph(nodes=("M", "L1"), tiers={"M": "M", "L1": "L"},
                        edges=(Edge("M", "L1"),))
    report = verify_graph(graph, m)
    entry = report.entry("C1")
    assert entry.predictors == ()
    assert entry.r2 <= 0.05


def test_verify_is_seeded_and_deterministic():
    m = to_matrix(tiered_chain().sample(300, seed=2), CHAIN_SCHEMA)
    a = verify_graph(chain_graph(), m, VerificationConfig(seed=11))
    b = verify_graph(chain_graph(), m, VerificationConfig(seed=11))
    assert a.entries == b.entries
    c = verify_graph(chain_graph(), m, VerificationConfig(seed=12))
    assert a.entry("C1").r2 != c.entry("C1").r2  # different split


def test_verify_insufficient_rows():
    m = to_matrix(tiered_chain().sample(20, seed=0), CHAIN_SCHEMA)
    with pytest.raises(InsufficientData):
        verify_graph(chain_graph(), m)


def test_verify_unknown_metric_lookup():
    m = to_matrix(tiered_chain().sample(200, seed=0), CHAIN_SCHEMA)
    report = verify_graph(chain_graph(), m)
    with pytest.raises(KeyError):
        report.entry("C9")
