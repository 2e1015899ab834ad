"""Markdown/CSV rendering and figure output: shape, content, and
byte-level determinism."""

import csv

from promptcausal.analysis import AnalysisConfig, analyze, verify_graph
from promptcausal.dataset import VariableSchema
from promptcausal.graph import CausalGraph, Edge
from promptcausal.intentions import IntentionVector
from promptcausal.optimizer import GenerationStats, SearchTrace
from promptcausal.report import (
    plot_analysis,
    plot_graph,
    plot_trace,
    plot_verification,
    render_analysis_markdown,
    write_trace_csv,
    write_verification_csv,
)
from promptcausal.scm import tiered_chain, to_matrix

CHAIN_SCHEMA = VariableSchema(meta_names=("M",), ling_names=("L1", "L2"), metric_names=("C1",))

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def chain_graph():
    return CausalGraph(
        nodes=("M", "L1", "C1"),
        tiers={"M": "M", "L1": "L", "C1": "C"},
        edges=(Edge("M", "L1", 1.0), Edge("L1", "C1", 2.0)),
    )


def chain_report(n=2000, seed=0):
    m = to_matrix(tiered_chain().sample(n, seed=seed), CHAIN_SCHEMA)
    return analyze(chain_graph(), m, "M"), m


def sample_trace():
    gens = tuple(
        GenerationStats(
            index=k,
            best_vector=IntentionVector((1,) * k + (0,) * (3 - k)),
            best_fitness=float(k),
            mean_fitness=k / 2.0,
        )
        for k in range(1, 4)
    )
    return SearchTrace(generations=gens)


# ---------------------------------------------------------------------------
# Text outputs
# ---------------------------------------------------------------------------


def test_markdown_lists_metric_and_responsible_feature():
    report, _ = chain_report()
    text = render_analysis_markdown([report])
    assert "## Meta variable `M`" in text
    assert "| metric | sign |" in text
    row = next(line for line in text.splitlines() if line.startswith("| C1 |"))
    assert "| + |" in row and "L1 (" in row
    assert "No detectable effect" not in text


def test_markdown_negligible_banner():
    report, m = chain_report(n=500, seed=1)
    quiet = analyze(chain_graph(), m, "M", AnalysisConfig(negligible=100.0))
    text = render_analysis_markdown([quiet])
    assert "No detectable effect" in text


def test_markdown_marks_metrics_without_ancestors():
    # C1 absent from the graph: no linguistic attribution possible
    _, m = chain_report(n=500, seed=2)
    graph = CausalGraph(nodes=("M", "L1"), tiers={"M": "M", "L1": "L"},
                        edges=(Edge("M", "L1"),))
    report = analyze(graph, m, "M")
    text = render_analysis_markdown([report])
    row = next(line for line in text.splitlines() if line.startswith("| C1 |"))
    assert "(none)" in row


def test_verification_csv_round_trip(tmp_path):
    m = to_matrix(tiered_chain(noise_std=0.0).sample(500, seed=0), CHAIN_SCHEMA)
    report = verify_graph(chain_graph(), m)
    path = tmp_path / "verification.csv"
    write_verification_csv(report, path)
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["metric", "r2", "mse", "n_train", "n_test", "predictors"]
    assert rows[1][0] == "C1"
    assert rows[1][1] == "1.000000"  # noiseless chain fits exactly
    assert rows[1][5] == "L1;M"


def test_trace_csv_round_trip(tmp_path):
    path = tmp_path / "trace.csv"
    write_trace_csv(sample_trace(), path)
    with path.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["generation", "best_fitness", "mean_fitness", "best_vector"]
    assert rows[1] == ["1", "1", "0.5", "100"]
    assert rows[3] == ["3", "3", "1.5", "111"]


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------


def test_figures_are_valid_deterministic_pngs(tmp_path):
    # [TRIVIAL] every figure writer produces a PNG; reruns are
    # byte-identical so pipeline artifacts can be content-hashed
    report, m = chain_report(n=500, seed=3)
    verification = verify_graph(chain_graph(), m)
    cases = {
        "graph": lambda p: plot_graph(chain_graph(), p),
        "analysis": lambda p: plot_analysis([report], p),
        "verification": lambda p: plot_verification(verification, p),
        "trace": lambda p: plot_trace(sample_trace(), p, objective="pass_rate"),
    }
    for name, render in cases.items():
        first = tmp_path / f"{name}1.png"
        second = tmp_path / f"{name}2.png"
        render(first)
        render(second)
        data = first.read_bytes()
        assert data.startswith(PNG_MAGIC), name
        assert data == second.read_bytes(), name
        assert b"promptcausal" in data, name  # pinned Software metadata
