"""Report rendering: markdown/CSV tables and matplotlib figures.

All outputs are deterministic functions of their inputs (no timestamps, no
environment queries), so pipeline artifacts are byte-identical across
reruns with the same config and seed.
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from promptcausal.analysis import AnalysisReport, VerificationReport
from promptcausal.graph import CausalGraph
from promptcausal.intentions import Intention
from promptcausal.optimizer import SearchTrace

__all__ = [
    "render_analysis_markdown",
    "write_verification_csv",
    "write_trace_csv",
    "plot_graph",
    "plot_analysis",
    "plot_verification",
    "plot_trace",
]

_PNG_METADATA = {"Software": "promptcausal"}


def render_analysis_markdown(reports: Sequence[AnalysisReport]) -> str:
    """One table per meta variable: affected metrics with the two
    primarily responsible linguistic features."""
    lines: List[str] = ["# Prompt-effect analysis", ""]
    for report in reports:
        lines.append(f"## Meta variable `{report.meta_var}`")
        if report.negligible:
            lines.append("")
            lines.append("_No detectable effect: all |ATE| below the negligible threshold._")
        lines.append("")
        lines.append("| metric | sign | ATE | responsible feature 1 | responsible feature 2 |")
        lines.append("|---|---|---|---|---|")
        for metric in report.top_metrics:
            exp = report.explanations[metric]
            ate = exp.meta_effect.point
            sign = "+" if ate >= 0 else "-"
            primaries = [fa for fa in exp.features if fa.primary]
            cells = []
            for k in range(2):
                if k < len(primaries):
                    fa = primaries[k]
                    cells.append(f"{fa.feature} ({fa.estimate.point:+.4f})")
                else:
                    cells.append("(none)" if exp.no_ancestors else "")
            lines.append(
                f"| {metric} | {sign} | {ate:+.4f} | {cells[0]} | {cells[1]} |"
            )
        lines.append("")
    return "\n".join(lines)


def write_verification_csv(report: VerificationReport, path: str | Path) -> None:
    """Per-metric predictive scores: metric, r2, mse, predictors."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "r2", "mse", "n_train", "n_test", "predictors"])
        for e in report.entries:
            writer.writerow(
                [
                    e.metric,
                    f"{e.r2:.6f}",
                    f"{e.mse:.6e}",
                    e.n_train,
                    e.n_test,
                    ";".join(e.predictors),
                ]
            )


def write_trace_csv(trace: SearchTrace, path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["generation", "best_fitness", "mean_fitness", "best_vector"])
        for g in trace.generations:
            writer.writerow(
                [g.index, f"{g.best_fitness:.10g}", f"{g.mean_fitness:.10g}", g.best_vector.to_string()]
            )


# ---------------------------------------------------------------------------
# Figures
# ---------------------------------------------------------------------------


def _tiered_layout(graph: CausalGraph) -> Dict[str, tuple]:
    columns = {"M": 0.0, "L": 1.0, "C": 2.0}
    positions: Dict[str, tuple] = {}
    for tier in ("M", "L", "C"):
        nodes = graph.nodes_in_tier(tier)
        count = max(len(nodes), 1)
        for i, node in enumerate(nodes):
            y = 1.0 - (i + 0.5) / count
            positions[node] = (columns[tier], y)
    return positions


def plot_graph(graph: CausalGraph, path: str | Path) -> None:
    """Tiered left-to-right drawing: M, L, C columns with weighted arrows."""
    positions = _tiered_layout(graph)
    height = max(4.0, 0.28 * max(
        (len(graph.nodes_in_tier(t)) for t in ("M", "L", "C")), default=1
    ))
    fig, ax = plt.subplots(figsize=(10, height))
    shade = {"M": "#aecbfa", "L": "#fde293", "C": "#f8b9c4"}
    for edge in graph.edges:
        x0, y0 = positions[edge.src]
        x1, y1 = positions[edge.dst]
        ax.annotate(
            "",
            xy=(x1, y1),
            xytext=(x0, y0),
            arrowprops=dict(
                arrowstyle="-|>",
                color="gray",
                alpha=0.7,
                lw=0.8 + 1.5 * min(abs(edge.weight), 2.0),
            ),
        )
    for node, (x, y) in positions.items():
        ax.scatter([x], [y], s=260, color=shade[graph.tiers[node]], zorder=3, edgecolors="k", linewidths=0.4)
        ax.annotate(node, (x, y), fontsize=6, ha="center", va="center", zorder=4)
    ax.set_xticks([0, 1, 2])
    ax.set_xticklabels(["meta-prompt (M)", "linguistic (L)", "code metric (C)"])
    ax.set_yticks([])
    ax.set_xlim(-0.4, 2.4)
    ax.set_title(f"Learned causal graph: {len(graph.nodes)} nodes, {len(graph.edges)} edges")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def plot_analysis(reports: Sequence[AnalysisReport], path: str | Path) -> None:
    """Horizontal bars of metric-level effects, one panel per meta variable."""
    n = max(len(reports), 1)
    fig, axes = plt.subplots(n, 1, figsize=(8, 2.2 * n), squeeze=False)
    for ax, report in zip(axes.ravel(), reports):
        metrics = [m for m, _ in report.ranked_metrics]
        values = [a for _, a in report.ranked_metrics]
        colors = ["#d62728" if v < 0 else "#2ca02c" for v in values]
        ax.barh(metrics[::-1], values[::-1], color=colors[::-1])
        ax.axvline(0.0, color="k", lw=0.8)
        ax.set_title(f"ATE of {report.meta_var} on code metrics", fontsize=9)
        ax.tick_params(labelsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def plot_verification(report: VerificationReport, path: str | Path) -> None:
    fig, ax = plt.subplots(figsize=(8, 3.2))
    metrics = [e.metric for e in report.entries]
    scores = [e.r2 for e in report.entries]
    ax.bar(metrics, scores, color="#4c72b0")
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_ylabel("out-of-sample $R^2$")
    ax.set_title("Predictive verification of the learned graph")
    ax.tick_params(axis="x", rotation=45, labelsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)


def plot_trace(trace: SearchTrace, path: str | Path, objective: str = "") -> None:
    fig, ax = plt.subplots(figsize=(7, 3.2))
    gens = [g.index for g in trace.generations]
    ax.plot(gens, [g.best_fitness for g in trace.generations], label="best", marker="o", ms=3)
    ax.plot(gens, [g.mean_fitness for g in trace.generations], label="population mean", ls="--")
    ax.set_xlabel("generation")
    ax.set_ylabel("fitness")
    title = "Intention search"
    if objective:
        title += f" (objective: {objective})"
    ax.set_title(title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_PNG_METADATA)
    plt.close(fig)
