"""Stage orchestration: collect, quantify, discover, analyze, optimize.

Stages run sequentially in dependency order; every artifact is written
atomically (temp file + rename) into the output directory, and a manifest
records the config hash plus a content hash per artifact.  Stage outputs
are pure functions of (inputs, config, seed): a rerun with the same config
and seed reproduces every artifact byte for byte, and an interrupted run
resumes by skipping stages whose outputs already exist under the same
config hash.

Record conventions: original problems (``id == origin_id``) carry the human
reference solution in ``solutions`` and are passed through untouched;
rephrased variants reference them via ``origin_id`` and receive generated
solutions.  Features, metrics, and the observation matrix are computed over
variants only.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from promptcausal import __version__
from promptcausal.analysis import (
    AnalysisConfig,
    VerificationConfig,
    analyze,
    verify_graph,
)
from promptcausal.codemetrics.aggregate import METRIC_NAMES, compute_metrics
from promptcausal.config import PipelineConfig, stage_seed
from promptcausal.dataset import (
    ObservationMatrix,
    PromptRecord,
    VariableSchema,
    assemble_matrix,
    drop_uncorrelated,
    load_dataset,
    load_matrix,
    save_dataset,
    save_matrix,
    standardize,
)
from promptcausal.discovery import two_step_discover
from promptcausal.errors import EmptyStratum, SchemaError, StageInputMissing
from promptcausal.graph import CausalGraph
from promptcausal.inference import AteConfig
from promptcausal.intentions import IntentionVector, default_registry, registry_from_ids
from promptcausal.linguistics import default_feature_registry, extract_features, registry_from_names
from promptcausal.optimizer import GaConfig, optimize
from promptcausal.rephrase import (
    AuditLog,
    HttpChatClient,
    MockChatClient,
    RetryPolicy,
    generate_code,
    rephrase_question,
)
from promptcausal.report import (
    plot_analysis,
    plot_graph,
    plot_trace,
    plot_verification,
    render_analysis_markdown,
    write_trace_csv,
    write_verification_csv,
)

logger = logging.getLogger(__name__)

__all__ = [
    "STAGES",
    "ARTIFACTS",
    "run_pipeline",
    "run_stage",
    "load_matrix_with_meta",
    "expand_rephrasings",
    "attach_generations",
    "compute_feature_rows",
    "compute_metric_rows",
    "discover_from_artifacts",
    "analyze_reports",
    "write_discovery_artifacts",
    "write_analysis_artifacts",
    "write_optimize_artifacts",
]

#: Stage name -> (input artifact names, output artifact names).  "<dataset>"
#: stands for the configured input dataset path.
ARTIFACTS: Dict[str, Tuple[Tuple[str, ...], Tuple[str, ...]]] = {
    "ingest": (("<dataset>",), ("dataset.jsonl",)),
    "rephrase": (("dataset.jsonl",), ("rephrased.jsonl", "audit_rephrase.jsonl")),
    "generate": (("rephrased.jsonl",), ("generated.jsonl", "audit_generate.jsonl")),
    "features": (("generated.jsonl",), ("features.csv",)),
    "metrics": (("generated.jsonl",), ("metrics.csv",)),
    "discover": (
        ("generated.jsonl", "features.csv", "metrics.csv"),
        ("matrix.csv", "matrix_meta.json", "graph.json", "graph.dot", "graph.png"),
    ),
    "analyze": (
        ("graph.json", "matrix.csv", "matrix_meta.json"),
        ("analysis.json", "analysis.md", "analysis.png"),
    ),
    "verify": (
        ("graph.json", "matrix.csv", "matrix_meta.json"),
        ("verification.csv", "verification.png"),
    ),
    "optimize": (
        ("graph.json", "matrix.csv", "matrix_meta.json"),
        ("optimize.json", "trace.csv", "optimize.png"),
    ),
}

STAGES = tuple(ARTIFACTS)


# ---------------------------------------------------------------------------
# Small IO helpers
# ---------------------------------------------------------------------------


@contextmanager
def _atomic(path: Path):
    """Yield a temp path; on success rename it over the target."""
    tmp = path.parent / f"{path.stem}.tmp{path.suffix}"
    try:
        yield tmp
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def _atomic_text(path: Path, text: str) -> None:
    with _atomic(path) as tmp:
        tmp.write_text(text, encoding="utf-8")


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_value_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with _atomic(path) as tmp:
        with tmp.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)


def _read_value_csv(path: Path) -> Tuple[List[str], Dict[str, Dict[str, float]]]:
    """Read an id-keyed CSV of floats; returns (column names, id -> row)."""
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[0] != "id":
            raise SchemaError(1, "id", f"{path.name} must start with an 'id' column")
        names = header[1:]
        table: Dict[str, Dict[str, float]] = {}
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(line, "<row>", f"expected {len(header)} cells")
            table[row[0]] = {name: float(v) for name, v in zip(names, row[1:])}
    return names, table


def load_matrix_with_meta(matrix_path: str | Path, meta_path: Optional[str | Path] = None) -> ObservationMatrix:
    """Reload a saved matrix, reattaching scaling/constant metadata."""
    m = load_matrix(matrix_path)
    if meta_path is None or not Path(meta_path).exists():
        return m
    meta = json.loads(Path(meta_path).read_text(encoding="utf-8"))
    scaling = {name: (float(a), float(b)) for name, (a, b) in meta.get("scaling", {}).items()}
    return replace(
        m,
        scaling=scaling,
        constant=frozenset(meta.get("constant", [])),
        n_dropped=int(meta.get("n_dropped", 0)),
    )


def _intention_registry(cfg: PipelineConfig):
    if cfg.intention_ids is not None:
        return registry_from_ids(list(cfg.intention_ids))
    return default_registry()


def _feature_registry(cfg: PipelineConfig):
    if cfg.feature_names is not None:
        return registry_from_names(list(cfg.feature_names))
    return default_feature_registry()


def _client(cfg: PipelineConfig):
    if cfg.mock_llm:
        return MockChatClient(registry=_intention_registry(cfg))
    return HttpChatClient(
        endpoint=cfg.llm.endpoint,
        model=cfg.llm.model,
        api_key_env=cfg.llm.api_key_env,
        max_inflight=cfg.llm.max_inflight,
    )


def _retry_policy(cfg: PipelineConfig) -> RetryPolicy:
    return RetryPolicy(retries=cfg.llm.retries)


# ---------------------------------------------------------------------------
# Record-level operations (shared by pipeline stages and CLI subcommands)
# ---------------------------------------------------------------------------


def _selection_plan(cfg: PipelineConfig, length: int, rng: np.random.Generator) -> List[IntentionVector]:
    """Zero vector (control), all single-intention vectors, and seeded
    random two-bit combinations."""
    plan = [IntentionVector.zeros(length)]
    for i in range(length):
        plan.append(IntentionVector.zeros(length).with_bit(i, 1))
    for _ in range(cfg.random_pairs):
        i, j = rng.choice(length, size=2, replace=False)
        plan.append(IntentionVector.zeros(length).with_bit(int(i), 1).with_bit(int(j), 1))
    return plan


def expand_rephrasings(
    records: Sequence[PromptRecord],
    cfg: PipelineConfig,
    audit: Optional[AuditLog] = None,
) -> List[PromptRecord]:
    """Append rephrased variant records for every original problem.

    Each original gets one variant per selection in the plan (control +
    singles + random pairs), sharing its test cases.  The control variant
    keeps the question verbatim without an LLM call.
    """
    registry = _intention_registry(cfg)
    client = _client(cfg)
    policy = _retry_policy(cfg)
    rng = np.random.default_rng(stage_seed(cfg.seed, "rephrase"))
    result: List[PromptRecord] = list(records)
    for rec in records:
        if not rec.is_original():
            continue
        for k, selection in enumerate(_selection_plan(cfg, len(registry), rng)):
            variant_id = f"{rec.id}-v{k:02d}"
            if any(selection.bits):
                question = rephrase_question(
                    rec.question_text,
                    selection,
                    client,
                    registry=registry,
                    policy=policy,
                    record_id=variant_id,
                    audit=audit,
                )
            else:
                question = rec.question_text
            result.append(
                PromptRecord(
                    id=variant_id,
                    question_text=question,
                    origin_id=rec.id,
                    intention_vector=selection,
                    solutions=(),
                    test_cases=rec.test_cases,
                    difficulty=rec.difficulty,
                )
            )
    return result


def attach_generations(
    records: Sequence[PromptRecord],
    cfg: PipelineConfig,
    audit: Optional[AuditLog] = None,
) -> List[PromptRecord]:
    """Fill each variant record's solutions from the LLM; originals keep
    their reference solutions untouched."""
    client = _client(cfg)
    policy = _retry_policy(cfg)
    result: List[PromptRecord] = []
    for rec in records:
        if rec.is_original():
            result.append(rec)
            continue
        solutions = generate_code(
            rec.question_text,
            client,
            n=cfg.n_solutions,
            max_tokens=cfg.max_tokens,
            policy=policy,
            record_id=rec.id,
            audit=audit,
        )
        result.append(replace(rec, solutions=tuple(solutions)))
    return result


def compute_feature_rows(
    records: Sequence[PromptRecord],
    cfg: PipelineConfig,
    variants_only: bool = True,
) -> Tuple[List[str], List[List[str]]]:
    registry = _feature_registry(cfg)
    header = ["id"] + [spec.name for spec in registry]
    rows = []
    for rec in records:
        if variants_only and rec.is_original():
            continue
        fv = extract_features(rec.question_text, registry)
        rows.append([rec.id] + [repr(float(v)) for v in fv.values])
    return header, rows


def compute_metric_rows(
    records: Sequence[PromptRecord],
    cfg: PipelineConfig,
) -> Tuple[List[str], List[List[str]]]:
    """Metric CSV rows for every variant record, keyed by record id.

    The reference for gold similarity is the first solution of the
    record's origin.  A variant with no solutions yields NaN metrics
    (dropped later at matrix assembly).
    """
    gold_by_id = {r.id: r for r in records if r.is_original()}
    variants = [r for r in records if not r.is_original()]

    def one(rec: PromptRecord) -> List[str]:
        origin = gold_by_id.get(rec.origin_id)
        if origin is None or not origin.solutions:
            raise SchemaError(
                0, "origin_id", f"{rec.id}: origin {rec.origin_id!r} has no reference solution"
            )
        if not rec.solutions:
            return [rec.id] + [repr(math.nan)] * len(METRIC_NAMES)
        mv = compute_metrics(rec, origin.solutions[0], cfg.metrics)
        vals = mv.as_dict()
        return [rec.id] + [repr(float(vals[name])) for name in METRIC_NAMES]

    workers = max(1, cfg.metrics.max_workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(one, variants))
    return ["id"] + list(METRIC_NAMES), rows


def discover_from_artifacts(
    records_path: Path,
    features_path: Path,
    metrics_path: Path,
    cfg: PipelineConfig,
) -> Tuple[ObservationMatrix, CausalGraph]:
    """Assemble, standardize, screen, and learn the graph from artifacts."""
    records = load_dataset(records_path)
    variants = [r for r in records if not r.is_original()]
    feat_names, feat_table = _read_value_csv(features_path)
    metric_names, metric_table = _read_value_csv(metrics_path)
    registry = _intention_registry(cfg)
    schema = VariableSchema(
        meta_names=tuple(it.id for it in registry),
        ling_names=tuple(feat_names),
        metric_names=tuple(metric_names),
    )
    matrix = assemble_matrix(variants, feat_table, metric_table, schema)
    matrix = standardize(matrix)
    matrix = drop_uncorrelated(matrix, alpha=cfg.drop_alpha)
    disc_cfg = replace(cfg.discovery, seed=stage_seed(cfg.seed, "discover"))
    graph = two_step_discover(matrix, disc_cfg)
    graph.topological_order()  # audit: output must be a DAG
    return matrix, graph


def write_discovery_artifacts(matrix: ObservationMatrix, graph: CausalGraph, out: Path) -> None:
    with _atomic(out / "matrix.csv") as tmp:
        save_matrix(matrix, tmp)
    meta = {
        "scaling": {k: list(v) for k, v in (matrix.scaling or {}).items()},
        "constant": sorted(matrix.constant),
        "n_dropped": matrix.n_dropped,
        "n_rows": matrix.n_rows,
    }
    _atomic_text(out / "matrix_meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    _atomic_text(out / "graph.json", json.dumps(graph.to_json_dict(), indent=2) + "\n")
    _atomic_text(out / "graph.dot", graph.to_dot() + "\n")
    with _atomic(out / "graph.png") as tmp:
        plot_graph(graph, tmp)
    logger.info("discover: %d nodes, %d edges", len(graph.nodes), len(graph.edges))


def analyze_reports(
    graph: CausalGraph,
    matrix: ObservationMatrix,
    cfg: PipelineConfig,
    meta_vars: Optional[Sequence[str]] = None,
) -> Tuple[list, list]:
    """Run the effect analysis for each requested meta variable.

    Returns (reports, skipped) where skipped lists variables that were not
    analyzable (absent from the graph or missing a stratum) with reasons.
    """
    ate_cfg = AteConfig(min_n=cfg.ate_min_n, seed=stage_seed(cfg.seed, "ate"))
    a_cfg = AnalysisConfig(negligible=cfg.negligible, ate=ate_cfg)
    targets = list(meta_vars) if meta_vars else list(matrix.schema.meta_names)
    reports = []
    skipped = []
    for meta_var in targets:
        if meta_var not in graph.tiers:
            skipped.append({"meta_var": meta_var, "reason": "not in learned graph"})
            continue
        try:
            reports.append(analyze(graph, matrix, meta_var, a_cfg))
        except EmptyStratum as exc:
            skipped.append({"meta_var": meta_var, "reason": str(exc)})
    return reports, skipped


def write_analysis_artifacts(reports: list, skipped: list, out: Path) -> None:
    payload = {"reports": [r.as_dict() for r in reports], "skipped": skipped}
    _atomic_text(out / "analysis.json", json.dumps(payload, indent=2) + "\n")
    _atomic_text(out / "analysis.md", render_analysis_markdown(reports) + "\n")
    with _atomic(out / "analysis.png") as tmp:
        plot_analysis(reports, tmp)


def write_optimize_artifacts(best, trace, cfg: PipelineConfig, out: Path) -> None:
    registry = _intention_registry(cfg)
    decoded = best.selected_ids(registry)
    surface = [it.surface_text for it in registry if it.id in decoded]
    payload = {
        "objective": cfg.objective,
        "best_vector": best.to_string(),
        "selected_intentions": decoded,
        "selected_texts": surface,
        "best_fitness": trace.generations[-1].best_fitness,
        "generations": len(trace.generations),
    }
    _atomic_text(out / "optimize.json", json.dumps(payload, indent=2) + "\n")
    with _atomic(out / "trace.csv") as tmp:
        write_trace_csv(trace, tmp)
    with _atomic(out / "optimize.png") as tmp:
        plot_trace(trace, tmp, objective=cfg.objective)


# ---------------------------------------------------------------------------
# Stages (fixed artifact names under the output directory)
# ---------------------------------------------------------------------------


def _stage_ingest(cfg: PipelineConfig, out: Path) -> None:
    records = load_dataset(cfg.dataset_path, format="jsonl")
    save_dataset(records, out / "dataset.jsonl", format="jsonl")
    logger.info("ingest: %d records validated", len(records))


def _stage_rephrase(cfg: PipelineConfig, out: Path) -> None:
    records = load_dataset(out / "dataset.jsonl")
    audit_path = out / "audit_rephrase.jsonl"
    audit_path.unlink(missing_ok=True)
    result = expand_rephrasings(records, cfg, audit=AuditLog(audit_path))
    audit_path.touch()
    save_dataset(result, out / "rephrased.jsonl")
    logger.info("rephrase: %d records (%d new variants)", len(result), len(result) - len(records))


def _stage_generate(cfg: PipelineConfig, out: Path) -> None:
    records = load_dataset(out / "rephrased.jsonl")
    audit_path = out / "audit_generate.jsonl"
    audit_path.unlink(missing_ok=True)
    result = attach_generations(records, cfg, audit=AuditLog(audit_path))
    audit_path.touch()
    save_dataset(result, out / "generated.jsonl")


def _stage_features(cfg: PipelineConfig, out: Path) -> None:
    records = load_dataset(out / "generated.jsonl")
    header, rows = compute_feature_rows(records, cfg, variants_only=True)
    _write_value_csv(out / "features.csv", header, rows)


def _stage_metrics(cfg: PipelineConfig, out: Path) -> None:
    records = load_dataset(out / "generated.jsonl")
    header, rows = compute_metric_rows(records, cfg)
    _write_value_csv(out / "metrics.csv", header, rows)


def _stage_discover(cfg: PipelineConfig, out: Path) -> None:
    matrix, graph = discover_from_artifacts(
        out / "generated.jsonl", out / "features.csv", out / "metrics.csv", cfg
    )
    write_discovery_artifacts(matrix, graph, out)


def _load_graph_and_matrix(out: Path) -> Tuple[CausalGraph, ObservationMatrix]:
    graph = CausalGraph.load_json(out / "graph.json")
    matrix = load_matrix_with_meta(out / "matrix.csv", out / "matrix_meta.json")
    return graph, matrix


def _stage_analyze(cfg: PipelineConfig, out: Path) -> None:
    graph, matrix = _load_graph_and_matrix(out)
    reports, skipped = analyze_reports(graph, matrix, cfg)
    write_analysis_artifacts(reports, skipped, out)


def _stage_verify(cfg: PipelineConfig, out: Path) -> None:
    graph, matrix = _load_graph_and_matrix(out)
    v_cfg = VerificationConfig(min_n=cfg.verify_min_n, seed=stage_seed(cfg.seed, "verify"))
    report = verify_graph(graph, matrix, v_cfg)
    with _atomic(out / "verification.csv") as tmp:
        write_verification_csv(report, tmp)
    with _atomic(out / "verification.png") as tmp:
        plot_verification(report, tmp)


def _stage_optimize(cfg: PipelineConfig, out: Path) -> None:
    graph, matrix = _load_graph_and_matrix(out)
    ga = replace(cfg.ga, seed=stage_seed(cfg.seed, "optimize"))
    best, trace = optimize(graph, matrix, cfg.objective, ga=ga, registry=_intention_registry(cfg))
    write_optimize_artifacts(best, trace, cfg, out)


_STAGE_FN = {
    "ingest": _stage_ingest,
    "rephrase": _stage_rephrase,
    "generate": _stage_generate,
    "features": _stage_features,
    "metrics": _stage_metrics,
    "discover": _stage_discover,
    "analyze": _stage_analyze,
    "verify": _stage_verify,
    "optimize": _stage_optimize,
}


# ---------------------------------------------------------------------------
# Orchestration
# ---------------------------------------------------------------------------


def _manifest_path(out: Path) -> Path:
    return out / "manifest.json"


def _load_manifest(out: Path) -> dict:
    path = _manifest_path(out)
    if path.exists():
        return json.loads(path.read_text(encoding="utf-8"))
    return {"version": __version__, "stages": {}}


def _check_inputs(stage: str, cfg: PipelineConfig, out: Path) -> None:
    inputs, _ = ARTIFACTS[stage]
    missing = []
    for name in inputs:
        path = Path(cfg.dataset_path) if name == "<dataset>" else out / name
        if not path.exists():
            missing.append(str(path))
    if missing:
        raise StageInputMissing(stage, missing)


def run_stage(stage: str, cfg: PipelineConfig) -> List[Path]:
    """Run one stage unconditionally; returns the artifact paths written."""
    if stage not in _STAGE_FN:
        raise ValueError(f"unknown stage {stage!r}; expected one of {list(STAGES)}")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    _check_inputs(stage, cfg, out)
    _STAGE_FN[stage](cfg, out)
    return [out / name for name in ARTIFACTS[stage][1]]


def run_pipeline(cfg: PipelineConfig, stages: Optional[Sequence[str]] = None) -> dict:
    """Run the requested stages (default: all) in dependency order.

    A stage is skipped when its outputs already exist and the manifest
    recorded them under the current config hash.  Returns the manifest.
    """
    requested = set(stages) if stages else set(STAGES)
    unknown = requested - set(STAGES)
    if unknown:
        raise ValueError(f"unknown stages: {sorted(unknown)}")
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _load_manifest(out)
    config_hash = cfg.config_hash()
    if manifest.get("config_hash") not in (None, config_hash):
        # Config changed: prior stage records no longer vouch for artifacts.
        manifest["stages"] = {}
    manifest["version"] = __version__
    manifest["config_hash"] = config_hash
    manifest["seed"] = cfg.seed

    for stage in STAGES:
        if stage not in requested:
            continue
        outputs = [out / name for name in ARTIFACTS[stage][1]]
        done = manifest["stages"].get(stage)
        if (
            done
            and done.get("config_hash") == config_hash
            and all(p.exists() for p in outputs)
            and all(done["artifacts"].get(p.name) == _sha256(p) for p in outputs)
        ):
            logger.info("stage %s: up to date, skipped", stage)
            continue
        logger.info("stage %s: running", stage)
        _check_inputs(stage, cfg, out)
        _STAGE_FN[stage](cfg, out)
        manifest["stages"][stage] = {
            "config_hash": config_hash,
            "artifacts": {p.name: _sha256(p) for p in outputs},
        }
        _atomic_text(
            _manifest_path(out), json.dumps(manifest, indent=2, sort_keys=True) + "\n"
        )
    _atomic_text(_manifest_path(out), json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest
