"""Command-line entry point: one subcommand per stage plus ``pipeline``.

Exit codes: 0 success, 1 usage error, 2 data error (malformed or
insufficient input), 3 stage failure (missing stage inputs, sandbox or
transport problems).  Configuration comes from an optional JSON file
(``--config``) with individual flags taking precedence.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import List, Optional, Sequence

from promptcausal.config import PipelineConfig, load_config, stage_seed
from promptcausal.errors import (
    AlignmentError,
    CycleAfterPrune,
    EmptyMatrixError,
    EmptyResponse,
    EmptyStratum,
    InsufficientData,
    LengthMismatch,
    NotIdentifiable,
    OverlappingSets,
    SandboxError,
    SchemaError,
    StageInputMissing,
    TooFewSolutions,
    TransportError,
    UnknownMetric,
    UnknownNode,
)
from promptcausal.graph import CausalGraph
from promptcausal.inference import AteConfig, estimate_ate
from promptcausal.linguistics import (
    default_feature_registry,
    list_features,
    registry_from_names,
)
from promptcausal.pipeline import STAGES, load_matrix_with_meta, run_pipeline, run_stage

__all__ = ["main"]

#: Problems with the data itself (exit 2): malformed records, graphs or
#: matrices that cannot support the requested computation.
DATA_ERRORS = (
    SchemaError,
    AlignmentError,
    EmptyMatrixError,
    TooFewSolutions,
    LengthMismatch,
    UnknownNode,
    UnknownMetric,
    OverlappingSets,
    InsufficientData,
    NotIdentifiable,
    EmptyStratum,
    FileNotFoundError,
)

#: Problems running a stage (exit 3): unmet stage dependencies and
#: environment failures.
STAGE_ERRORS = (
    StageInputMissing,
    SandboxError,
    TransportError,
    EmptyResponse,
    CycleAfterPrune,
)


class UsageError(Exception):
    """Raised instead of argparse's default exit so usage maps to code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="FILE", help="JSON config file")
    parser.add_argument("--output-dir", metavar="DIR", help="artifact directory")
    parser.add_argument("--seed", type=int, help="run seed (propagates to every stage)")
    parser.add_argument(
        "--mock-llm",
        action=argparse.BooleanOptionalAction,
        default=None,
        help="use the deterministic offline chat client",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="verbose logging")


#: argparse destination -> PipelineConfig override key (dotted = nested).
_OVERRIDE_KEYS = {
    "output_dir": "output_dir",
    "dataset": "dataset_path",
    "seed": "seed",
    "mock_llm": "mock_llm",
    "objective": "objective",
    "negligible": "negligible",
    "drop_alpha": "drop_alpha",
    "n_solutions": "n_solutions",
    "max_tokens": "max_tokens",
    "random_pairs": "random_pairs",
    "verify_min_n": "verify_min_n",
    "ate_min_n": "ate_min_n",
    "lambda_l1": "discovery.lambda_l1",
    "edge_threshold": "discovery.edge_threshold",
    "max_iters": "discovery.max_outer_iters",
    "timeout_s": "metrics.timeout_s",
    "memory_mb": "metrics.memory_mb",
    "max_workers": "metrics.max_workers",
    "population": "ga.population",
    "generations": "ga.generations",
    "survivors": "ga.survivors",
    "mutation_rate": "ga.mutation_rate",
}


def _config_from(args: argparse.Namespace) -> PipelineConfig:
    overrides = {}
    for dest, key in _OVERRIDE_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            overrides[key] = value
    try:
        return load_config(getattr(args, "config", None), overrides)
    except (ValueError, TypeError, OSError) as exc:
        raise UsageError(f"bad configuration: {exc}") from exc


def _require_dataset(cfg: PipelineConfig) -> None:
    if not cfg.dataset_path:
        raise UsageError("a dataset is required (--dataset or dataset_path in the config)")


def _print_artifacts(paths: Sequence[Path]) -> None:
    for path in paths:
        print(f"wrote {path}")


def _cmd_stage(stage: str):
    def run(args: argparse.Namespace) -> int:
        cfg = _config_from(args)
        if stage == "ingest":
            _require_dataset(cfg)
        _print_artifacts(run_stage(stage, cfg))
        return 0

    return run


def _cmd_features(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    if args.list:
        registry = (
            registry_from_names(cfg.feature_names)
            if cfg.feature_names
            else default_feature_registry()
        )
        for name, family, description in list_features(registry):
            print(f"{name}\t{family}\t{description}")
        return 0
    _print_artifacts(run_stage("features", cfg))
    return 0


def _cmd_ate(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    out = Path(cfg.output_dir)
    graph = CausalGraph.load_json(out / "graph.json")
    matrix = load_matrix_with_meta(out / "matrix.csv", out / "matrix_meta.json")
    ate_cfg = AteConfig(min_n=cfg.ate_min_n, seed=stage_seed(cfg.seed, "ate"))
    estimate = estimate_ate(
        matrix, graph, args.treatment, args.outcome, x1=args.x1, x0=args.x0, config=ate_cfg
    )
    print(json.dumps(estimate.as_dict(), indent=2, sort_keys=True))
    return 0


def _cmd_pipeline(args: argparse.Namespace) -> int:
    cfg = _config_from(args)
    stages: Optional[List[str]] = None
    if args.stages:
        stages = [s.strip() for s in args.stages.split(",") if s.strip()]
        unknown = [s for s in stages if s not in STAGES]
        if unknown:
            raise UsageError(f"unknown stages: {unknown}; expected a subset of {list(STAGES)}")
    if stages is None or "ingest" in stages:
        _require_dataset(cfg)
    manifest = run_pipeline(cfg, stages)
    for stage in STAGES:
        if stage in manifest["stages"]:
            print(f"{stage}: ok")
    print(f"manifest: {Path(cfg.output_dir) / 'manifest.json'}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(
        prog="promptcausal",
        description=(
            "Quantify code-generation prompts, learn a tiered causal graph over "
            "prompt features and code quality metrics, estimate effects, and "
            "search prompt intentions."
        ),
    )
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("ingest", help="validate a problem dataset and copy it into the run")
    _add_common(p)
    p.add_argument("--dataset", metavar="FILE", help="problem dataset (JSON lines)")
    p.set_defaults(func=_cmd_stage("ingest"))

    p = sub.add_parser("features", help="extract linguistic features from variant questions")
    _add_common(p)
    p.add_argument("--list", action="store_true", help="list the feature registry and exit")
    p.set_defaults(func=_cmd_features)

    p = sub.add_parser("rephrase", help="rewrite each question once per intention selection")
    _add_common(p)
    p.add_argument("--random-pairs", dest="random_pairs", type=int, metavar="N",
                   help="extra random two-intention selections per problem")
    p.set_defaults(func=_cmd_stage("rephrase"))

    p = sub.add_parser("generate", help="generate candidate solutions for each variant")
    _add_common(p)
    p.add_argument("--n-solutions", dest="n_solutions", type=int, metavar="N")
    p.add_argument("--max-tokens", dest="max_tokens", type=int, metavar="N")
    p.set_defaults(func=_cmd_stage("generate"))

    p = sub.add_parser("metrics", help="run tests and score generated solutions")
    _add_common(p)
    p.add_argument("--timeout-s", dest="timeout_s", type=float, metavar="SEC")
    p.add_argument("--memory-mb", dest="memory_mb", type=int, metavar="MB")
    p.add_argument("--max-workers", dest="max_workers", type=int, metavar="N")
    p.set_defaults(func=_cmd_stage("metrics"))

    p = sub.add_parser("discover", help="learn the tiered causal graph from the matrix")
    _add_common(p)
    p.add_argument("--lambda-l1", dest="lambda_l1", type=float, metavar="X",
                   help="L1 penalty on edge weights")
    p.add_argument("--edge-threshold", dest="edge_threshold", type=float, metavar="X",
                   help="absolute weight below which edges are pruned")
    p.add_argument("--max-iters", dest="max_iters", type=int, metavar="N",
                   help="outer augmented-Lagrangian iterations")
    p.add_argument("--drop-alpha", dest="drop_alpha", type=float, metavar="X",
                   help="significance level for the correlation screen")
    p.set_defaults(func=_cmd_stage("discover"))

    p = sub.add_parser("ate", help="estimate one average treatment effect from the graph")
    _add_common(p)
    p.add_argument("--treatment", required=True, metavar="VAR")
    p.add_argument("--outcome", required=True, metavar="VAR")
    p.add_argument("--x1", type=float, default=1.0, metavar="X",
                   help="treatment value (default 1)")
    p.add_argument("--x0", type=float, default=0.0, metavar="X",
                   help="baseline value (default 0)")
    p.add_argument("--min-n", dest="ate_min_n", type=int, metavar="N")
    p.set_defaults(func=_cmd_ate)

    p = sub.add_parser("analyze", help="rank metric effects per intention with explanations")
    _add_common(p)
    p.add_argument("--negligible", type=float, metavar="X",
                   help="|effect| below which results are flagged negligible")
    p.add_argument("--min-n", dest="ate_min_n", type=int, metavar="N")
    p.set_defaults(func=_cmd_stage("analyze"))

    p = sub.add_parser("verify", help="score the graph's predictive fit per metric")
    _add_common(p)
    p.add_argument("--min-n", dest="verify_min_n", type=int, metavar="N")
    p.set_defaults(func=_cmd_stage("verify"))

    p = sub.add_parser("optimize", help="search intention selections against the surrogate")
    _add_common(p)
    p.add_argument("--objective", metavar="METRIC", help="code metric to optimize")
    p.add_argument("--population", type=int, metavar="N")
    p.add_argument("--generations", type=int, metavar="N")
    p.add_argument("--survivors", type=int, metavar="N")
    p.add_argument("--mutation-rate", dest="mutation_rate", type=float, metavar="X")
    p.set_defaults(func=_cmd_stage("optimize"))

    p = sub.add_parser("pipeline", help="run all stages (or a subset) in dependency order")
    _add_common(p)
    p.add_argument("--dataset", metavar="FILE", help="problem dataset (JSON lines)")
    p.add_argument("--stages", metavar="S1,S2,...",
                   help=f"comma-separated subset of: {','.join(STAGES)}")
    p.set_defaults(func=_cmd_pipeline)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if not exc.code else 1
    if getattr(args, "command", None) is None:
        parser.print_usage(sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"promptcausal: error: {exc}", file=sys.stderr)
        return 1
    except STAGE_ERRORS as exc:
        print(f"promptcausal: stage failure: {exc}", file=sys.stderr)
        return 3
    except DATA_ERRORS as exc:
        print(f"promptcausal: data error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
