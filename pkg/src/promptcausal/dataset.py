"""Data model, file formats, and matrix assembly.

Records live in JSONL (one object per line); the observation matrix is
CSV with a ``name:tier`` header per column. Matrix columns follow the
fixed tier order meta-prompt (M) < linguistic (L) < code metric (C).
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from promptcausal.errors import (
    AlignmentError,
    EmptyMatrixError,
    InsufficientData,
    SchemaError,
)
from promptcausal.intentions import IntentionVector

TIERS = ("M", "L", "C")

_CONST_TOL = 1e-12


@dataclass(frozen=True)
class TestCase:
    stdin: str
    expected_stdout: str


@dataclass(frozen=True)
class PromptRecord:
    """One programming question with provenance, solutions, and tests."""

    id: str
    question_text: str
    origin_id: str
    intention_vector: IntentionVector
    solutions: tuple[str, ...] = ()
    test_cases: tuple[TestCase, ...] = ()
    difficulty: str | None = None

    def is_original(self) -> bool:
        return self.origin_id == self.id


@dataclass(frozen=True)
class VariableSchema:
    """Ordered variable names for the three tiers."""

    meta_names: tuple[str, ...]
    ling_names: tuple[str, ...]
    metric_names: tuple[str, ...]

    def __post_init__(self):
        names = self.all_names()
        if len(set(names)) != len(names):
            raise ValueError("variable names must be unique across tiers")

    def all_names(self) -> tuple[str, ...]:
        return self.meta_names + self.ling_names + self.metric_names

    def tier_of(self, name: str) -> str:
        if name in self.meta_names:
            return "M"
        if name in self.ling_names:
            return "L"
        if name in self.metric_names:
            return "C"
        raise KeyError(name)

    def size(self) -> int:
        return len(self.all_names())


@dataclass(frozen=True)
class ObservationMatrix:
    """n x (|M|+|L|+|C|) real matrix with column metadata.

    ``scaling`` maps a column name to the (mean, stddev) removed by
    :func:`standardize`; ``constant`` lists columns flagged constant
    (kept in the data, excluded from discovery); ``n_dropped`` counts
    rows removed during assembly for non-finite metrics.
    """

    schema: VariableSchema
    values: np.ndarray
    scaling: Mapping[str, tuple[float, float]] | None = None
    constant: frozenset[str] = frozenset()
    n_dropped: int = 0

    def __post_init__(self):
        if self.values.ndim != 2 or self.values.shape[1] != self.schema.size():
            raise ValueError(
                f"matrix shape {self.values.shape} does not match schema size {self.schema.size()}"
            )

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def column_index(self, name: str) -> int:
        try:
            return self.schema.all_names().index(name)
        except ValueError:
            raise KeyError(name) from None

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.column_index(name)]

    def active_names(self) -> tuple[str, ...]:
        """Columns that participate in discovery (non-constant)."""
        return tuple(n for n in self.schema.all_names() if n not in self.constant)


# ---------------------------------------------------------------------------
# Record IO
# ---------------------------------------------------------------------------

_RECORD_FIELDS = ("id", "question_text", "origin_id", "intention_vector", "solutions", "test_cases", "difficulty")


def _record_from_obj(obj: dict, line: int) -> PromptRecord:
    if not isinstance(obj, dict):
        raise SchemaError(line, "<record>", "expected a JSON object")

    def need(fieldname: str, types) -> object:
        if fieldname not in obj:
            raise SchemaError(line, fieldname, "missing")
        value = obj[fieldname]
        if not isinstance(value, types):
            raise SchemaError(line, fieldname, f"expected {types}")
        return value

    rid = need("id", str)
    if not rid:
        raise SchemaError(line, "id", "must be non-empty")
    question = need("question_text", str)
    origin = obj.get("origin_id", rid)
    if not isinstance(origin, str) or not origin:
        raise SchemaError(line, "origin_id", "must be a non-empty string")
    ivec_raw = need("intention_vector", str)
    try:
        ivec = IntentionVector.from_string(ivec_raw)
    except ValueError as exc:
        raise SchemaError(line, "intention_vector", str(exc)) from exc

    solutions_raw = obj.get("solutions", [])
    if not isinstance(solutions_raw, list) or any(not isinstance(s, str) for s in solutions_raw):
        raise SchemaError(line, "solutions", "must be a list of strings")

    tests_raw = obj.get("test_cases", [])
    if not isinstance(tests_raw, list):
        raise SchemaError(line, "test_cases", "must be a list")
    tests = []
    for tc in tests_raw:
        if not isinstance(tc, dict) or "stdin" not in tc or "expected_stdout" not in tc:
            raise SchemaError(line, "test_cases", "each test needs stdin and expected_stdout")
        if not isinstance(tc["stdin"], str) or not isinstance(tc["expected_stdout"], str):
            raise SchemaError(line, "test_cases", "stdin/expected_stdout must be strings")
        tests.append(TestCase(stdin=tc["stdin"], expected_stdout=tc["expected_stdout"]))

    difficulty = obj.get("difficulty")
    if difficulty is not None and not isinstance(difficulty, str):
        raise SchemaError(line, "difficulty", "must be a string when present")

    return PromptRecord(
        id=rid,
        question_text=question,
        origin_id=origin,
        intention_vector=ivec,
        solutions=tuple(solutions_raw),
        test_cases=tuple(tests),
        difficulty=difficulty,
    )


def _record_to_obj(rec: PromptRecord) -> dict:
    obj = {
        "id": rec.id,
        "question_text": rec.question_text,
        "origin_id": rec.origin_id,
        "intention_vector": rec.intention_vector.to_string(),
        "solutions": list(rec.solutions),
        "test_cases": [
            {"stdin": tc.stdin, "expected_stdout": tc.expected_stdout} for tc in rec.test_cases
        ],
    }
    if rec.difficulty is not None:
        obj["difficulty"] = rec.difficulty
    return obj


def _check_origins(records: list[PromptRecord], lines: list[int]) -> None:
    ids = {r.id for r in records}
    for rec, line in zip(records, lines):
        if rec.origin_id not in ids:
            raise SchemaError(line, "origin_id", f"refers to unknown record {rec.origin_id!r}")


def load_dataset(path: str | Path, format: str = "jsonl") -> list[PromptRecord]:
    """Load and validate all records; reject the whole file on any error."""
    path = Path(path)
    if format not in ("jsonl", "csv"):
        raise ValueError(f"unsupported dataset format {format!r}")
    text = path.read_text(encoding="utf-8")
    records: list[PromptRecord] = []
    lines: list[int] = []
    if format == "jsonl":
        for i, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise SchemaError(i, "<json>", str(exc)) from exc
            records.append(_record_from_obj(obj, i))
            lines.append(i)
    else:
        reader = csv.DictReader(io.StringIO(text))
        for i, row in enumerate(reader, start=2):  # header is line 1
            obj = {k: v for k, v in row.items() if v not in (None, "")}
            for json_field in ("solutions", "test_cases"):
                if json_field in obj:
                    try:
                        obj[json_field] = json.loads(obj[json_field])
                    except json.JSONDecodeError as exc:
                        raise SchemaError(i, json_field, "invalid JSON cell") from exc
            records.append(_record_from_obj(obj, i))
            lines.append(i)
    _check_origins(records, lines)
    return records


def save_dataset(records: Sequence[PromptRecord], path: str | Path, format: str = "jsonl") -> None:
    path = Path(path)
    if format == "jsonl":
        with path.open("w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(_record_to_obj(rec), ensure_ascii=False) + "\n")
        return
    if format == "csv":
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=_RECORD_FIELDS)
            writer.writeheader()
            for rec in records:
                obj = _record_to_obj(rec)
                obj["solutions"] = json.dumps(obj["solutions"], ensure_ascii=False)
                obj["test_cases"] = json.dumps(obj["test_cases"], ensure_ascii=False)
                obj.setdefault("difficulty", "")
                writer.writerow(obj)
        return
    raise ValueError(f"unsupported dataset format {format!r}")


# ---------------------------------------------------------------------------
# Matrix assembly
# ---------------------------------------------------------------------------


def assemble_matrix(
    records: Sequence[PromptRecord],
    features: Mapping[str, object],
    metrics: Mapping[str, object],
    schema: VariableSchema,
) -> ObservationMatrix:
    """One row per record, columns in schema tier order.

    ``features``/``metrics`` map record id to a FeatureVector /
    CodeMetricVector (anything with ``as_dict``) or a plain mapping.
    Rows with a non-finite metric value are dropped and counted.
    """
    rows: list[list[float]] = []
    dropped = 0
    for rec in records:
        if rec.id not in features:
            raise AlignmentError(rec.id, "features")
        if rec.id not in metrics:
            raise AlignmentError(rec.id, "metrics")
        fvals = _as_mapping(features[rec.id])
        mvals = _as_mapping(metrics[rec.id])

        bits = rec.intention_vector.bits
        if len(bits) != len(schema.meta_names):
            raise AlignmentError(rec.id, f"intention vector of length {len(schema.meta_names)}")
        row = [float(b) for b in bits]
        for name in schema.ling_names:
            if name not in fvals:
                raise AlignmentError(rec.id, f"feature {name!r}")
            row.append(float(fvals[name]))
        metric_part = []
        for name in schema.metric_names:
            if name not in mvals:
                raise AlignmentError(rec.id, f"metric {name!r}")
            metric_part.append(float(mvals[name]))
        if any(not math.isfinite(v) for v in metric_part):
            dropped += 1
            continue
        rows.append(row + metric_part)
    if not rows:
        raise EmptyMatrixError("no usable rows after dropping non-finite metrics")
    values = np.asarray(rows, dtype=float)
    meta_block = values[:, : len(schema.meta_names)]
    if not np.isin(meta_block, (0.0, 1.0)).all():
        raise ValueError("meta-prompt columns must be binary")
    return ObservationMatrix(schema=schema, values=values, n_dropped=dropped)


def _as_mapping(obj: object) -> Mapping[str, float]:
    if hasattr(obj, "as_dict"):
        return obj.as_dict()  # type: ignore[attr-defined]
    if isinstance(obj, Mapping):
        return obj
    raise TypeError(f"expected a mapping or an object with as_dict(), got {type(obj)!r}")


def standardize(m: ObservationMatrix) -> ObservationMatrix:
    """Z-score linguistic and metric columns; meta columns stay binary.

    Columns with (near-)zero variance are flagged constant and left
    unscaled; scaling parameters are recorded per column so
    :func:`destandardize` can invert the transform exactly.
    """
    values = m.values.copy()
    scaling: dict[str, tuple[float, float]] = {}
    constant: set[str] = set(m.constant)
    for name in m.schema.all_names():
        tier = m.schema.tier_of(name)
        idx = m.column_index(name)
        col = values[:, idx]
        if tier == "M":
            if np.ptp(col) < _CONST_TOL:
                constant.add(name)
            continue
        mean = float(col.mean())
        std = float(col.std(ddof=0))
        if std <= _CONST_TOL:
            constant.add(name)
            continue
        values[:, idx] = (col - mean) / std
        scaling[name] = (mean, std)
    return replace(m, values=values, scaling=scaling, constant=frozenset(constant))


def destandardize(m: ObservationMatrix) -> ObservationMatrix:
    """Invert :func:`standardize` using the stored per-column params."""
    if m.scaling is None:
        return m
    values = m.values.copy()
    for name, (mean, std) in m.scaling.items():
        idx = m.column_index(name)
        values[:, idx] = values[:, idx] * std + mean
    return replace(m, values=values, scaling=None)


def drop_uncorrelated(m: ObservationMatrix, alpha: float = 0.05) -> ObservationMatrix:
    """Remove linguistic columns uncorrelated with every meta and metric column.

    A column survives when any Pearson correlation against a meta or
    metric column is significant at level ``alpha`` (two-sided t-test).
    Meta and metric columns are never removed.
    """
    if m.n_rows < 10:
        raise InsufficientData(f"need at least 10 rows, got {m.n_rows}")
    targets = [n for n in m.schema.meta_names + m.schema.metric_names]
    kept_ling: list[str] = []
    for name in m.schema.ling_names:
        if name in m.constant:
            kept_ling.append(name)  # handled by the constant flag downstream
            continue
        col = m.column(name)
        significant = False
        for other in targets:
            ocol = m.column(other)
            if np.ptp(ocol) < _CONST_TOL or np.ptp(col) < _CONST_TOL:
                continue
            p = stats.pearsonr(col, ocol).pvalue
            if math.isfinite(p) and p < alpha:
                significant = True
                break
        if significant:
            kept_ling.append(name)
    return _select_columns(m, m.schema.meta_names, tuple(kept_ling), m.schema.metric_names)


def _select_columns(
    m: ObservationMatrix,
    meta: tuple[str, ...],
    ling: tuple[str, ...],
    metric: tuple[str, ...],
) -> ObservationMatrix:
    schema = VariableSchema(meta_names=meta, ling_names=ling, metric_names=metric)
    idx = [m.column_index(n) for n in schema.all_names()]
    scaling = None
    if m.scaling is not None:
        scaling = {n: m.scaling[n] for n in schema.all_names() if n in m.scaling}
    constant = frozenset(n for n in m.constant if n in schema.all_names())
    return ObservationMatrix(
        schema=schema,
        values=m.values[:, idx].copy(),
        scaling=scaling,
        constant=constant,
        n_dropped=m.n_dropped,
    )


# ---------------------------------------------------------------------------
# Matrix CSV IO (header: "name:tier" per column)
# ---------------------------------------------------------------------------


def save_matrix(m: ObservationMatrix, path: str | Path) -> None:
    path = Path(path)
    header = [f"{n}:{m.schema.tier_of(n)}" for n in m.schema.all_names()]
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in m.values:
            writer.writerow([repr(float(v)) for v in row])


def load_matrix(path: str | Path) -> ObservationMatrix:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyMatrixError(f"{path} is empty") from None
        names: dict[str, list[str]] = {"M": [], "L": [], "C": []}
        order: list[str] = []
        for cell in header:
            name, _, tier = cell.rpartition(":")
            if tier not in TIERS or not name:
                raise SchemaError(1, cell, "matrix header cells must be name:tier")
            names[tier].append(name)
            order.append(name)
        schema = VariableSchema(
            meta_names=tuple(names["M"]),
            ling_names=tuple(names["L"]),
            metric_names=tuple(names["C"]),
        )
        if list(schema.all_names()) != order:
            raise SchemaError(1, "<header>", "columns must be grouped in tier order M, L, C")
        rows = [[float(v) for v in row] for row in reader if row]
    if not rows:
        raise EmptyMatrixError(f"{path} has a header but no rows")
    return ObservationMatrix(schema=schema, values=np.asarray(rows, dtype=float))
