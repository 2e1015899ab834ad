"""Exception hierarchy shared across the package.

Exit-code policy for the CLI: usage errors map to 1, data errors
(schema, alignment, missing inputs) to 2, and stage/runtime failures
to 3. Every exception below derives from :class:`PromptCausalError`
so callers can catch the whole family at once.
"""

from __future__ import annotations


class PromptCausalError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(PromptCausalError):
    """A record failed validation while loading a dataset."""

    def __init__(self, line: int, field: str, message: str = ""):
        self.line = line
        self.field = field
        detail = f": {message}" if message else ""
        super().__init__(f"line {line}: invalid field {field!r}{detail}")


class AlignmentError(PromptCausalError):
    """Feature/metric vectors could not be aligned with a record id."""

    def __init__(self, record_id: str, what: str = "features"):
        self.record_id = record_id
        super().__init__(f"no {what} for record {record_id!r}")


class EmptyMatrixError(PromptCausalError):
    """Matrix assembly produced zero usable rows."""


class SandboxError(PromptCausalError):
    """The execution harness itself failed (e.g. interpreter missing)."""


class TooFewSolutions(PromptCausalError):
    """Mutual similarity needs at least two solutions."""


class LengthMismatch(PromptCausalError):
    """Two bit vectors (or a vector and registry) differ in length."""


class TransportError(PromptCausalError):
    """LLM request failed after exhausting the retry policy."""


class EmptyResponse(PromptCausalError):
    """LLM returned no usable text."""


class CycleAfterPrune(PromptCausalError):
    """Pruned edge set contains a cycle; indicates an internal error."""


class UnknownNode(PromptCausalError):
    """A queried node is not part of the graph."""

    def __init__(self, node: str):
        self.node = node
        super().__init__(f"unknown node {node!r}")


class OverlappingSets(PromptCausalError):
    """d-separation query sets must be disjoint."""


class UnknownMetric(PromptCausalError):
    """Objective metric is not a metric-tier node of the graph."""


class InsufficientData(PromptCausalError):
    """Not enough rows for a statistically meaningful estimate."""


class NotIdentifiable(PromptCausalError):
    """Treatment is a descendant of the outcome; effect not identifiable."""


class EmptyStratum(PromptCausalError):
    """A conditional mean was requested over an empty stratum."""


class StageInputMissing(PromptCausalError):
    """A pipeline stage was requested without its input artifacts."""

    def __init__(self, stage: str, missing: str):
        self.stage = stage
        self.missing = missing
        super().__init__(f"stage {stage!r} requires missing input {missing!r}")
