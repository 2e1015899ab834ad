"""Rephrasing intentions and the binary vectors that select them.

An intention is a named clause that can be inserted into the rephrase
meta-prompt. Intentions belong to one of three groups: ``instruction``
(imperative style hints such as "make it short"), ``role`` (a persona
for the rephraser), and ``scenario`` (a setting the question should be
framed in). A selection over the active registry is a fixed-length bit
vector; registry order is frozen for a run, so bit i always refers to
the same intention.
"""

from __future__ import annotations

from dataclasses import dataclass

from promptcausal.errors import LengthMismatch

GROUPS = ("instruction", "role", "scenario")


@dataclass(frozen=True)
class Intention:
    """One selectable rephrasing intention."""

    id: str
    group: str
    surface_text: str

    def __post_init__(self):
        if self.group not in GROUPS:
            raise ValueError(f"unknown intention group {self.group!r}")
        if not self.surface_text:
            raise ValueError(f"intention {self.id!r} has empty surface text")


@dataclass(frozen=True)
class IntentionVector:
    """Ordered selection bits over an intention registry."""

    bits: tuple[int, ...]

    def __post_init__(self):
        if any(b not in (0, 1) for b in self.bits):
            raise ValueError("intention bits must be 0 or 1")

    def __len__(self) -> int:
        return len(self.bits)

    def __iter__(self):
        return iter(self.bits)

    @classmethod
    def zeros(cls, n: int) -> "IntentionVector":
        return cls(bits=(0,) * n)

    @classmethod
    def from_string(cls, s: str) -> "IntentionVector":
        if any(c not in "01" for c in s):
            raise ValueError(f"invalid intention bit string {s!r}")
        return cls(bits=tuple(int(c) for c in s))

    def to_string(self) -> str:
        return "".join(str(b) for b in self.bits)

    def selected_ids(self, registry: list[Intention]) -> list[str]:
        if len(registry) != len(self.bits):
            raise LengthMismatch(
                f"vector length {len(self.bits)} != registry size {len(registry)}"
            )
        return [it.id for it, b in zip(registry, self.bits) if b]

    def with_bit(self, index: int, value: int) -> "IntentionVector":
        bits = list(self.bits)
        bits[index] = value
        return IntentionVector(bits=tuple(bits))


# Default registry: 6 instructions, 3 roles, 3 scenarios. The named
# instructions are the documented ones; the rest fill out the groups
# and can be replaced wholesale through configuration.
DEFAULT_INTENTIONS: tuple[Intention, ...] = (
    Intention("short", "instruction", "make it short"),
    Intention("long", "instruction", "make it long"),
    Intention("formal", "instruction", "make it formal"),
    Intention("fluent", "instruction", "make it fluent"),
    Intention("technical", "instruction", "make it more technical"),
    Intention("simple", "instruction", "make it simple"),
    Intention("student", "role", "as a student"),
    Intention("engineer", "role", "as a software engineer"),
    Intention("teacher", "role", "as a teacher"),
    Intention("competition", "scenario", "in a programming competition"),
    Intention("interview", "scenario", "in a technical interview"),
    Intention("classroom", "scenario", "in a classroom exercise"),
)


def default_registry() -> list[Intention]:
    """Return a fresh copy of the default 12-intention registry."""
    return list(DEFAULT_INTENTIONS)


def registry_from_ids(ids: list[str]) -> list[Intention]:
    """Build a registry as a subset/reordering of the default entries."""
    by_id = {it.id: it for it in DEFAULT_INTENTIONS}
    missing = [i for i in ids if i not in by_id]
    if missing:
        raise ValueError(f"unknown intention ids: {missing}")
    return [by_id[i] for i in ids]


def validate_registry(registry: list[Intention]) -> None:
    ids = [it.id for it in registry]
    if len(set(ids)) != len(ids):
        raise ValueError("intention ids must be unique")
