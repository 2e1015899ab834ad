"""A small, frozen subset of PEP 8 style checks.

The point is not full lint coverage but a deterministic count of obvious
formatting lapses, comparable across generated programs.  Six rules:

==================  ====================================================
rule id             fires when
==================  ====================================================
line-length         a physical line exceeds 79 characters
tab-indent          leading whitespace contains a tab
trailing-space      a line ends with spaces or tabs
blank-lines         a top-level def/class lacks two preceding blank lines
op-spacing          a top-level ``=`` is missing a space on either side
comma-spacing       a comma is not followed by whitespace or a closer
==================  ====================================================

The two token-level rules are skipped when the source cannot be tokenised.
"""

from __future__ import annotations

import io
import tokenize
from dataclasses import dataclass
from typing import List

__all__ = ["StyleViolation", "style_report", "style_violations"]

MAX_LINE_LENGTH = 79


@dataclass(frozen=True)
class StyleViolation:
    rule: str
    line: int


def _line_rules(source: str) -> List[StyleViolation]:
    found = []
    lines = source.splitlines()
    blank_run = 0
    seen_code = False
    prev_is_decorator = False
    for lineno, line in enumerate(lines, start=1):
        if len(line) > MAX_LINE_LENGTH:
            found.append(StyleViolation("line-length", lineno))
        stripped = line.lstrip()
        indent = line[: len(line) - len(stripped)]
        if "\t" in indent:
            found.append(StyleViolation("tab-indent", lineno))
        if line != line.rstrip():
            found.append(StyleViolation("trailing-space", lineno))
        if not stripped:
            blank_run += 1
            continue
        is_top_def = line == stripped and (
            stripped.startswith("def ") or stripped.startswith("class ")
        )
        if is_top_def and seen_code and blank_run < 2 and not prev_is_decorator:
            found.append(StyleViolation("blank-lines", lineno))
        if not stripped.startswith("#"):
            seen_code = True
        prev_is_decorator = line == stripped and stripped.startswith("@")
        blank_run = 0
    return found


def _token_rules(source: str) -> List[StyleViolation]:
    found = []
    try:
        tokens = list(tokenize.generate_tokens(io.StringIO(source).readline))
    except (tokenize.TokenError, IndentationError, SyntaxError, ValueError):
        return []
    lines = source.splitlines()
    depth = 0
    for tok in tokens:
        if tok.type != tokenize.OP:
            continue
        if tok.string in "([{":
            depth += 1
        elif tok.string in ")]}":
            depth -= 1
        elif tok.string == "=" and depth == 0:
            row, col = tok.start
            line = lines[row - 1] if row - 1 < len(lines) else ""
            before_ok = col == 0 or line[col - 1] in " \t"
            after = line[col + 1 : col + 2]
            after_ok = after == "" or after in " \t"
            if not (before_ok and after_ok):
                found.append(StyleViolation("op-spacing", row))
        elif tok.string == ",":
            row, col = tok.start
            line = lines[row - 1] if row - 1 < len(lines) else ""
            after = line[col + 1 : col + 2]
            if after and after not in " \t)]}":
                found.append(StyleViolation("comma-spacing", row))
    return found


def style_report(source: str) -> List[StyleViolation]:
    """All rule violations in ``source``, sorted by line then rule id."""
    found = _line_rules(source) + _token_rules(source)
    return sorted(found, key=lambda v: (v.line, v.rule))


def style_violations(source: str) -> int:
    """Number of style-rule violations in ``source``."""
    return len(style_report(source))
