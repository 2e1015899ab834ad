"""Syntax-error-tolerant parsing of Python source.

Generated programs are frequently broken.  Instead of treating a
``SyntaxError`` as all-or-nothing, :func:`parse_with_recovery` repeatedly
neutralises the offending line (first with an indentation-preserving
``pass``, then with a blank line) and retries, counting one error region per
repair.  The resulting tree -- possibly partial -- still supports structural
similarity via :func:`ast_signatures`.
"""

from __future__ import annotations

import ast
from collections import Counter
from typing import Optional, Tuple

__all__ = [
    "parse_with_recovery",
    "count_syntax_errors",
    "ast_signatures",
    "ast_match",
]


def parse_with_recovery(source: str) -> Tuple[Optional[ast.Module], int]:
    """Parse ``source``, repairing syntax errors line by line.

    Returns ``(tree, error_count)`` where ``error_count`` is the number of
    distinct error regions that had to be neutralised (0 iff the source
    parses cleanly, in which case ``tree`` is the unmodified parse).  When
    recovery is impossible the tree is ``None`` and the count is >= 1.

    The procedure is deterministic: every retry strictly degrades exactly
    one line (original -> ``pass`` -> blank), so it terminates after at most
    ``2 * n_lines`` repairs.
    """
    errors = 0
    lines = source.splitlines()
    # 0 = untouched, 1 = replaced by `pass`, 2 = blanked out
    state = [0] * len(lines)
    budget = 2 * len(lines) + 4
    while budget > 0:
        budget -= 1
        try:
            return ast.parse("\n".join(lines)), errors
        except SyntaxError as err:
            errors += 1
            lineno = err.lineno
            if lineno is None or not 1 <= lineno <= len(lines):
                return None, errors
            i = lineno - 1
            if state[i] == 0:
                stripped = lines[i].lstrip()
                indent = lines[i][: len(lines[i]) - len(stripped)]
                lines[i] = indent + "pass"
                state[i] = 1
            elif state[i] == 1:
                lines[i] = ""
                state[i] = 2
            else:
                # The same fully-blanked line keeps failing (e.g. a dangling
                # block elsewhere); bail out rather than loop.
                return None, errors
        except (ValueError, RecursionError, MemoryError):
            # Null bytes or pathologically nested input.
            return None, errors + 1
    return None, errors


def count_syntax_errors(source: str) -> int:
    """Number of syntax-error regions in ``source`` (0 for valid code)."""
    return parse_with_recovery(source)[1]


def _signature(node: ast.AST) -> str:
    children = ",".join(_signature(child) for child in ast.iter_child_nodes(node))
    return f"{type(node).__name__}({children})"


def ast_signatures(tree: ast.AST) -> Counter:
    """Multiset of structural subtree signatures rooted at every node.

    Signatures record node types only -- identifier names and literal values
    are deliberately ignored, so two programs that differ solely by renaming
    produce identical signature multisets.
    """
    sigs: Counter = Counter()

    def visit(node: ast.AST) -> str:
        parts = [visit(child) for child in ast.iter_child_nodes(node)]
        sig = f"{type(node).__name__}({','.join(parts)})"
        sigs[sig] += 1
        return sig

    try:
        visit(tree)
    except RecursionError:
        return Counter()
    return sigs


def ast_match(candidate: Optional[ast.AST], reference: Optional[ast.AST]) -> float:
    """Clipped subtree-multiset overlap, normalised by the candidate size.

    Returns the fraction of candidate subtrees that also occur in the
    reference (counting multiplicity), in [0, 1].  Identical or
    alpha-renamed trees score 1.0.
    """
    if candidate is None or reference is None:
        return 0.0
    cand = ast_signatures(candidate)
    ref = ast_signatures(reference)
    total = sum(cand.values())
    if total == 0:
        return 1.0 if sum(ref.values()) == 0 else 0.0
    matched = sum((cand & ref).values())
    return matched / total
