"""Surface and structural similarity between programs.

Three ingredients, composed into a single code-similarity score:

* plain n-gram precision with brevity penalty (``bleu``),
* the same but with language keywords up-weighted, so getting the control
  flow right counts more than matching identifiers,
* structural subtree overlap on recovered syntax trees.
"""

from __future__ import annotations

import keyword
import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple

from promptcausal.codemetrics.parsing import ast_match, parse_with_recovery
from promptcausal.errors import TooFewSolutions

__all__ = [
    "tokenize_code",
    "bleu",
    "weighted_bleu",
    "CodeBleuScore",
    "codebleu",
    "mutual_similarity",
]

_CODE_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

#: Multiplier applied to language keywords in the weighted n-gram component.
KEYWORD_WEIGHT = 5.0

_KEYWORDS = frozenset(keyword.kwlist) | frozenset(getattr(keyword, "softkwlist", ()))


def tokenize_code(source: str) -> List[str]:
    """Split source into word and single-punctuation tokens.

    Total on arbitrary text, including code that does not parse.
    """
    return _CODE_TOKEN_RE.findall(source)


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def _brevity_penalty(cand_len: int, ref_len: int) -> float:
    if cand_len >= ref_len:
        return 1.0
    return math.exp(1.0 - ref_len / cand_len)


def _geometric_mean(precisions: Sequence[float]) -> float:
    product = 1.0
    for p in precisions:
        if p <= 0.0:
            return 0.0
        product *= p
    return product ** (1.0 / len(precisions))


def bleu(
    candidate: Sequence[str],
    reference: Sequence[str],
    max_n: int = 4,
    smooth_k: float = 1.0,
) -> float:
    """Corpus-style n-gram precision score for a single sentence pair.

    Modified n-gram precisions for n = 1..``max_n`` are combined by
    geometric mean and multiplied by a brevity penalty.  ``smooth_k`` is
    add-k smoothing applied to each precision; with ``smooth_k=0`` any
    unmatched order zeroes the score.  Orders longer than the candidate are
    treated as neutral (precision 1), so identical short pairs still score
    1.0.

    Score is in [0, 1]; an empty candidate scores 0.
    """
    if max_n < 1:
        raise ValueError(f"max_n must be >= 1, got {max_n}")
    if smooth_k < 0:
        raise ValueError(f"smooth_k must be >= 0, got {smooth_k}")
    candidate = list(candidate)
    reference = list(reference)
    if not candidate:
        return 0.0
    precisions = []
    for n in range(1, max_n + 1):
        total = len(candidate) - n + 1
        if total <= 0:
            precisions.append(1.0)
            continue
        overlap = sum((_ngrams(candidate, n) & _ngrams(reference, n)).values())
        precisions.append((overlap + smooth_k) / (total + smooth_k))
    return _brevity_penalty(len(candidate), len(reference)) * _geometric_mean(precisions)


def _token_weight(token: str) -> float:
    return KEYWORD_WEIGHT if token in _KEYWORDS else 1.0


def _ngram_weight(gram: Tuple[str, ...]) -> float:
    return sum(_token_weight(tok) for tok in gram) / len(gram)


def weighted_bleu(
    candidate: Sequence[str],
    reference: Sequence[str],
    max_n: int = 4,
    smooth_k: float = 1.0,
) -> float:
    """Like :func:`bleu` but each n-gram is weighted by its mean token
    weight, with language keywords counting ``KEYWORD_WEIGHT`` times as much
    as ordinary tokens."""
    if max_n < 1:
        raise ValueError(f"max_n must be >= 1, got {max_n}")
    candidate = list(candidate)
    reference = list(reference)
    if not candidate:
        return 0.0
    precisions = []
    for n in range(1, max_n + 1):
        cand_grams = _ngrams(candidate, n)
        if not cand_grams:
            precisions.append(1.0)
            continue
        ref_grams = _ngrams(reference, n)
        matched = 0.0
        total = 0.0
        for gram, count in cand_grams.items():
            w = _ngram_weight(gram)
            total += w * count
            matched += w * min(count, ref_grams.get(gram, 0))
        precisions.append((matched + smooth_k) / (total + smooth_k))
    return _brevity_penalty(len(candidate), len(reference)) * _geometric_mean(precisions)


@dataclass(frozen=True)
class CodeBleuScore:
    """Composite code-similarity score and its components.

    ``parse_fallback`` is True when either side failed to produce any syntax
    tree, in which case the structural component is pinned to 0.
    """

    score: float
    ngram: float
    weighted_ngram: float
    syntax: float
    parse_fallback: bool = False

    def __float__(self) -> float:
        return self.score


def codebleu(
    candidate_source: str,
    reference_source: str,
    weights: Tuple[float, float, float] = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0),
    max_n: int = 4,
    smooth_k: float = 1.0,
) -> CodeBleuScore:
    """Weighted combination of token, keyword-weighted, and structural
    similarity between two programs.

    ``weights`` apply to (plain n-gram, keyword-weighted n-gram, syntax
    subtree match) in that order; they must be nonnegative and sum to 1.
    Raises ValueError otherwise.
    """
    if len(weights) != 3:
        raise ValueError(f"expected 3 component weights, got {len(weights)}")
    if any(w < 0 for w in weights):
        raise ValueError(f"component weights must be nonnegative: {weights}")
    if abs(sum(weights) - 1.0) > 1e-9:
        raise ValueError(f"component weights must sum to 1, got {sum(weights)!r}")
    cand_tokens = tokenize_code(candidate_source)
    ref_tokens = tokenize_code(reference_source)
    ngram = bleu(cand_tokens, ref_tokens, max_n=max_n, smooth_k=smooth_k)
    weighted = weighted_bleu(cand_tokens, ref_tokens, max_n=max_n, smooth_k=smooth_k)
    cand_tree, _ = parse_with_recovery(candidate_source)
    ref_tree, _ = parse_with_recovery(reference_source)
    fallback = cand_tree is None or ref_tree is None
    syntax = 0.0 if fallback else ast_match(cand_tree, ref_tree)
    score = weights[0] * ngram + weights[1] * weighted + weights[2] * syntax
    return CodeBleuScore(
        score=score,
        ngram=ngram,
        weighted_ngram=weighted,
        syntax=syntax,
        parse_fallback=fallback,
    )


def mutual_similarity(
    solutions: Sequence[str],
    metric: str = "codebleu",
    max_n: int = 4,
    smooth_k: float = 1.0,
) -> float:
    """Mean pairwise similarity over all ordered pairs of solutions.

    ``metric`` is ``"codebleu"`` or ``"bleu"``.  Requires at least two
    solutions (raises :class:`TooFewSolutions` otherwise).  A set of
    identical solutions scores 1.0.
    """
    if len(solutions) < 2:
        raise TooFewSolutions(
            f"mutual similarity needs >= 2 solutions, got {len(solutions)}"
        )
    if metric not in ("codebleu", "bleu"):
        raise ValueError(f"unknown similarity metric: {metric!r}")
    token_cache: Dict[int, List[str]] = {}
    if metric == "bleu":
        token_cache = {i: tokenize_code(s) for i, s in enumerate(solutions)}
    total = 0.0
    pairs = 0
    for i in range(len(solutions)):
        for j in range(len(solutions)):
            if i == j:
                continue
            if metric == "codebleu":
                total += codebleu(
                    solutions[i], solutions[j], max_n=max_n, smooth_k=smooth_k
                ).score
            else:
                total += bleu(
                    token_cache[i], token_cache[j], max_n=max_n, smooth_k=smooth_k
                )
            pairs += 1
    return total / pairs
