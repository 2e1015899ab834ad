"""Quantify prompt text as a named vector of linguistic features.

Tagging is lexicon + heuristic driven and fully deterministic: closed
classes come from the bundled word lists, open classes fall back to
suffix rules, and capitalized mid-sentence tokens (or gazetteer hits)
become entities. Every feature is total: the empty text yields a
finite value, 0 unless documented otherwise.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Callable

from promptcausal import lexicon

POS_TAGS = ("NOUN", "VERB", "ADJ", "ADV", "DET", "PRON", "PREP", "NUM", "PUNCT", "ENT", "OTHER")

_TOKEN_RE = re.compile(r"\d+\.\d+|\d+|[A-Za-z]+(?:'[A-Za-z]+)?|[^\sA-Za-z0-9]")
_SENT_TERMINALS = {".", "!", "?"}

_ADJ_SUFFIXES = ("ous", "ful", "less", "able", "ible", "ive", "ic", "al", "est")
_VERB_SUFFIXES = ("ing", "ed", "ize", "ise", "ify")
_NOUN_SUFFIXES = ("tion", "sion", "ment", "ness", "ity")


@dataclass(frozen=True)
class Token:
    surface: str
    pos: str


@dataclass(frozen=True)
class TokenSequence:
    """Tokens plus sentence boundaries (half-open index ranges)."""

    tokens: tuple[Token, ...]
    sentence_bounds: tuple[tuple[int, int], ...]

    def words(self) -> list[Token]:
        return [t for t in self.tokens if t.pos != "PUNCT"]

    def count(self, pos: str) -> int:
        return sum(1 for t in self.tokens if t.pos == pos)


def _is_word(surface: str) -> bool:
    return surface[0].isalpha()


def _is_number(surface: str) -> bool:
    return surface[0].isdigit() or surface.lower() in lexicon.NUMBER_WORDS


def _tag_word(surface: str, sentence_initial: bool, prev_tag: str | None) -> str:
    low = surface.lower()
    if low in lexicon.DETERMINERS:
        return "DET"
    if low in lexicon.PRONOUNS:
        return "PRON"
    if low in lexicon.PREPOSITIONS:
        return "PREP"
    if low in lexicon.AUXILIARIES:
        return "VERB"
    if low in lexicon.CONJUNCTIONS:
        return "OTHER"
    capitalized = surface[0].isupper()
    if capitalized and (not sentence_initial or low in lexicon.GAZETTEER):
        return "ENT"
    if prev_tag == "DET":
        return "NOUN"
    if low in lexicon.VERBS or (low.endswith("s") and low[:-1] in lexicon.VERBS):
        return "VERB"
    if low.endswith("ly"):
        return "ADV"
    if low.endswith(_ADJ_SUFFIXES):
        return "ADJ"
    if low.endswith(_VERB_SUFFIXES):
        return "VERB"
    if low.endswith(_NOUN_SUFFIXES):
        return "NOUN"
    return "NOUN"


def tokenize(text: str) -> TokenSequence:
    """Deterministic tokenization with coarse POS tags.

    Sentences end after a run of terminal punctuation (. ! ?); the
    terminal tokens belong to the sentence they close. Empty text
    yields an empty sequence.
    """
    surfaces = _TOKEN_RE.findall(text)
    if not surfaces:
        return TokenSequence(tokens=(), sentence_bounds=())

    # Pass 1: sentence boundaries.
    bounds: list[tuple[int, int]] = []
    start = 0
    for i, s in enumerate(surfaces):
        is_last = i + 1 == len(surfaces)
        closes = s in _SENT_TERMINALS and (is_last or surfaces[i + 1] not in _SENT_TERMINALS)
        if closes:
            bounds.append((start, i + 1))
            start = i + 1
    if start < len(surfaces):
        bounds.append((start, len(surfaces)))

    # Pass 2: tags, tracking the first alphabetic token of each sentence.
    tokens: list[Token] = []
    for lo, hi in bounds:
        first_word_idx = next((j for j in range(lo, hi) if _is_word(surfaces[j])), None)
        prev_tag: str | None = None
        for j in range(lo, hi):
            s = surfaces[j]
            if not _is_word(s) and not s[0].isdigit():
                tag = "PUNCT"
            elif _is_number(s):
                tag = "NUM"
            else:
                tag = _tag_word(s, sentence_initial=(j == first_word_idx), prev_tag=prev_tag)
            tokens.append(Token(surface=s, pos=tag))
            if tag != "PUNCT":
                prev_tag = tag
    return TokenSequence(tokens=tuple(tokens), sentence_bounds=tuple(bounds))


@dataclass(frozen=True)
class FeatureSpec:
    """A named, total, deterministic function of a token sequence."""

    name: str
    family: str  # lexical | syntactic_shallow | semantic_lexicon
    description: str
    compute: Callable[[TokenSequence], float] = field(repr=False)


@dataclass(frozen=True)
class FeatureVector:
    names: tuple[str, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        if len(self.names) != len(self.values):
            raise ValueError("feature names and values differ in length")

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.names, self.values))


def _safe_div(num: float, den: float) -> float:
    return num / den if den else 0.0


def _root_var(seq: TokenSequence, pos: str) -> float:
    toks = [t.surface.lower() for t in seq.tokens if t.pos == pos]
    if not toks:
        return 0.0
    return len(set(toks)) / math.sqrt(len(toks))


def _word_surfaces(seq: TokenSequence) -> list[str]:
    return [t.surface.lower() for t in seq.words()]


def _sentence_word_counts(seq: TokenSequence) -> list[int]:
    return [
        sum(1 for t in seq.tokens[lo:hi] if t.pos != "PUNCT")
        for lo, hi in seq.sentence_bounds
    ]


def _familiarities(seq: TokenSequence) -> list[float]:
    return [lexicon.familiarity(w) for w in _word_surfaces(seq)]


def _build_default_specs() -> list[FeatureSpec]:
    specs: list[FeatureSpec] = []

    def add(name: str, family: str, description: str):
        def decorator(fn: Callable[[TokenSequence], float]):
            specs.append(FeatureSpec(name=name, family=family, description=description, compute=fn))
            return fn

        return decorator

    # --- lexical counts ---
    add("token_count", "lexical", "total number of tokens including punctuation")(
        lambda s: float(len(s.tokens))
    )
    add("word_count", "lexical", "number of non-punctuation tokens")(
        lambda s: float(len(s.words()))
    )
    add("char_count", "lexical", "total characters across non-punctuation tokens")(
        lambda s: float(sum(len(t.surface) for t in s.words()))
    )
    add("sentence_count", "lexical", "number of sentences")(
        lambda s: float(len(s.sentence_bounds))
    )
    add("unique_word_count", "lexical", "distinct lowercased non-punctuation tokens")(
        lambda s: float(len(set(_word_surfaces(s))))
    )
    for pos, noun in (
        ("NOUN", "nouns"),
        ("VERB", "verbs"),
        ("ADJ", "adjectives"),
        ("ADV", "adverbs"),
        ("DET", "determiners"),
        ("PRON", "pronouns"),
        ("PREP", "prepositions"),
        ("NUM", "numerals"),
        ("PUNCT", "punctuation tokens"),
    ):
        add(f"{pos.lower()}_count", "lexical", f"number of {noun}")(
            lambda s, p=pos: float(s.count(p))
        )
    add("named_entity_count", "lexical", "number of named-entity tokens")(
        lambda s: float(s.count("ENT"))
    )
    add("function_word_count", "lexical", "determiners + pronouns + prepositions")(
        lambda s: float(s.count("DET") + s.count("PRON") + s.count("PREP"))
    )

    # --- lexical ratios ---
    add("simp_ttr", "lexical", "type-token ratio: unique words / total words")(
        lambda s: _safe_div(len(set(_word_surfaces(s))), len(s.words()))
    )
    add("root_ttr", "lexical", "unique words / sqrt(total words)")(
        lambda s: _safe_div(len(set(_word_surfaces(s))), math.sqrt(len(s.words())) if s.words() else 0.0)
    )
    add("log_ttr", "lexical", "log unique words / log total words (0 below 2 words)")(
        lambda s: _safe_div(
            math.log(len(set(_word_surfaces(s)))) if len(s.words()) > 1 else 0.0,
            math.log(len(s.words())) if len(s.words()) > 1 else 0.0,
        )
    )
    for pos, noun in (("NOUN", "noun"), ("VERB", "verb"), ("ADJ", "adjective"), ("ADV", "adverb")):
        add(f"{pos.lower()}_ratio", "lexical", f"{noun} tokens / total words")(
            lambda s, p=pos: _safe_div(s.count(p), len(s.words()))
        )
    add("content_word_ratio", "lexical", "nouns+verbs+adjectives+adverbs / total words")(
        lambda s: _safe_div(
            s.count("NOUN") + s.count("VERB") + s.count("ADJ") + s.count("ADV"),
            len(s.words()),
        )
    )
    for pos, noun in (
        ("DET", "determiners"),
        ("NOUN", "nouns"),
        ("VERB", "verbs"),
        ("ADJ", "adjectives"),
        ("ADV", "adverbs"),
        ("PRON", "pronouns"),
        ("PREP", "prepositions"),
    ):
        add(
            f"root_{pos.lower()}_var",
            "lexical",
            f"unique {noun} / sqrt(total {noun}); 0 when absent",
        )(lambda s, p=pos: _root_var(s, p))

    # --- shallow syntactic proxies ---
    add("mean_sentence_length", "syntactic_shallow", "mean words per sentence")(
        lambda s: _safe_div(sum(_sentence_word_counts(s)), len(s.sentence_bounds))
    )
    add("max_sentence_length", "syntactic_shallow", "maximum words in any sentence")(
        lambda s: float(max(_sentence_word_counts(s), default=0))
    )
    add("mean_word_length", "syntactic_shallow", "mean characters per word")(
        lambda s: _safe_div(sum(len(w) for w in _word_surfaces(s)), len(s.words()))
    )
    add("max_word_length", "syntactic_shallow", "maximum characters in any word")(
        lambda s: float(max((len(w) for w in _word_surfaces(s)), default=0))
    )
    add("punct_density", "syntactic_shallow", "punctuation tokens / all tokens")(
        lambda s: _safe_div(s.count("PUNCT"), len(s.tokens))
    )
    add("comma_count", "syntactic_shallow", "number of commas")(
        lambda s: float(sum(1 for t in s.tokens if t.surface == ","))
    )
    add("question_count", "syntactic_shallow", "number of question marks")(
        lambda s: float(sum(1 for t in s.tokens if t.surface == "?"))
    )
    add("clause_marker_count", "syntactic_shallow", "subordinating clause markers")(
        lambda s: float(sum(1 for t in s.tokens if t.surface.lower() in lexicon.CLAUSE_MARKERS))
    )
    add("clause_density", "syntactic_shallow", "clause markers per sentence")(
        lambda s: _safe_div(
            sum(1 for t in s.tokens if t.surface.lower() in lexicon.CLAUSE_MARKERS),
            len(s.sentence_bounds),
        )
    )
    add("parenthetical_count", "syntactic_shallow", "opening parentheses")(
        lambda s: float(sum(1 for t in s.tokens if t.surface == "("))
    )

    # --- lexicon-based semantic proxies ---
    add("familiarity_mean", "semantic_lexicon", "mean word familiarity (1-7 scale)")(
        lambda s: _safe_div(sum(_familiarities(s)), len(s.words()))
    )
    add("familiarity_min", "semantic_lexicon", "least familiar word's score (0 if empty)")(
        lambda s: float(min(_familiarities(s), default=0.0))
    )
    add("rare_word_count", "semantic_lexicon", "words below the familiarity table")(
        lambda s: float(sum(1 for f in _familiarities(s) if f <= lexicon.FAMILIARITY_FLOOR))
    )
    add("rare_word_ratio", "semantic_lexicon", "rare words / total words")(
        lambda s: _safe_div(
            sum(1 for f in _familiarities(s) if f <= lexicon.FAMILIARITY_FLOOR),
            len(s.words()),
        )
    )
    add("named_entity_density", "semantic_lexicon", "entity tokens / total words")(
        lambda s: _safe_div(s.count("ENT"), len(s.words()))
    )
    return specs


_DEFAULT_SPECS = _build_default_specs()


def default_feature_registry() -> list[FeatureSpec]:
    """The bundled feature registry (40+ features, three families)."""
    return list(_DEFAULT_SPECS)


def registry_from_names(names: list[str]) -> list[FeatureSpec]:
    """Subset/reorder the default registry by feature name."""
    by_name = {spec.name: spec for spec in _DEFAULT_SPECS}
    missing = [n for n in names if n not in by_name]
    if missing:
        raise ValueError(f"unknown features: {missing}")
    return [by_name[n] for n in names]


def extract_features(text: str, registry: list[FeatureSpec]) -> FeatureVector:
    """Evaluate every registry feature on the text, in registry order."""
    if not registry:
        raise ValueError("feature registry is empty")
    seq = tokenize(text)
    values = tuple(float(spec.compute(seq)) for spec in registry)
    return FeatureVector(names=tuple(s.name for s in registry), values=values)


def list_features(registry: list[FeatureSpec]) -> list[tuple[str, str, str]]:
    """(name, family, description) triples in stable registry order."""
    return [(s.name, s.family, s.description) for s in registry]
