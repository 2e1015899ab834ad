"""Meta-prompt construction and LLM access for rephrasing and generation.

A meta-prompt wraps a programming question together with the surface texts
of the selected rephrasing intentions (grouped as instructions, role,
scenario).  Two interchangeable clients answer it: an HTTP
chat-completions client for live runs, and a deterministic mock that parses
the meta-prompt back apart and applies fixed text transforms, so the whole
pipeline is bit-reproducible offline.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional, Protocol, Sequence, Tuple

from promptcausal.errors import EmptyResponse, LengthMismatch, TransportError
from promptcausal.intentions import Intention, IntentionVector, default_registry

logger = logging.getLogger(__name__)

__all__ = [
    "ChatMessage",
    "ChatRequest",
    "ChatResponse",
    "ChatClient",
    "HttpChatClient",
    "MockChatClient",
    "RetryPolicy",
    "AuditLog",
    "build_meta_prompt",
    "build_generation_prompt",
    "rephrase_question",
    "generate_code",
    "strip_code_fences",
    "REPHRASE_HEADER",
    "GENERATE_HEADER",
    "DEFAULT_API_KEY_ENV",
]

REPHRASE_HEADER = (
    "Rephrase the programming question below, preserving its meaning and constraints."
)
GENERATE_HEADER = (
    "Write a Python 3 program that reads from standard input and writes the "
    "answer to standard output."
)
REPHRASE_TEMPERATURE = 0.7
DEFAULT_MAX_TOKENS = 2000
DEFAULT_SOLUTIONS = 3
DEFAULT_API_KEY_ENV = "PROMPTCAUSAL_API_KEY"


# ---------------------------------------------------------------------------
# Wire types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


@dataclass(frozen=True)
class ChatRequest:
    messages: Tuple[ChatMessage, ...]
    temperature: Optional[float] = None
    max_tokens: int = DEFAULT_MAX_TOKENS

    def __post_init__(self) -> None:
        if self.max_tokens <= 0:
            raise ValueError(f"max_tokens must be > 0, got {self.max_tokens}")
        if not self.messages:
            raise ValueError("a request needs at least one message")

    @property
    def prompt(self) -> str:
        return self.messages[-1].content


@dataclass(frozen=True)
class ChatResponse:
    text: str
    finish_reason: str = "stop"
    prompt_tokens: int = 0
    completion_tokens: int = 0


class ChatClient(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


@dataclass(frozen=True)
class RetryPolicy:
    """At most ``retries`` retries => ``retries + 1`` attempts total."""

    retries: int = 2
    backoff_s: float = 0.5
    multiplier: float = 2.0


class AuditLog:
    """Append-only JSONL log of request/response pairs."""

    def __init__(self, path: str | Path):
        self.path = Path(path)

    def record(self, event: Mapping[str, object]) -> None:
        with self.path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(dict(event), ensure_ascii=False) + "\n")


def _complete_with_retry(
    client: ChatClient,
    request: ChatRequest,
    policy: RetryPolicy,
    sleep: Callable[[float], None] = time.sleep,
) -> ChatResponse:
    delay = policy.backoff_s
    last: Optional[TransportError] = None
    for attempt in range(policy.retries + 1):
        try:
            return client.complete(request)
        except TransportError as exc:
            last = exc
            if attempt < policy.retries:
                logger.warning("transport failure (attempt %d): %s", attempt + 1, exc)
                sleep(delay)
                delay *= policy.multiplier
    assert last is not None
    raise last


# ---------------------------------------------------------------------------
# Prompt templates
# ---------------------------------------------------------------------------


def build_meta_prompt(
    question: str,
    selection: IntentionVector,
    registry: Sequence[Intention] = (),
) -> str:
    """Deterministic template fill for a rephrasing request.

    Selected intentions appear as clause lines grouped by kind (instructions
    first, then role, then scenario).  An all-zero selection yields the bare
    template: question only, no intention clauses.  Distinct selections
    always produce distinct texts.  Raises :class:`LengthMismatch` when the
    selection length does not equal the registry size.
    """
    registry = list(registry) or default_registry()
    if len(selection.bits) != len(registry):
        raise LengthMismatch(
            f"selection has {len(selection.bits)} bits for a registry of {len(registry)}"
        )
    by_group: Dict[str, List[str]] = {"instruction": [], "role": [], "scenario": []}
    for bit, intent in zip(selection.bits, registry):
        if bit:
            by_group[intent.group].append(intent.surface_text)
    lines = [REPHRASE_HEADER]
    if by_group["instruction"]:
        lines.append("Instructions: " + "; ".join(by_group["instruction"]) + ".")
    if by_group["role"]:
        lines.append("Role: " + "; ".join(by_group["role"]) + ".")
    if by_group["scenario"]:
        lines.append("Scenario: " + "; ".join(by_group["scenario"]) + ".")
    lines.append("Question:")
    lines.append(question)
    lines.append("Rephrased question:")
    return "\n".join(lines)


def build_generation_prompt(question: str, slot: int, total: int) -> str:
    return "\n".join(
        [
            GENERATE_HEADER,
            f"Attempt: {slot} of {total}",
            "Question:",
            question,
            "Program:",
        ]
    )


_FENCE_RE = re.compile(r"```[A-Za-z0-9_+-]*\n(.*?)```", re.DOTALL)


def strip_code_fences(text: str) -> str:
    """Return the body of the first fenced code block, or the text as-is."""
    match = _FENCE_RE.search(text)
    if match:
        return match.group(1).rstrip("\n")
    stripped = text.strip()
    if stripped.startswith("```"):
        lines = stripped.splitlines()[1:]
        if lines and lines[-1].strip() == "```":
            lines = lines[:-1]
        return "\n".join(lines)
    return text


# ---------------------------------------------------------------------------
# High-level operations
# ---------------------------------------------------------------------------


def rephrase_question(
    question: str,
    selection: IntentionVector,
    client: ChatClient,
    registry: Sequence[Intention] = (),
    policy: RetryPolicy = RetryPolicy(),
    record_id: str = "",
    audit: Optional[AuditLog] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Rephrase one question per the selected intentions.

    The LLM response text is returned verbatim.  Transport failures are
    retried per ``policy`` and then surfaced; a blank response raises
    :class:`EmptyResponse`.
    """
    prompt = build_meta_prompt(question, selection, registry)
    request = ChatRequest(
        messages=(ChatMessage("user", prompt),),
        temperature=REPHRASE_TEMPERATURE,
        max_tokens=DEFAULT_MAX_TOKENS,
    )
    response = _complete_with_retry(client, request, policy, sleep=sleep)
    if audit is not None:
        audit.record(
            {
                "kind": "rephrase",
                "record_id": record_id,
                "prompt": prompt,
                "response": response.text,
                "finish_reason": response.finish_reason,
            }
        )
    logger.info("rephrased %s (%d -> %d chars)", record_id or "<anon>", len(question), len(response.text))
    if not response.text.strip():
        raise EmptyResponse(f"blank rephrase response for {record_id or question[:40]!r}")
    return response.text


def generate_code(
    question: str,
    client: ChatClient,
    n: int = DEFAULT_SOLUTIONS,
    max_tokens: int = DEFAULT_MAX_TOKENS,
    policy: RetryPolicy = RetryPolicy(),
    record_id: str = "",
    audit: Optional[AuditLog] = None,
    sleep: Callable[[float], None] = time.sleep,
) -> List[str]:
    """Request ``n`` independent solutions for a question, in slot order.

    Markdown code fences are stripped from each response.  A blank response
    for a slot is recorded and skipped rather than failing the whole record,
    so the result may have fewer than ``n`` entries.
    """
    if n < 1:
        raise ValueError(f"solution count must be >= 1, got {n}")
    solutions: List[str] = []
    for slot in range(1, n + 1):
        prompt = build_generation_prompt(question, slot, n)
        request = ChatRequest(
            messages=(ChatMessage("user", prompt),), max_tokens=max_tokens
        )
        response = _complete_with_retry(client, request, policy, sleep=sleep)
        if audit is not None:
            audit.record(
                {
                    "kind": "generate",
                    "record_id": record_id,
                    "slot": slot,
                    "prompt": prompt,
                    "response": response.text,
                    "finish_reason": response.finish_reason,
                }
            )
        body = strip_code_fences(response.text)
        if not body.strip():
            logger.warning("empty generation for %s slot %d; skipped", record_id or "<anon>", slot)
            continue
        solutions.append(body)
    return solutions


# ---------------------------------------------------------------------------
# Live HTTP client (chat-completions style)
# ---------------------------------------------------------------------------


class HttpChatClient:
    """Provider-agnostic chat-completions HTTP client.

    The API key is read from the environment (``api_key_env``) at call
    time.  ``max_inflight`` bounds concurrent requests from this process.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key_env: str = DEFAULT_API_KEY_ENV,
        timeout_s: float = 60.0,
        max_inflight: int = 4,
    ):
        self.endpoint = endpoint
        self.model = model
        self.api_key_env = api_key_env
        self.timeout_s = timeout_s
        self._gate = threading.Semaphore(max(1, max_inflight))

    def complete(self, request: ChatRequest) -> ChatResponse:
        import requests

        key = os.environ.get(self.api_key_env, "")
        if not key:
            raise TransportError(f"API key env var {self.api_key_env} is not set")
        payload: Dict[str, object] = {
            "model": self.model,
            "messages": [
                {"role": m.role, "content": m.content} for m in request.messages
            ],
            "max_tokens": request.max_tokens,
        }
        if request.temperature is not None:
            payload["temperature"] = request.temperature
        with self._gate:
            try:
                resp = requests.post(
                    self.endpoint,
                    json=payload,
                    headers={"Authorization": f"Bearer {key}"},
                    timeout=self.timeout_s,
                )
            except requests.RequestException as exc:
                raise TransportError(str(exc)) from exc
        if resp.status_code != 200:
            raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        try:
            data = resp.json()
            choice = data["choices"][0]
            text = choice["message"]["content"] or ""
            finish = choice.get("finish_reason", "stop")
            usage = data.get("usage", {})
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed response body: {exc}") from exc
        if not text:
            raise EmptyResponse("provider returned no text")
        return ChatResponse(
            text=text,
            finish_reason=finish,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
        )


# ---------------------------------------------------------------------------
# Deterministic mock client
# ---------------------------------------------------------------------------


def _shorten(question: str) -> str:
    words = question.split()
    kept = words[: max(5, len(words) // 2)]
    text = " ".join(kept).rstrip(".,;")
    return text + "."


def _simplify(question: str) -> str:
    words = [w for w in question.split() if len(w) <= 10]
    return " ".join(words) if words else question


#: Deterministic per-intention text transforms, applied in registry order.
_TRANSFORMS: Dict[str, Callable[[str], str]] = {
    "short": _shorten,
    "long": lambda q: q
    + " Describe the input format, the output format, and one worked example.",
    "formal": lambda q: "You are required to address the following task. " + q,
    "fluent": lambda q: "Here is the task, stated plainly. " + q,
    "technical": lambda q: q
    + " State the intended algorithm and its complexity explicitly.",
    "simple": lambda q: "Simply put: " + _simplify(q),
    "student": lambda q: "As a student working through an assignment, consider this. " + q,
    "engineer": lambda q: "As a software engineer reviewing requirements, consider this. " + q,
    "teacher": lambda q: "As a teacher preparing an exercise, consider this. " + q,
    "competition": lambda q: q + " This problem appears in a programming competition.",
    "interview": lambda q: q + " This problem is posed during a technical interview.",
    "classroom": lambda q: q + " This problem is used in a classroom exercise.",
}


_SOLVER_SUM = '''import sys

parts = sys.stdin.read().split()
total = int(parts[0]) + int(parts[1])
print(total)
'''

_SOLVER_PRODUCT = '''import sys

parts = sys.stdin.read().split()
result = int(parts[0]) * int(parts[1])
print(result)
'''

_SOLVER_REVERSE = '''import sys

text = sys.stdin.read().strip()
print(text[::-1])
'''

_SOLVER_MAX = '''import sys

items = [int(tok) for tok in sys.stdin.read().split()]
print(max(items))
'''

_SOLVER_MIN = '''import sys

items = [int(tok) for tok in sys.stdin.read().split()]
print(min(items))
'''

_SOLVER_SORT = '''import sys

items = [int(tok) for tok in sys.stdin.read().split()]
items.sort()
print(" ".join(str(item) for item in items))
'''

_SOLVER_EVEN = '''import sys

items = [int(tok) for tok in sys.stdin.read().split()]
count = sum(1 for item in items if item % 2 == 0)
print(count)
'''

_SOLVER_FACTORIAL = '''import sys

number = int(sys.stdin.read().strip())
result = 1
for step in range(2, number + 1):
    result = result * step
print(result)
'''

_SOLVER_VOWELS = '''import sys

text = sys.stdin.read().strip().lower()
count = sum(1 for ch in text if ch in "aeiou")
print(count)
'''

_SOLVER_PALINDROME = '''import sys

text = sys.stdin.read().strip()
print("yes" if text == text[::-1] else "no")
'''

_SOLVER_FIBONACCI = '''import sys

number = int(sys.stdin.read().strip())
prev, cur = 0, 1
for step in range(number):
    prev, cur = cur, prev + cur
print(prev)
'''

_SOLVER_UPPER = '''import sys

text = sys.stdin.read().strip()
print(text.upper())
'''

_SOLVER_DIFFERENCE = '''import sys

parts = sys.stdin.read().split()
print(abs(int(parts[0]) - int(parts[1])))
'''

_SOLVER_REMAINDER = '''import sys

parts = sys.stdin.read().split()
print(int(parts[0]) % int(parts[1]))
'''

_SOLVER_DIGITS = '''import sys

text = sys.stdin.read().strip()
print(sum(int(ch) for ch in text if ch.isdigit()))
'''

_SOLVER_WORDS = '''import sys

text = sys.stdin.read()
print(len(text.split()))
'''

_SOLVER_ECHO = '''import sys

sys.stdout.write(sys.stdin.read())
'''

#: Keyword -> canonical solver; first match in order wins.
_SOLVER_TABLE: Tuple[Tuple[str, str], ...] = (
    ("sum of", _SOLVER_SUM),
    ("product", _SOLVER_PRODUCT),
    ("reverse", _SOLVER_REVERSE),
    ("largest", _SOLVER_MAX),
    ("maximum", _SOLVER_MAX),
    ("smallest", _SOLVER_MIN),
    ("minimum", _SOLVER_MIN),
    ("ascending", _SOLVER_SORT),
    ("sort", _SOLVER_SORT),
    ("even", _SOLVER_EVEN),
    ("factorial", _SOLVER_FACTORIAL),
    ("vowel", _SOLVER_VOWELS),
    ("palindrome", _SOLVER_PALINDROME),
    ("fibonacci", _SOLVER_FIBONACCI),
    ("uppercase", _SOLVER_UPPER),
    ("difference", _SOLVER_DIFFERENCE),
    ("remainder", _SOLVER_REMAINDER),
    ("digit", _SOLVER_DIGITS),
    ("words", _SOLVER_WORDS),
)

_CRASHER = '''import sys

data = sys.stdin.read()
raise RuntimeError("cannot solve: " + str(len(data)))
'''

_WRONG = '''import sys

data = sys.stdin.read()
print(0)
'''

_RENAME_RE = re.compile(
    r"\b(parts|total|result|text|items|count|number|step|prev|cur|item|tok|ch|data)\b"
)


def _rename_identifiers(source: str) -> str:
    return _RENAME_RE.sub(lambda m: "v_" + m.group(1), source)


def _make_messy(source: str) -> str:
    lines = source.replace(" = ", "=").replace(", ", ",").splitlines()
    if lines:
        lines[0] = lines[0] + "  "
    lines.append("# " + "this comment pads the line far beyond the permitted length " * 2)
    return "\n".join(lines) + "\n"


def _break_syntax(source: str) -> str:
    return source + "\ndef broken(:\n"


def _comment_header(question: str) -> str:
    """Comment block restating the task, one line per four words.

    Every generated program carries this header, so candidate length (and
    with it similarity against the uncommented reference) tracks question
    length -- mirroring how verbose prompts yield verbose completions.
    Each line ends with trailing whitespace, the classic generated-code
    lint, so style-violation counts track question length as well.
    """
    words = question.split()
    lines = ["# task: " + " ".join(words[i : i + 4]) + "  " for i in range(0, len(words), 4)]
    return "\n".join(lines) + "\n"


class MockChatClient:
    """Deterministic offline stand-in for the LLM.

    Rephrase requests are parsed back into (question, selected intentions)
    and answered by composing fixed per-intention text transforms.
    Generation requests return one of six program variants -- clean solver,
    messy-styled solver, identifier-renamed solver, crasher, syntax-broken
    solver, wrong-output printer -- chosen by a hash of the question plus the
    attempt slot, so records differ but reruns are identical.  Each program
    is prefixed with a comment header restating the question, which couples
    candidate length (hence similarity scores) to question length.

    ``fixtures`` maps ``(question, selection_bits_string)`` to a canned
    rephrase response that overrides the transforms.  ``fail_times`` makes
    the first N calls raise :class:`TransportError` (for retry testing).
    """

    def __init__(
        self,
        registry: Sequence[Intention] = (),
        fixtures: Optional[Mapping[Tuple[str, str], str]] = None,
        fail_times: int = 0,
    ):
        self.registry = list(registry) or default_registry()
        self.fixtures = dict(fixtures or {})
        self._fail_remaining = fail_times
        self.calls = 0

    def complete(self, request: ChatRequest) -> ChatResponse:
        self.calls += 1
        if self._fail_remaining > 0:
            self._fail_remaining -= 1
            raise TransportError("injected mock transport failure")
        prompt = request.prompt
        if prompt.startswith(GENERATE_HEADER):
            text = self._generate(prompt)
        elif prompt.startswith(REPHRASE_HEADER):
            text = self._rephrase(prompt)
        else:
            text = prompt
        return ChatResponse(
            text=text,
            finish_reason="stop",
            prompt_tokens=len(prompt.split()),
            completion_tokens=len(text.split()),
        )

    # -- rephrase ----------------------------------------------------------

    def _rephrase(self, prompt: str) -> str:
        lines = prompt.splitlines()
        try:
            q_start = lines.index("Question:") + 1
            q_end = lines.index("Rephrased question:")
        except ValueError:
            return prompt
        question = "\n".join(lines[q_start:q_end])
        selected_texts = []
        for line in lines[1 : q_start - 1]:
            for label in ("Instructions: ", "Role: ", "Scenario: "):
                if line.startswith(label):
                    selected_texts.extend(
                        part.strip() for part in line[len(label) :].rstrip(".").split(";")
                    )
        selected = set(selected_texts)
        bits = "".join(
            "1" if intent.surface_text in selected else "0" for intent in self.registry
        )
        key = (question, bits)
        if key in self.fixtures:
            return self.fixtures[key]
        text = question
        for intent in self.registry:
            if intent.surface_text in selected and intent.id in _TRANSFORMS:
                text = _TRANSFORMS[intent.id](text)
        return text

    # -- generation --------------------------------------------------------

    def _generate(self, prompt: str) -> str:
        lines = prompt.splitlines()
        slot = 1
        for line in lines:
            match = re.match(r"Attempt: (\d+) of (\d+)", line)
            if match:
                slot = int(match.group(1))
                break
        try:
            q_start = lines.index("Question:") + 1
            q_end = lines.index("Program:")
        except ValueError:
            q_start, q_end = 1, len(lines)
        question = "\n".join(lines[q_start:q_end])
        solver = _SOLVER_ECHO
        lowered = question.lower()
        for keyword_text, candidate in _SOLVER_TABLE:
            if keyword_text in lowered:
                solver = candidate
                break
        digest = hashlib.sha256(question.encode("utf-8")).digest()
        bucket = (digest[0] + slot - 1) % 6
        if bucket == 0:
            program = solver
        elif bucket == 1:
            program = _make_messy(solver)
        elif bucket == 2:
            program = _rename_identifiers(solver)
        elif bucket == 3:
            program = _CRASHER
        elif bucket == 4:
            program = _break_syntax(solver)
        else:
            program = _WRONG
        program = _comment_header(question) + program
        if bucket % 2 == 0:
            return f"```python\n{program}```"
        return program
