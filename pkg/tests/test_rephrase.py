"""Meta-prompt templates, retry behavior, fence stripping, and the
deterministic mock client."""

import hashlib
import itertools
import json

import pytest

from promptcausal.errors import EmptyResponse, LengthMismatch, TransportError
from promptcausal.intentions import IntentionVector, default_registry
from promptcausal.rephrase import (
    GENERATE_HEADER,
    REPHRASE_HEADER,
    AuditLog,
    ChatMessage,
    ChatRequest,
    ChatResponse,
    HttpChatClient,
    MockChatClient,
    RetryPolicy,
    build_generation_prompt,
    build_meta_prompt,
    generate_code,
    rephrase_question,
    strip_code_fences,
)

QUESTION = "Count the number of words in the given line of text."


def vec(**kwargs):
    """Selection vector over the default registry with named bits set."""
    registry = default_registry()
    bits = [0] * len(registry)
    for intent_id in kwargs:
        bits[[it.id for it in registry].index(intent_id)] = 1
    return IntentionVector(bits=tuple(bits))


# ---------------------------------------------------------------------------
# templates
# ---------------------------------------------------------------------------


def test_meta_prompt_all_zero_is_bare_template():
    prompt = build_meta_prompt(QUESTION, IntentionVector.zeros(12))
    assert prompt.splitlines() == [
        REPHRASE_HEADER,
        "Question:",
        QUESTION,
        "Rephrased question:",
    ]


def test_meta_prompt_groups_clauses():
    prompt = build_meta_prompt(QUESTION, vec(short=1, formal=1, teacher=1, interview=1))
    lines = prompt.splitlines()
    assert lines[1] == "Instructions: make it short; make it formal."
    assert lines[2] == "Role: as a teacher."
    assert lines[3] == "Scenario: in a technical interview."
    assert lines[4] == "Question:"


def test_meta_prompt_length_mismatch():
    with pytest.raises(LengthMismatch):
        build_meta_prompt(QUESTION, IntentionVector.zeros(5))


def test_meta_prompt_injective_over_selections():
    # [DERIVED] all 2^12 selections must map to distinct prompt texts.
    prompts = {
        build_meta_prompt(QUESTION, IntentionVector(bits=bits))
        for bits in itertools.product((0, 1), repeat=12)
    }
    assert len(prompts) == 2 ** 12


def test_generation_prompt_template():
    assert build_generation_prompt("Add numbers.", 2, 3).splitlines() == [
        GENERATE_HEADER,
        "Attempt: 2 of 3",
        "Question:",
        "Add numbers.",
        "Program:",
    ]


def test_strip_code_fences():
    assert strip_code_fences("```python\nprint(1)\n```") == "print(1)"
    assert strip_code_fences("text\n```\nx = 1\ny = 2\n```\ntail") == "x = 1\ny = 2"
    assert strip_code_fences("print(1)\n") == "print(1)\n"
    # unclosed fence: drop the opening line, keep the body
    assert strip_code_fences("```python\nprint(1)") == "print(1)"


# ---------------------------------------------------------------------------
# retry policy
# ---------------------------------------------------------------------------


def test_retry_succeeds_after_transient_failures():
    client = MockChatClient(fail_times=2)
    delays = []
    text = rephrase_question(
        QUESTION,
        IntentionVector.zeros(12),
        client,
        policy=RetryPolicy(retries=2, backoff_s=0.5, multiplier=2.0),
        sleep=delays.append,
    )
    assert text == QUESTION  # zero selection -> no transforms
    assert client.calls == 3
    assert delays == [0.5, 1.0]


def test_retry_exhaustion_raises_last_error():
    client = MockChatClient(fail_times=5)
    with pytest.raises(TransportError):
        rephrase_question(
            QUESTION,
            IntentionVector.zeros(12),
            client,
            policy=RetryPolicy(retries=2),
            sleep=lambda _: None,
        )
    assert client.calls == 3  # retries + 1 attempts, then surface


# ---------------------------------------------------------------------------
# mock rephrasing
# ---------------------------------------------------------------------------


def test_mock_shorten_transform():
    # [DERIVED] 11 words -> keep max(5, 11 // 2) = 5, strip punctuation,
    # terminate with a period.
    client = MockChatClient()
    text = rephrase_question(QUESTION, vec(short=1), client, sleep=lambda _: None)
    assert text == "Count the number of words."


def test_mock_transforms_compose_in_registry_order():
    client = MockChatClient()
    text = rephrase_question(
        QUESTION, vec(formal=1, competition=1), client, sleep=lambda _: None
    )
    assert text == (
        "You are required to address the following task. "
        + QUESTION
        + " This problem appears in a programming competition."
    )


def test_mock_simplify_drops_long_words():
    q = "Print the lexicographically smallest rearrangement of digits."
    client = MockChatClient()
    text = rephrase_question(q, vec(simple=1), client, sleep=lambda _: None)
    assert text == "Simply put: Print the smallest of digits."


def test_mock_fixtures_override_transforms():
    bits = vec(short=1)
    client = MockChatClient(fixtures={(QUESTION, bits.to_string()): "Canned answer."})
    text = rephrase_question(QUESTION, bits, client, sleep=lambda _: None)
    assert text == "Canned answer."


def test_blank_rephrase_raises_empty_response():
    bits = vec(short=1)
    client = MockChatClient(fixtures={(QUESTION, bits.to_string()): "   "})
    with pytest.raises(EmptyResponse):
        rephrase_question(QUESTION, bits, client, sleep=lambda _: None)


def test_mock_echoes_unrecognized_prompts():
    client = MockChatClient()
    response = client.complete(
        ChatRequest(messages=(ChatMessage("user", "just some text"),))
    )
    assert response.text == "just some text"


def test_audit_log_records_rephrase(tmp_path):
    audit = AuditLog(tmp_path / "audit.jsonl")
    client = MockChatClient()
    rephrase_question(
        QUESTION, vec(short=1), client, record_id="p01", audit=audit,
        sleep=lambda _: None,
    )
    events = [json.loads(line) for line in (tmp_path / "audit.jsonl").read_text().splitlines()]
    assert len(events) == 1
    assert events[0]["kind"] == "rephrase"
    assert events[0]["record_id"] == "p01"
    assert events[0]["prompt"].startswith(REPHRASE_HEADER)
    assert events[0]["response"] == "Count the number of words."


# ---------------------------------------------------------------------------
# mock generation
# ---------------------------------------------------------------------------


def test_generate_code_is_deterministic_and_fence_free():
    client = MockChatClient()
    a = generate_code(QUESTION, client, n=3, sleep=lambda _: None)
    b = generate_code(QUESTION, client, n=3, sleep=lambda _: None)
    assert a == b
    assert len(a) == 3
    assert all("```" not in sol for sol in a)
    assert all(sol.startswith("# task: ") for sol in a)


def test_generate_code_clean_bucket_oracle():
    # [DERIVED] the variant for (question, slot) is bucket
    # (sha256(question)[0] + slot - 1) % 6; bucket 0 is the untouched solver,
    # so that slot's program is exactly header + canonical sum-solver.
    question = "Print the sum of two integers."
    first = hashlib.sha256(question.encode("utf-8")).digest()[0]
    slot_for_clean = (6 - first % 6) % 6 + 1  # slot with bucket 0, in 1..6
    client = MockChatClient()
    sols = generate_code(question, client, n=6, sleep=lambda _: None)
    clean = sols[slot_for_clean - 1]
    header, _, body = clean.partition("\n" + "import sys")
    assert clean.endswith(
        "import sys\n\n"
        "parts = sys.stdin.read().split()\n"
        "total = int(parts[0]) + int(parts[1])\n"
        "print(total)"
    )
    assert clean.splitlines()[0].startswith("# task: Print the sum of")


def test_generate_code_keyword_routing():
    # first matching keyword wins: "sum of" precedes "digit" in the table
    client = MockChatClient()
    sols = generate_code(
        "Print the sum of all digit characters.", client, n=6, sleep=lambda _: None
    )
    assert any("int(parts[0]) + int(parts[1])" in s or "v_parts[0]" in s for s in sols)
    sols = generate_code(
        "Count the vowel characters in the input.", client, n=6, sleep=lambda _: None
    )
    assert any('"aeiou"' in s for s in sols)


def test_generate_code_blank_slots_are_skipped():
    class BlankSecondSlot:
        def complete(self, request):
            if "Attempt: 2 of" in request.prompt:
                return ChatResponse(text="   ")
            return ChatResponse(text="print(1)")

    sols = generate_code("q", BlankSecondSlot(), n=3, sleep=lambda _: None)
    assert sols == ["print(1)", "print(1)"]


def test_generate_code_validates_count():
    with pytest.raises(ValueError):
        generate_code(QUESTION, MockChatClient(), n=0)


def test_generate_audit_records_each_slot(tmp_path):
    audit = AuditLog(tmp_path / "audit.jsonl")
    generate_code(QUESTION, MockChatClient(), n=2, record_id="p02", audit=audit,
                  sleep=lambda _: None)
    events = [json.loads(line) for line in (tmp_path / "audit.jsonl").read_text().splitlines()]
    assert [e["slot"] for e in events] == [1, 2]
    assert all(e["kind"] == "generate" for e in events)


# ---------------------------------------------------------------------------
# request plumbing
# ---------------------------------------------------------------------------


def test_chat_request_validation():
    with pytest.raises(ValueError):
        ChatRequest(messages=())
    with pytest.raises(ValueError):
        ChatRequest(messages=(ChatMessage("user", "hi"),), max_tokens=0)


def test_http_client_requires_api_key(monkeypatch):
    monkeypatch.delenv("PROMPTCAUSAL_API_KEY", raising=False)
    client = HttpChatClient(endpoint="http://localhost:1/v1/chat", model="m")
    with pytest.raises(TransportError, match="PROMPTCAUSAL_API_KEY"):
        client.complete(ChatRequest(messages=(ChatMessage("user", "hi"),)))
