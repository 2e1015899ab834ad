"""Sandboxed execution of candidate programs against stdin/stdout tests.

Each test case runs the program in a fresh interpreter subprocess with a
wall-clock timeout and an address-space limit.  Outputs are compared after
normalising trailing whitespace.  Cells are evaluated independently (a
bounded thread pool drives the subprocesses) and merged back in test order,
so results do not depend on scheduling.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import sys
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence, Tuple

from promptcausal.dataset import TestCase
from promptcausal.errors import SandboxError

__all__ = [
    "PASS",
    "WRONG_OUTPUT",
    "RUNTIME_ERROR",
    "TIMEOUT",
    "STATUSES",
    "ExecutionLimits",
    "TestResult",
    "ExecutionOutcome",
    "run_tests",
]

PASS = "pass"
WRONG_OUTPUT = "wrong_output"
RUNTIME_ERROR = "runtime_error"
TIMEOUT = "timeout"
STATUSES = (PASS, WRONG_OUTPUT, RUNTIME_ERROR, TIMEOUT)

#: Measurement slack allowed on top of the configured timeout: a timed-out
#: cell reports wall_time in [timeout, timeout + GRACE_S].
GRACE_S = 1.0


@dataclass(frozen=True)
class ExecutionLimits:
    """Per-test resource limits."""

    timeout_s: float = 4.0
    memory_mb: int = 256


@dataclass(frozen=True)
class TestResult:
    """Outcome of one program run against one test case."""

    status: str
    wall_time: float
    detail: str = ""

    def __post_init__(self) -> None:
        if self.status not in STATUSES:
            raise ValueError(f"unknown status {self.status!r}")


@dataclass(frozen=True)
class ExecutionOutcome:
    """Results for one program over a full test list, in test order."""

    cells: Tuple[TestResult, ...]

    def count(self, status: str) -> int:
        return sum(1 for cell in self.cells if cell.status == status)

    def rate(self, status: str) -> Fraction:
        """Exact fraction of cells with the given status.

        Rates over the four statuses always sum to exactly 1.
        """
        if not self.cells:
            raise ValueError("no cells")
        return Fraction(self.count(status), len(self.cells))


def _normalize_output(text: str) -> str:
    lines = [line.rstrip() for line in text.rstrip("\r\n").splitlines()]
    return "\n".join(lines)


def _make_limiter(memory_mb: int):
    def set_limits() -> None:
        try:
            import resource

            soft = memory_mb * 1024 * 1024
            resource.setrlimit(resource.RLIMIT_AS, (soft, soft))
        except (ImportError, ValueError, OSError):
            pass

    return set_limits


def _run_one(
    program_path: str,
    interpreter: Sequence[str],
    case: TestCase,
    limits: ExecutionLimits,
) -> TestResult:
    cmd = [*interpreter, program_path]
    start = time.monotonic()
    try:
        proc = subprocess.run(
            cmd,
            input=case.stdin,
            capture_output=True,
            text=True,
            errors="replace",
            timeout=limits.timeout_s,
            preexec_fn=_make_limiter(limits.memory_mb) if os.name == "posix" else None,
        )
    except subprocess.TimeoutExpired:
        return TestResult(TIMEOUT, time.monotonic() - start)
    wall = time.monotonic() - start
    if proc.returncode != 0:
        tail = proc.stderr.strip().splitlines()
        return TestResult(RUNTIME_ERROR, wall, detail=tail[-1] if tail else "")
    if _normalize_output(proc.stdout) == _normalize_output(case.expected_stdout):
        return TestResult(PASS, wall)
    return TestResult(WRONG_OUTPUT, wall)


def run_tests(
    program: str,
    tests: Sequence[TestCase],
    limits: ExecutionLimits = ExecutionLimits(),
    interpreter: Sequence[str] = (),
    max_workers: int = 4,
) -> ExecutionOutcome:
    """Run ``program`` once per test case and classify each run.

    ``interpreter`` defaults to the current Python executable.  Raises
    :class:`SandboxError` if the interpreter cannot be found, and ValueError
    for an empty test list.
    """
    if not tests:
        raise ValueError("run_tests requires at least one test case")
    if not interpreter:
        interpreter = (sys.executable or "python3",)
    resolved = shutil.which(interpreter[0])
    if resolved is None:
        raise SandboxError(f"interpreter not found: {interpreter[0]!r}")
    cmd = (resolved, *interpreter[1:])
    with tempfile.TemporaryDirectory(prefix="promptcausal-run-") as workdir:
        program_path = os.path.join(workdir, "program.py")
        with open(program_path, "w", encoding="utf-8") as handle:
            handle.write(program)
        workers = max(1, min(max_workers, len(tests)))
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = list(
                pool.map(lambda case: _run_one(program_path, cmd, case, limits), tests)
            )
    return ExecutionOutcome(cells=tuple(cells))
