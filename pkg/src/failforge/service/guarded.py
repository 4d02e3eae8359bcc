"""Bounded-retry guarded execution.

One initial attempt plus up to max_retries reruns, stopping early on the
first success verdict. The service stays robot-agnostic: executor and
verifier are plain callables supplied by the host framework, and
retry_target is advisory metadata telling it what to rerun.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable

from ..errors import ExecutorError
from ..protocol import Verdict
from ..taxonomy import Kind


@dataclass(frozen=True)
class RetryPolicy:
    max_retries: int = 3
    retry_target: str = "reexecute"  # "replan" | "reexecute"

    def __post_init__(self):
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if self.retry_target not in ("replan", "reexecute"):
            raise ValueError(f"unknown retry_target {self.retry_target!r}")


def retry_target_for(kind: Kind | str) -> str:
    """What a failure of this kind should rerun: the planner or the motion."""
    return "replan" if Kind(kind) is Kind.PLAN else "reexecute"


@dataclass
class GuardedOutcome:
    final_verdict: Verdict
    attempts: int
    attempt_log: list[tuple[int, Verdict]] = field(default_factory=list)


def run_guarded_step(
    executor: Callable[[], Any],
    verifier: Callable[[Any], Verdict],
    policy: RetryPolicy | None = None,
) -> GuardedOutcome:
    """Execute, verify, and rerun failures up to policy.max_retries times.

    The executor must be safe to re-invoke; that is the caller's contract.
    Executor exceptions surface as ExecutorError carrying the attempts
    completed so far.
    """
    policy = policy or RetryPolicy()
    log: list[tuple[int, Verdict]] = []
    for attempt in range(1, policy.max_retries + 2):
        try:
            result = executor()
        except Exception as e:
            raise ExecutorError(
                f"executor raised on attempt {attempt}: {e}", attempt_log=log, cause=e
            ) from e
        verdict = verifier(result)
        log.append((attempt, verdict))
        if verdict.success:
            break
    return GuardedOutcome(final_verdict=log[-1][1], attempts=len(log), attempt_log=log)
