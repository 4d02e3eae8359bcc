"""LLM-backed plan and subtask rewriting, with structural re-validation.

Every mode has a deterministic rule as fallback: if the endpoint is down,
or its reply fails to parse or violates the mode's structural contract
after the retry budget, the caller falls back to the rule path.
"""

from __future__ import annotations

import re
from typing import Callable, Sequence

from ..episode import Episode
from ..errors import GatewayError
from ..gateway import ModelGateway, text_request
from ..templates import Template, load_template

PERTURB_MODEL_ID = "perturber"
_ATTEMPTS = 2

_NUMBERED = re.compile(r"^\s*\d+[.)]\s*(.+?)\s*$")


def parse_numbered_plan(text: str) -> tuple[str, ...] | None:
    """Strictly parse a numbered step list; None if any line is not a step."""
    steps = []
    for line in text.splitlines():
        if not line.strip():
            continue
        m = _NUMBERED.match(line)
        if m is None:
            return None
        steps.append(m.group(1))
    return tuple(steps) if steps else None


def _numbered(plan: Sequence[str]) -> str:
    return "\n".join(f"{i}. {step}" for i, step in enumerate(plan, 1))


def llm_plan_rewrite(
    gateway: ModelGateway,
    ep: Episode,
    directive: str,
    validator: Callable[[tuple[str, ...]], bool],
    template: Template | None = None,
) -> tuple[str, ...] | None:
    """Ask the endpoint for an altered plan; None when no valid reply."""
    template = template or load_template("perturb_plan_v1")
    plan = tuple(s.instruction for s in ep.plan_steps)
    base_prompt = template.render(
        task=ep.task_instruction,
        plan=_numbered(plan),
        objects=", ".join(ep.object_names) or "(none listed)",
        directive=directive,
    )
    for attempt in range(_ATTEMPTS):
        prompt = base_prompt if attempt == 0 else f"{base_prompt}\n\nRetry {attempt}: previous reply was invalid."
        try:
            resp = gateway.chat_completion(text_request(PERTURB_MODEL_ID, prompt))
        except GatewayError:
            return None
        candidate = parse_numbered_plan(resp.text)
        if candidate is None or candidate == plan:
            continue
        if validator(candidate):
            return candidate
    return None


def llm_subtask_rewrite(
    gateway: ModelGateway,
    instruction: str,
    object_names: Sequence[str],
    template: Template | None = None,
) -> str | None:
    """Ask the endpoint for an altered subtask instruction; None when invalid."""
    template = template or load_template("perturb_subtask_v1")
    base_prompt = template.render(
        instruction=instruction,
        objects=", ".join(object_names) or "(none listed)",
    )
    for attempt in range(_ATTEMPTS):
        prompt = base_prompt if attempt == 0 else f"{base_prompt}\n\nRetry {attempt}: previous reply was invalid."
        try:
            resp = gateway.chat_completion(text_request(PERTURB_MODEL_ID, prompt))
        except GatewayError:
            return None
        lines = [ln.strip() for ln in resp.text.splitlines() if ln.strip()]
        if len(lines) != 1:
            continue
        candidate = lines[0]
        if candidate and candidate != instruction:
            return candidate
    return None
