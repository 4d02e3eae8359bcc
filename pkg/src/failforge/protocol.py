"""Detection queries and the verdict grammar.

A detector's reply must end with one rigid answer line; everything above
it is free-form reasoning. The same grammar is embedded in prompts,
parsed here, and used for training targets, so zero-shot and fine-tuned
models share one contract.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .errors import InconsistentVerdict, UnknownCategory, UnparseableVerdict
from .imaging import ImagePart
from .taxonomy import DISPLAY_NAMES, Kind, category_menu
from .templates import Template, load_template

ANSWER_LINE = re.compile(
    r"^\s*ANSWER:\s*(success|failure)(\s*\|\s*CATEGORY:\s*([a-z_]+)\s*)?\s*$",
    re.IGNORECASE,
)

GRAMMAR_TEXT = (
    "ANSWER: success\n"
    "ANSWER: failure | CATEGORY: <category>"
)


@dataclass(frozen=True)
class Verdict:
    success: bool
    category: str
    reasoning: str | None = None
    raw_text: str = ""

    def __post_init__(self):
        if self.success != (self.category == "success"):
            raise InconsistentVerdict(
                f"success={self.success} with category={self.category!r}", raw_text=self.raw_text
            )


@dataclass(frozen=True)
class DetectionQuery:
    kind: Kind
    text_prompt: str
    image_parts: tuple[ImagePart, ...]
    answer_mode: str  # "direct" | "thinking"
    template_id: str = ""


def parse_verdict(text: str, kind: Kind | str) -> Verdict:
    """Parse the last answer line of a detector reply.

    Raises UnparseableVerdict when no line matches, UnknownCategory when
    the category is outside the kind's menu, InconsistentVerdict when the
    flag and category disagree (or a failure names no category).
    """
    kind = Kind(kind)
    lines = text.splitlines()
    hit = None
    for i in range(len(lines) - 1, -1, -1):
        m = ANSWER_LINE.match(lines[i])
        if m is not None:
            hit = (i, m)
            break
    if hit is None:
        raise UnparseableVerdict("no answer line found", raw_text=text)
    i, m = hit
    flag = m.group(1).lower() == "success"
    token = m.group(3).lower() if m.group(3) else None
    reasoning = "\n".join(lines[:i]).strip() or None

    if flag:
        if token is not None and token != "success":
            raise InconsistentVerdict(f"success verdict with category {token!r}", raw_text=text)
        return Verdict(success=True, category="success", reasoning=reasoning, raw_text=text)

    if token is None:
        raise InconsistentVerdict("failure verdict without a category", raw_text=text)
    if token == "success":
        raise InconsistentVerdict("failure verdict with category 'success'", raw_text=text)
    if token not in category_menu(kind):
        raise UnknownCategory(f"category {token!r} invalid for kind {kind.value}", raw_text=text)
    return Verdict(success=False, category=token, reasoning=reasoning, raw_text=text)


def serialize_verdict(verdict: Verdict) -> str:
    """Render a verdict back into grammar-conformant text."""
    line = (
        "ANSWER: success"
        if verdict.success
        else f"ANSWER: failure | CATEGORY: {verdict.category}"
    )
    if verdict.reasoning:
        return f"{verdict.reasoning}\n{line}"
    return line


def answer_line_for(category: str) -> str:
    if category == "success":
        return "ANSWER: success"
    return f"ANSWER: failure | CATEGORY: {category}"


def _menu_block(kind: Kind) -> str:
    return "\n".join(f"- {slug} ({DISPLAY_NAMES[slug]})" for slug in category_menu(kind))


def _answer_directive(answer_mode: str) -> str:
    if answer_mode == "direct":
        return "Respond with only the final answer line, nothing else."
    if answer_mode == "thinking":
        return "Reason step by step first, then end with the final answer line."
    raise ValueError(f"unknown answer_mode {answer_mode!r}")


def _image_lines(image_parts: Sequence[ImagePart], fallback: str) -> str:
    lines = []
    for i, part in enumerate(image_parts, 1):
        label = part.label or f"{fallback} {i}"
        lines.append(f"- image {i}: {label}")
    return "\n".join(lines)


def build_plan_query(
    task: str,
    plan: Sequence[str],
    image_parts: Sequence[ImagePart],
    answer_mode: str = "thinking",
    template: Template | None = None,
) -> DetectionQuery:
    """Eq.-style plan check: initial image + task + numbered plan."""
    if not plan:
        raise ValueError("plan must be non-empty")
    template = template or load_template("detect_plan_v1")
    text = template.render(
        task=task,
        plan="\n".join(f"{i}. {step}" for i, step in enumerate(plan, 1)),
        images=_image_lines(image_parts, "initial view"),
        category_menu=_menu_block(Kind.PLAN),
        answer_grammar=GRAMMAR_TEXT,
        answer_directive=_answer_directive(answer_mode),
    )
    return DetectionQuery(
        kind=Kind.PLAN,
        text_prompt=text,
        image_parts=tuple(image_parts),
        answer_mode=answer_mode,
        template_id=template.template_id,
    )


def build_exec_query(
    task: str,
    subtask: str,
    image_parts: Sequence[ImagePart],
    answer_mode: str = "thinking",
    image_mode: str = "separated",
    template: Template | None = None,
) -> DetectionQuery:
    """Eq.-style execution check over before/after images."""
    template = template or load_template("detect_exec_v1")
    if image_mode == "grid":
        layout = (
            "The single image is a grid: each row is one camera view, the left "
            "column shows the scene before execution and the right column after."
        )
        images = _image_lines(image_parts, "grid")
    elif image_mode == "separated":
        layout = "Start images show the scene before execution; end images show it after."
        half = len(image_parts) // 2
        lines = []
        for i, part in enumerate(image_parts, 1):
            if part.label:
                label = part.label
            elif i <= half:
                label = f"start view {i}"
            else:
                label = f"end view {i - half}"
            lines.append(f"- image {i}: {label}")
        images = "\n".join(lines)
    else:
        raise ValueError(f"unknown image_mode {image_mode!r}")
    text = template.render(
        task=task,
        subtask=subtask,
        layout=layout,
        images=images,
        category_menu=_menu_block(Kind.EXECUTION),
        answer_grammar=GRAMMAR_TEXT,
        answer_directive=_answer_directive(answer_mode),
    )
    return DetectionQuery(
        kind=Kind.EXECUTION,
        text_prompt=text,
        image_parts=tuple(image_parts),
        answer_mode=answer_mode,
        template_id=template.template_id,
    )
