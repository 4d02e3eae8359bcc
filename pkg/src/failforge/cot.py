"""Grounded reasoning-trace generation and validation.

Prompts carry the scene grounding and, for failure samples, the injected
failure reason, then demand a final verdict line. A generated trace is
only kept when that line parses and agrees with the sample's own label.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from .episode import Episode, FrameRef
from .errors import InvalidTrace, VerdictError
from .gateway import ModelGateway, text_request
from .imaging import load_image_part
from .protocol import answer_line_for, parse_verdict
from .samples import ExecutionSample, PlanningSample, Provenance, Sample, with_cot
from .taxonomy import DISPLAY_NAMES, FailureLabel, Kind
from .templates import Template, load_template

COT_MODEL_ID = "annotator"
MIN_TRACE_TOKENS = 30
MAX_TRACE_TOKENS = 400

_FAILURE_HINTS = {
    "wrong_object_manipulated": "the wrong object is acted on",
    "wrong_state_or_placement": "the target state or placement is wrong",
    "wrong_order": "the steps violate their causal order",
    "missing_subtask": "a required subtask is missing",
    "contradictory_subtasks": "two subtasks contradict each other",
    "no_gripper_close": "the gripper never closed on the object",
    "imprecise_grasp_or_push": "the grasp or push missed its target",
    "no_progress": "the scene shows no progress on the subtask",
}


@dataclass(frozen=True)
class GroundingInfo:
    object_entries: tuple[tuple[str, str, str], ...]  # (name, category, location)
    robot_state_desc: str = ""
    failure_reason: str = ""

    @classmethod
    def for_sample(cls, sample: Sample, ep: Episode) -> "GroundingInfo":
        entries = tuple(
            (o.name, o.category or "", o.location_desc or "") for o in ep.scene_objects
        )
        state = ""
        if ep.robot_states:
            r = ep.robot_states[0]
            pose = " ".join(f"{v:.3f}" for v in r.ee_pose)
            state = f"gripper {'open' if r.gripper_open else 'closed'}"
            if pose:
                state += f", end-effector at [{pose}]"
        return cls(
            object_entries=entries,
            robot_state_desc=state,
            failure_reason=describe_failure(sample.label, sample.provenance),
        )


def describe_failure(label: FailureLabel, provenance: Provenance | None = None) -> str:
    """Human-readable injected-failure description; empty for successes."""
    if label.success:
        return ""
    hint = _FAILURE_HINTS.get(label.category, "")
    text = f"{DISPLAY_NAMES.get(label.category, label.category)}"
    if hint:
        text += f": {hint}"
    if provenance is not None:
        text += f" (injected by rule {provenance.base_mode})"
    return text


@dataclass(frozen=True)
class ReasoningTrace:
    text: str
    token_estimate: int
    verdict_line: str

    @classmethod
    def from_text(cls, text: str) -> "ReasoningTrace":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        return cls(
            text=text,
            token_estimate=len(text.split()),
            verdict_line=lines[-1].strip() if lines else "",
        )


@dataclass(frozen=True)
class Prompt:
    text: str
    image_refs: tuple[FrameRef, ...]
    template_id: str


def _render_grounding(g: GroundingInfo) -> str:
    lines = ["Scene information:"]
    if g.object_entries:
        for name, category, location in g.object_entries:
            desc = name
            if category:
                desc += f" ({category})"
            if location:
                desc += f", {location}"
            lines.append(f"- {desc}")
    else:
        lines.append("- no object annotations available")
    if g.robot_state_desc:
        lines.append(f"Robot state: {g.robot_state_desc}")
    return "\n".join(lines)


def _failure_section(g: GroundingInfo) -> str:
    if not g.failure_reason:
        return ""
    return (
        "Known ground truth: this example is a failure, "
        f"{g.failure_reason}. Your reasoning must surface this.\n\n"
    )


def build_cot_prompt_planning(
    sample: PlanningSample, g: GroundingInfo, template: Template | None = None
) -> Prompt:
    template = template or load_template("cot_planning_v1")
    checks = "\n".join(
        f"{i}. Verify subtask {i}: \"{step}\" against the scene and the task."
        for i, step in enumerate(sample.plan, 1)
    )
    text = template.render(
        task=sample.task_instruction,
        plan="\n".join(f"{i}. {s}" for i, s in enumerate(sample.plan, 1)),
        grounding=_render_grounding(g),
        images=f"- image 1: initial scene, camera {sample.initial_image.camera_id}",
        failure_section=_failure_section(g),
        checks=checks,
        required_answer=answer_line_for(sample.label.category),
    )
    return Prompt(text=text, image_refs=(sample.initial_image,), template_id=template.template_id)


def build_cot_prompt_execution(
    sample: ExecutionSample, g: GroundingInfo, template: Template | None = None
) -> Prompt:
    template = template or load_template("cot_execution_v1")
    refs = tuple(sample.start_images) + tuple(sample.end_images)
    lines = [
        f"- image {i}: start view {i}, camera {f.camera_id}"
        for i, f in enumerate(sample.start_images, 1)
    ]
    lines += [
        f"- image {len(sample.start_images) + j}: end view {j}, camera {f.camera_id}"
        for j, f in enumerate(sample.end_images, 1)
    ]
    text = template.render(
        task=sample.task_instruction,
        subtask=sample.subtask_instruction,
        grounding=_render_grounding(g),
        images="\n".join(lines),
        failure_section=_failure_section(g),
        required_answer=answer_line_for(sample.label.category),
    )
    return Prompt(text=text, image_refs=refs, template_id=template.template_id)


def build_cot_prompt(sample: Sample, g: GroundingInfo, template: Template | None = None) -> Prompt:
    if isinstance(sample, PlanningSample):
        return build_cot_prompt_planning(sample, g, template)
    return build_cot_prompt_execution(sample, g, template)


def validate_trace(
    trace: ReasoningTrace,
    label: FailureLabel,
    kind: Kind | str | None = None,
    min_tokens: int = MIN_TRACE_TOKENS,
    max_tokens: int = MAX_TRACE_TOKENS,
) -> bool:
    """True iff the trace's verdict parses, matches the label, and fits bounds."""
    if not (min_tokens <= trace.token_estimate <= max_tokens):
        return False
    kinds = [Kind(kind)] if kind is not None else [Kind.PLAN, Kind.EXECUTION]
    for k in kinds:
        try:
            verdict = parse_verdict(trace.text, k)
        except VerdictError:
            continue
        return verdict.success == label.success and verdict.category == label.category
    return False


def generate_cot(
    sample: Sample,
    g: GroundingInfo,
    gateway: ModelGateway,
    corpus_root: str | Path | None = None,
    model_id: str = COT_MODEL_ID,
    max_regen: int = 2,
    min_tokens: int = MIN_TRACE_TOKENS,
    max_tokens: int = MAX_TRACE_TOKENS,
    template: Template | None = None,
) -> ReasoningTrace:
    """Generate one validated trace; InvalidTrace after 1+max_regen attempts."""
    prompt = build_cot_prompt(sample, g, template)
    images = ()
    if corpus_root is not None:
        images = tuple(
            load_image_part(Path(corpus_root) / ref.path, label=f"camera {ref.camera_id}")
            for ref in prompt.image_refs
        )
    last = None
    for attempt in range(1 + max_regen):
        text = prompt.text
        if attempt:
            text += f"\n\n(Regeneration {attempt}: the previous trace failed validation.)"
        resp = gateway.chat_completion(
            text_request(model_id, text, images=images, max_tokens=max_tokens * 2)
        )
        trace = ReasoningTrace.from_text(resp.text)
        if validate_trace(trace, sample.label, sample.kind, min_tokens, max_tokens):
            return trace
        last = trace
    raise InvalidTrace(
        f"{sample.sample_id}: no valid trace in {1 + max_regen} attempts "
        f"(last verdict line: {last.verdict_line!r})"
    )


def annotate_samples(
    samples: Sequence[Sample],
    episodes: Mapping[str, Episode],
    gateway: ModelGateway,
    **kwargs,
) -> tuple[list[Sample], list[tuple[str, str]]]:
    """Attach traces to every sample; returns (annotated, [(sample_id, error)]).

    Samples whose generation failed keep cot=None and land in the error list.
    Output order is by sample_id either way.
    """
    annotated: list[Sample] = []
    failures: list[tuple[str, str]] = []
    for sample in sorted(samples, key=lambda s: s.sample_id):
        ep = episodes.get(sample.provenance.episode_id)
        if ep is None:
            failures.append((sample.sample_id, "episode not in corpus"))
            annotated.append(sample)
            continue
        g = GroundingInfo.for_sample(sample, ep)
        try:
            trace = generate_cot(sample, g, gateway, **kwargs)
        except InvalidTrace as e:
            failures.append((sample.sample_id, str(e)))
            annotated.append(sample)
            continue
        annotated.append(with_cot(sample, trace.text))
    return annotated, failures
