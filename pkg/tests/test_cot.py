"""Reasoning-trace generation: grounding, prompts, validation, regeneration."""

from __future__ import annotations

import pytest

from failforge import (
    GroundingInfo,
    ReasoningTrace,
    build_cot_prompt_execution,
    build_cot_prompt_planning,
    generate_cot,
    validate_trace,
)
from failforge.cot import annotate_samples, build_cot_prompt, describe_failure
from failforge.errors import InvalidTrace
from failforge.gateway import ChatResponse
from failforge.perturb import (
    perturb_semantic_mismatch,
    perturb_wrong_object,
    success_execution_sample,
    success_planning_sample,
)
from failforge.taxonomy import FailureLabel
from failforge.testing import scripted_trace


class FakeGateway:
    def __init__(self, replies):
        self.replies = list(replies)
        self.requests = []

    def chat_completion(self, req):
        self.requests.append(req)
        return ChatResponse(text=self.replies.pop(0), usage={}, attempts=1)

    def prompt(self, i: int) -> str:
        return self.requests[i].messages[-1].parts[0].text


# -- grounding ---------------------------------------------------------------


def test_grounding_collects_scene_and_state(by_id):
    ep = by_id["ep00"]
    s = success_planning_sample(ep, 0)
    g = GroundingInfo.for_sample(s, ep)
    assert ("spoon", "utensil", "on the table") in g.object_entries
    assert ("pot", "cookware", "") in g.object_entries
    assert g.robot_state_desc == "gripper open, end-effector at [0.400 0.000 0.300]"
    assert g.failure_reason == ""


def test_grounding_closed_gripper_without_pose(by_id):
    ep = by_id["ep01"]
    g = GroundingInfo.for_sample(success_planning_sample(ep, 0), ep)
    assert g.robot_state_desc == "gripper closed"


def test_describe_failure_names_category_and_rule(by_id, lex):
    s = perturb_semantic_mismatch(by_id["ep00"], 1, 4, lex)
    text = describe_failure(s.label, s.provenance)
    assert text == (
        "Wrong object state or placement: the target state or placement is wrong "
        "(injected by rule semantic_mismatch)"
    )
    assert describe_failure(FailureLabel.success_label()) == ""


# -- prompt building -----------------------------------------------------------


def test_planning_prompt_contains_per_step_checks(by_id, lex):
    ep = by_id["ep00"]
    s = perturb_wrong_object(ep, 0, lex)
    g = GroundingInfo.for_sample(s, ep)
    prompt = build_cot_prompt_planning(s, g)
    assert '1. Verify subtask 1: "pick up the pot" against the scene and the task.' in prompt.text
    assert '2. Verify subtask 2: "put the spoon on the towel"' in prompt.text
    assert "- image 1: initial scene, camera front" in prompt.text
    assert "Known ground truth: this example is a failure" in prompt.text
    assert prompt.text.rstrip().endswith("ANSWER: failure | CATEGORY: wrong_object_manipulated")
    assert prompt.image_refs == (s.initial_image,)
    assert prompt.template_id.startswith("cot_planning_v1:")


def test_success_prompt_has_no_failure_section(by_id):
    ep = by_id["ep00"]
    s = success_planning_sample(ep, 0)
    prompt = build_cot_prompt(s, GroundingInfo.for_sample(s, ep))
    assert "Known ground truth" not in prompt.text
    assert prompt.text.rstrip().endswith("ANSWER: success")


def test_execution_prompt_lists_views_in_order(by_id):
    ep = by_id["ep00"]
    s = success_execution_sample(ep, 1)
    prompt = build_cot_prompt_execution(s, GroundingInfo.for_sample(s, ep))
    assert "- image 1: start view 1, camera front" in prompt.text
    assert "- image 2: start view 2, camera wrist" in prompt.text
    assert "- image 3: end view 1, camera front" in prompt.text
    assert prompt.image_refs == tuple(s.start_images) + tuple(s.end_images)
    assert prompt.template_id.startswith("cot_execution_v1:")


# -- trace validation -----------------------------------------------------------


def test_trace_token_estimate_and_verdict_line():
    t = ReasoningTrace.from_text("one two three\n\nANSWER: success\n")
    assert t.token_estimate == 5
    assert t.verdict_line == "ANSWER: success"
    assert ReasoningTrace.from_text("").verdict_line == ""


def test_validate_trace_bounds_and_label_match():
    ok = FailureLabel.success_label()
    t30 = ReasoningTrace.from_text("w " * 28 + "\nANSWER: success")
    assert t30.token_estimate == 30
    assert validate_trace(t30, ok, kind="plan")
    t29 = ReasoningTrace.from_text("w " * 27 + "\nANSWER: success")
    assert not validate_trace(t29, ok, kind="plan")
    long = ReasoningTrace.from_text("w " * 399 + "\nANSWER: success")
    assert not validate_trace(long, ok, kind="plan")

    wrong = ReasoningTrace.from_text(scripted_trace("ANSWER: failure | CATEGORY: wrong_order"))
    assert not validate_trace(wrong, ok, kind="plan")
    assert validate_trace(wrong, FailureLabel.failure("wrong_order"), kind="plan")


def test_validate_trace_respects_kind_menu():
    t = ReasoningTrace.from_text(scripted_trace("ANSWER: failure | CATEGORY: no_progress"))
    label = FailureLabel.failure("no_progress")
    assert validate_trace(t, label, kind="execution")
    assert not validate_trace(t, label, kind="plan")  # slug not in the plan menu
    assert validate_trace(t, label)  # kind unknown: either menu may parse it


# -- generation -----------------------------------------------------------------


def test_generate_cot_returns_first_valid_trace(by_id):
    ep = by_id["ep00"]
    s = success_planning_sample(ep, 0)
    g = GroundingInfo.for_sample(s, ep)
    gw = FakeGateway([scripted_trace("ANSWER: success")])
    trace = gw_trace = generate_cot(s, g, gw)
    assert trace.verdict_line == "ANSWER: success"
    assert len(gw.requests) == 1
    assert gw.requests[0].max_tokens == 800  # generation budget tracks the cap
    assert "Regeneration" not in gw.prompt(0)
    assert gw_trace.token_estimate >= 30


def test_generate_cot_regenerates_on_mismatch(by_id, lex):
    ep = by_id["ep00"]
    s = perturb_wrong_object(ep, 0, lex)
    g = GroundingInfo.for_sample(s, ep)
    gw = FakeGateway(
        [
            scripted_trace("ANSWER: success"),  # contradicts the label
            "too short",
            scripted_trace("ANSWER: failure | CATEGORY: wrong_object_manipulated"),
        ]
    )
    trace = generate_cot(s, g, gw, max_regen=2)
    assert trace.verdict_line == "ANSWER: failure | CATEGORY: wrong_object_manipulated"
    assert len(gw.requests) == 3
    assert gw.prompt(1).endswith("(Regeneration 1: the previous trace failed validation.)")
    assert gw.prompt(2).endswith("(Regeneration 2: the previous trace failed validation.)")


def test_generate_cot_gives_up_after_budget(by_id):
    ep = by_id["ep00"]
    s = success_planning_sample(ep, 0)
    g = GroundingInfo.for_sample(s, ep)
    gw = FakeGateway(["nope", "still nope"])
    with pytest.raises(InvalidTrace):
        generate_cot(s, g, gw, max_regen=1)
    assert len(gw.requests) == 2


def test_generate_cot_attaches_pixel_payloads(by_id, corpus_root):
    ep = by_id["ep00"]
    s = success_execution_sample(ep, 1)
    g = GroundingInfo.for_sample(s, ep)
    gw = FakeGateway([scripted_trace("ANSWER: success")])
    generate_cot(s, g, gw, corpus_root=corpus_root)
    parts = gw.requests[0].messages[-1].parts
    assert len(parts) == 1 + 4  # prompt text + 2 start views + 2 end views
    assert all(p.b64 for p in parts[1:])


def test_annotate_samples_partitions_failures(by_id, corpus):
    ep = by_id["ep00"]
    good = success_planning_sample(ep, 0)
    bad = success_planning_sample(ep, 1)
    episodes = {e.episode_id: e for e in corpus}
    # first sample (by id order) gets the one valid trace, the other only junk
    gw = FakeGateway([scripted_trace("ANSWER: success"), "junk", "junk", "junk"])
    first, second = sorted([good, bad], key=lambda s: s.sample_id)
    annotated, failures = annotate_samples([bad, good], episodes, gw, max_regen=2)
    assert [s.sample_id for s in annotated] == [first.sample_id, second.sample_id]
    assert len(failures) == 1
    failed_id, msg = failures[0]
    assert failed_id == second.sample_id
    assert "no valid trace" in msg
    by_sid = {s.sample_id: s for s in annotated}
    assert by_sid[first.sample_id].cot is not None
    assert by_sid[second.sample_id].cot is None


def test_annotate_samples_flags_unknown_episode(by_id):
    s = success_planning_sample(by_id["ep00"], 0)
    annotated, failures = annotate_samples([s], {}, FakeGateway([]))
    assert failures == [(s.sample_id, "episode not in corpus")]
    assert annotated == [s]
