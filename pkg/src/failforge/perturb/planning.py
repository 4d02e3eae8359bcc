"""The five planning-failure rules plus balanced batch generation.

Every op takes (episode, seed, lexicon, optional gateway) and emits a
labeled PlanningSample. The rule path is a pure function of its inputs;
with a gateway, the LLM path runs first and structural validation gates
its output, falling back to the rule on any miss.
"""

from __future__ import annotations

from collections import Counter
from typing import Sequence

from ..episode import Episode
from ..errors import NotApplicable
from ..lexicon import Lexicon, load_lexicon
from ..samples import PlanningSample, Provenance
from ..seeding import seeded_choice, stable_id
from ..taxonomy import FailureLabel
from ..textmatch import find_occurrences, replace_occurrence
from . import llm
from .common import GenConfig, generate_balanced, initial_frame, plan_strings

PLANNING_MODES = (
    "contradictory_subtasks",
    "missing_subtask",
    "wrong_object_manipulated",
    "wrong_order",
    "wrong_state_or_placement",
)


def _sample(
    ep: Episode,
    mode: str,
    seed: int,
    plan: Sequence[str],
    category: str,
    generator: str = "rule",
) -> PlanningSample:
    label = FailureLabel.success_label() if category == "success" else FailureLabel.failure(category)
    return PlanningSample(
        sample_id=stable_id(ep.episode_id, mode, seed),
        task_instruction=ep.task_instruction,
        plan=tuple(plan),
        initial_image=initial_frame(ep),
        label=label,
        provenance=Provenance(episode_id=ep.episode_id, mode=mode, seed=seed, generator=generator),
    )


def _one_step_changed(original: tuple[str, ...], candidate: tuple[str, ...]) -> bool:
    if len(candidate) != len(original):
        return False
    return sum(a != b for a, b in zip(original, candidate)) == 1


def _is_subsequence(needle: Sequence[str], haystack: Sequence[str]) -> bool:
    it = iter(haystack)
    return all(any(step == h for h in it) for step in needle)


def perturb_wrong_object(
    ep: Episode, seed: int, lex: Lexicon | None = None, gateway=None
) -> PlanningSample:
    """Replace one object mention in one step with a different scene object."""
    mode = "wrong_object_manipulated"
    names = ep.object_names
    if len(names) < 2:
        raise NotApplicable(f"{ep.episode_id}: needs at least 2 distinct scene objects")
    plan = plan_strings(ep)
    mentions: dict[str, tuple[int, str]] = {}
    for i, instruction in enumerate(plan):
        for occ in find_occurrences(instruction, names):
            mentions.setdefault(f"{i:04d}|{occ.phrase}", (i, occ.phrase))
    if not mentions:
        raise NotApplicable(f"{ep.episode_id}: no scene object mentioned in any step")

    if gateway is not None:

        def ok(candidate: tuple[str, ...]) -> bool:
            if not _one_step_changed(plan, candidate):
                return False
            changed = next(c for o, c in zip(plan, candidate) if o != c)
            return bool(find_occurrences(changed, names))

        edited = llm.llm_plan_rewrite(
            gateway, ep, "make exactly one step manipulate a different visible object", ok
        )
        if edited is not None:
            return _sample(ep, mode, seed, edited, mode, generator="llm")

    step_idx, name = mentions[seeded_choice(sorted(mentions), seed, presorted=True)]
    replacement = seeded_choice([n for n in names if n != name], seed)
    occ = find_occurrences(plan[step_idx], [name])[0]
    new_plan = list(plan)
    new_plan[step_idx] = replace_occurrence(plan[step_idx], occ, replacement)
    return _sample(ep, mode, seed, new_plan, mode)


def perturb_wrong_state_or_placement(
    ep: Episode, seed: int, lex: Lexicon | None = None, gateway=None
) -> PlanningSample:
    """Swap one place preposition within its group, or flip one state verb."""
    mode = "wrong_state_or_placement"
    lex = lex or load_lexicon()
    plan = plan_strings(ep)
    candidates: dict[str, tuple[int, str, object]] = {}
    for i, instruction in enumerate(plan):
        for occ in lex.find_preposition_occurrences(instruction):
            candidates[f"{i:04d}|{occ.start:06d}|prep|{occ.phrase}"] = (i, "prep", occ)
        for occ in lex.find_antonym_occurrences(instruction):
            candidates[f"{i:04d}|{occ.start:06d}|state|{occ.phrase}"] = (i, "state", occ)
    if not candidates:
        raise NotApplicable(f"{ep.episode_id}: no preposition or antonym verb in any step")

    if gateway is not None:
        edited = llm.llm_plan_rewrite(
            gateway,
            ep,
            "change exactly one step's target placement or object state, keeping objects the same",
            lambda cand: _one_step_changed(plan, cand),
        )
        if edited is not None:
            return _sample(ep, mode, seed, edited, mode, generator="llm")

    step_idx, kind, occ = candidates[seeded_choice(sorted(candidates), seed, presorted=True)]
    if kind == "prep":
        replacement = seeded_choice(lex.preposition_alternatives(occ.phrase), seed, presorted=True)
    else:
        replacement = lex.antonym_of(occ.phrase)
    new_plan = list(plan)
    new_plan[step_idx] = replace_occurrence(plan[step_idx], occ, replacement)
    return _sample(ep, mode, seed, new_plan, mode)


def perturb_wrong_order(
    ep: Episode, seed: int, lex: Lexicon | None = None, gateway=None
) -> PlanningSample:
    """Swap one seeded adjacent pair of steps."""
    mode = "wrong_order"
    plan = plan_strings(ep)
    if len(plan) < 2:
        raise NotApplicable(f"{ep.episode_id}: single-step plan cannot be reordered")
    # a swap of identical neighbors would not change the plan
    pairs = [i for i in range(len(plan) - 1) if plan[i] != plan[i + 1]]
    if not pairs:
        raise NotApplicable(f"{ep.episode_id}: all adjacent steps identical")

    if gateway is not None:

        def ok(candidate: tuple[str, ...]) -> bool:
            return (
                Counter(candidate) == Counter(plan)
                and sum(a != b for a, b in zip(plan, candidate)) >= 2
            )

        edited = llm.llm_plan_rewrite(
            gateway, ep, "reorder the steps so a causal dependency is violated", ok
        )
        if edited is not None:
            return _sample(ep, mode, seed, edited, mode, generator="llm")

    i = pairs[seed % len(pairs)]
    new_plan = list(plan)
    new_plan[i], new_plan[i + 1] = new_plan[i + 1], new_plan[i]
    return _sample(ep, mode, seed, new_plan, mode)


def perturb_missing_subtask(
    ep: Episode, seed: int, lex: Lexicon | None = None, gateway=None
) -> PlanningSample:
    """Drop the seeded step."""
    mode = "missing_subtask"
    plan = plan_strings(ep)
    if len(plan) < 2:
        raise NotApplicable(f"{ep.episode_id}: cannot drop the only step")

    if gateway is not None:
        edited = llm.llm_plan_rewrite(
            gateway,
            ep,
            "remove one step that the task still implicitly requires",
            lambda cand: len(cand) == len(plan) - 1 and _is_subsequence(cand, plan),
        )
        if edited is not None:
            return _sample(ep, mode, seed, edited, mode, generator="llm")

    idx = seed % len(plan)
    return _sample(ep, mode, seed, plan[:idx] + plan[idx + 1 :], mode)


def perturb_contradictory(
    ep: Episode, seed: int, lex: Lexicon | None = None, gateway=None
) -> PlanningSample:
    """Insert, after a seeded step, its antonym-rewritten copy."""
    mode = "contradictory_subtasks"
    lex = lex or load_lexicon()
    plan = plan_strings(ep)
    bearing = [i for i, step in enumerate(plan) if lex.find_antonym_occurrences(step)]
    if not bearing:
        raise NotApplicable(f"{ep.episode_id}: no step carries an antonym verb")

    if gateway is not None:
        edited = llm.llm_plan_rewrite(
            gateway,
            ep,
            "insert one new step that contradicts an existing step",
            lambda cand: len(cand) == len(plan) + 1 and _is_subsequence(plan, cand),
        )
        if edited is not None:
            return _sample(ep, mode, seed, edited, mode, generator="llm")

    i = bearing[seed % len(bearing)]
    inserted = lex.rewrite_antonyms(plan[i])
    new_plan = list(plan[: i + 1]) + [inserted] + list(plan[i + 1 :])
    return _sample(ep, mode, seed, new_plan, mode)


def success_planning_sample(ep: Episode, seed: int) -> PlanningSample:
    """The ground-truth plan, verbatim."""
    return _sample(ep, "success", seed, plan_strings(ep), "success")


_OPS = {
    "contradictory_subtasks": perturb_contradictory,
    "missing_subtask": perturb_missing_subtask,
    "wrong_object_manipulated": perturb_wrong_object,
    "wrong_order": perturb_wrong_order,
    "wrong_state_or_placement": perturb_wrong_state_or_placement,
}


def generate_planning_samples(
    corpus: Sequence[Episode],
    cfg: GenConfig,
    lex: Lexicon | None = None,
    gateway=None,
) -> list[PlanningSample]:
    lex = lex or load_lexicon()
    ops = {
        mode: (lambda ep, seed, op=op: op(ep, seed, lex, gateway))
        for mode, op in _OPS.items()
    }
    uniform = {mode: 1.0 for mode in PLANNING_MODES}
    return generate_balanced(corpus, cfg, ops, success_planning_sample, uniform)
