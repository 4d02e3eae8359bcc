"""Reversal augmentation: play a recorded episode backwards as a new success.

Only real-source episodes qualify, and only when every step instruction
contains a phrase from the antonym lexicon; anything else has no
well-defined reverse and yields None.
"""

from __future__ import annotations

import dataclasses

from .episode import Episode, PlanStep
from .lexicon import Lexicon


def reverse_episode(ep: Episode, lex: Lexicon) -> Episode | None:
    if ep.source != "real":
        return None
    for step in ep.plan_steps:
        if not lex.find_antonym_occurrences(step.instruction):
            return None

    reversed_steps = []
    for new_index, step in enumerate(reversed(ep.plan_steps)):
        reversed_steps.append(
            PlanStep(
                index=new_index,
                instruction=lex.rewrite_antonyms(step.instruction),
                start_frames=step.end_frames,
                end_frames=step.start_frames,
                target_object=step.target_object,
                target_place=step.target_place,
            )
        )
    return dataclasses.replace(
        ep,
        episode_id=ep.episode_id + "-rev",
        task_instruction=lex.rewrite_antonyms(ep.task_instruction),
        plan_steps=tuple(reversed_steps),
        # states describe the forward timeline; a reversed rollout has none
        robot_states=(),
    )


def reverse_corpus(episodes, lex: Lexicon) -> list[Episode]:
    """Reversed variants of every reversible episode, in corpus order."""
    out = []
    for ep in episodes:
        rev = reverse_episode(ep, lex)
        if rev is not None:
            out.append(rev)
    return out
