"""Execution-failure generation.

Two rules run entirely in-toolkit on real recordings (semantic mismatch,
revert action). The four simulator modes go through a directive file: we
emit what to perturb, an external simulator adapter executes it, and the
resulting rollout manifest comes back through ingest_sim_rollout.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from ..episode import Episode, PlanStep, load_episode
from ..errors import MismatchError, NoPreposition, NotApplicable
from ..lexicon import Lexicon, load_lexicon
from ..samples import ExecutionSample, Provenance
from ..seeding import canonical_dumps, hash64, seeded_choice, stable_id
from ..taxonomy import FailureLabel
from ..textmatch import find_occurrences, replace_occurrence
from . import llm
from .common import GenConfig, generate_balanced

EXECUTION_MODES = ("revert_action", "semantic_mismatch")

# Order matters: index = seed mod 4 over this tuple, matching the order the
# four modes are declared in the execution taxonomy.
SIM_DIRECTIVE_MODES = (
    "no_gripper_close",
    "wrong_state_or_placement",
    "wrong_object_manipulated",
    "imprecise_grasp_or_push",
)

_AXES = ((1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0))


def _sample(
    ep: Episode,
    step: PlanStep,
    mode: str,
    seed: int,
    subtask: str,
    category: str,
    end_images=None,
    generator: str = "rule",
) -> ExecutionSample:
    label = FailureLabel.success_label() if category == "success" else FailureLabel.failure(category)
    return ExecutionSample(
        sample_id=stable_id(ep.episode_id, mode, seed),
        task_instruction=ep.task_instruction,
        subtask_instruction=subtask,
        start_images=step.start_frames,
        end_images=step.end_frames if end_images is None else tuple(end_images),
        label=label,
        provenance=Provenance(episode_id=ep.episode_id, mode=mode, seed=seed, generator=generator),
    )


# -- real-data rules ---------------------------------------------------


def preposition_swap(instruction: str, lex: Lexicon, seed: int) -> str:
    """Replace one seeded preposition with a different member of its group."""
    occs = lex.find_preposition_occurrences(instruction)
    if not occs:
        raise NoPreposition(f"no known preposition in {instruction!r}")
    occ = occs[seed % len(occs)]
    alts = lex.preposition_alternatives(occ.phrase)
    return replace_occurrence(instruction, occ, alts[seed % len(alts)])


def perturb_semantic_mismatch(
    ep: Episode,
    step: int,
    seed: int,
    lex: Lexicon | None = None,
    gateway=None,
) -> ExecutionSample:
    """Alter what the instruction claims was done; images stay verbatim.

    Rule branches, seeded: replace the manipulated object mention, replace
    the place mention together with its preposition, or swap the preposition
    alone. The changed span decides the category.
    """
    if ep.source != "real":
        raise NotApplicable(f"{ep.episode_id}: semantic mismatch is defined on real recordings")
    st = ep.step(step)
    lex = lex or load_lexicon()
    mode = f"semantic_mismatch@{st.index}"
    instruction = st.instruction
    names = ep.object_names

    mentions = find_occurrences(instruction, names) if names else []
    preps = lex.find_preposition_occurrences(instruction)
    first_prep = preps[0] if preps else None
    mentioned = {m.phrase for m in mentions}
    alt_names = [n for n in names if n not in mentioned]

    pre_prep = [
        m for m in mentions if first_prep is None or m.start < first_prep.start
    ]
    post_prep = (
        [m for m in mentions if m.start >= first_prep.end] if first_prep is not None else []
    )

    branches = []
    if pre_prep and alt_names:
        branches.append("object")
    if post_prep and alt_names:
        branches.append("place")
    if preps:
        branches.append("preposition")
    branches.sort()
    if not branches:
        raise NotApplicable(f"{ep.episode_id} step {st.index}: no viable substitution")

    if gateway is not None:
        edited = llm.llm_subtask_rewrite(gateway, instruction, names)
        if edited is not None:
            category = _classify_edit(instruction, edited, pre_prep)
            return _sample(ep, st, mode, seed, edited, category, generator="llm")

    branch = seeded_choice(branches, seed, presorted=True)
    if branch == "object":
        target = pre_prep[seed % len(pre_prep)]
        replacement = alt_names[seed % len(alt_names)]
        altered = replace_occurrence(instruction, target, replacement)
        category = "wrong_object_manipulated"
    elif branch == "place":
        target = post_prep[seed % len(post_prep)]
        # the preposition governing this mention: last one starting before it
        prep = [p for p in preps if p.end <= target.start][-1]
        alts = lex.preposition_alternatives(prep.phrase)
        altered = replace_occurrence(instruction, target, alt_names[seed % len(alt_names)])
        altered = replace_occurrence(altered, prep, alts[seed % len(alts)])
        category = "wrong_state_or_placement"
    else:
        altered = preposition_swap(instruction, lex, seed)
        category = "wrong_state_or_placement"
    return _sample(ep, st, mode, seed, altered, category)


def _classify_edit(original: str, edited: str, pre_prep_mentions) -> str:
    """Category for a free-form rewrite: object change beats placement change."""
    for m in pre_prep_mentions:
        if not find_occurrences(edited, [m.phrase]):
            return "wrong_object_manipulated"
    return "wrong_state_or_placement"


def perturb_revert_action(ep: Episode, step: int) -> ExecutionSample:
    """Pair the start images with themselves: visibly no progress."""
    if ep.source != "real":
        raise NotApplicable(f"{ep.episode_id}: revert action is defined on real recordings")
    st = ep.step(step)
    return _sample(
        ep,
        st,
        f"revert_action@{st.index}",
        0,
        st.instruction,
        "no_progress",
        end_images=st.start_frames,
    )


def success_execution_sample(ep: Episode, seed: int) -> ExecutionSample:
    """A seeded recorded segment, untouched."""
    st = ep.plan_steps[seed % len(ep.plan_steps)]
    return _sample(ep, st, f"success@{st.index}", seed, st.instruction, "success")


# -- simulator directive contract --------------------------------------


@dataclass(frozen=True)
class SimDirective:
    episode_id: str
    subtask_index: int
    mode: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in SIM_DIRECTIVE_MODES:
            raise MismatchError(f"unknown sim directive mode {self.mode!r}")
        required = {
            "no_gripper_close": set(),
            "imprecise_grasp_or_push": {"offset_mm"},
            "wrong_object_manipulated": {"alt_object"},
        }
        if self.mode == "wrong_state_or_placement":
            if set(self.params) not in ({"alt_place"}, {"alt_pose"}):
                raise MismatchError("wrong_state directive needs exactly alt_place or alt_pose")
        elif set(self.params) != required[self.mode]:
            raise MismatchError(
                f"{self.mode} directive params must be exactly {sorted(required[self.mode])}"
            )
        if self.mode == "imprecise_grasp_or_push":
            if not any(abs(v) > 0 for v in self.params["offset_mm"]):
                raise MismatchError("imprecise offset must have positive magnitude")

    @property
    def directive_id(self) -> str:
        return stable_id("simdir", self.episode_id, self.subtask_index, self.mode,
                         canonical_dumps(self.params))

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "subtask_index": self.subtask_index,
            "mode": self.mode,
            "params": self.params,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "SimDirective":
        return cls(
            episode_id=doc["episode_id"],
            subtask_index=doc["subtask_index"],
            mode=doc["mode"],
            params=dict(doc.get("params", {})),
        )


def emit_sim_directive(
    ep: Episode, seed: int, offset_range_mm: tuple[float, float] = (15.0, 40.0)
) -> SimDirective:
    """Seeded choice of subtask, failure mode, and mode parameters."""
    if ep.source != "sim":
        raise NotApplicable(f"{ep.episode_id}: directives are only emitted for sim episodes")
    st = ep.plan_steps[seed % len(ep.plan_steps)]
    mode = seeded_choice(SIM_DIRECTIVE_MODES, seed, presorted=True)
    names = ep.object_names
    params: dict = {}

    if mode == "imprecise_grasp_or_push":
        rng = random.Random(seed)
        offset = []
        for _ in range(3):
            mag = rng.uniform(*offset_range_mm)
            sign = rng.choice((-1.0, 1.0))
            offset.append(round(sign * mag, 3))
        params = {"offset_mm": offset}
    elif mode == "wrong_object_manipulated":
        pool = [n for n in names if n != st.target_object]
        if not pool:
            raise NotApplicable(f"{ep.episode_id}: no alternative object for directive")
        params = {"alt_object": seeded_choice(pool, seed)}
    elif mode == "wrong_state_or_placement":
        pool = [n for n in names if n not in (st.target_object, st.target_place)]
        if pool:
            params = {"alt_place": seeded_choice(pool, seed)}
        else:
            axis = _AXES[seed % 3]
            params = {"alt_pose": [0.0, 0.0, 0.0, axis[0], axis[1], axis[2], 0.0]}

    return SimDirective(episode_id=ep.episode_id, subtask_index=st.index, mode=mode, params=params)


def write_directives(directives: Sequence[SimDirective], path: str | Path) -> int:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = [canonical_dumps(d.to_dict()) for d in directives]
    out.write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")
    return len(lines)


def read_directives(path: str | Path) -> list[SimDirective]:
    out = []
    for line in Path(path).read_text("utf-8").splitlines():
        if line.strip():
            out.append(SimDirective.from_dict(json.loads(line)))
    return out


def ingest_sim_rollout(directive: SimDirective, rollout_manifest: str | Path) -> ExecutionSample:
    """Turn an executed directive's rollout back into a labeled sample."""
    rollout = load_episode(rollout_manifest)
    if rollout.episode_id != directive.episode_id:
        raise MismatchError(
            f"rollout is for {rollout.episode_id!r}, directive for {directive.episode_id!r}"
        )
    claimed = rollout.extensions.get("directive_id")
    if claimed is not None and claimed != directive.directive_id:
        raise MismatchError(f"rollout claims directive {claimed}, expected {directive.directive_id}")
    try:
        st = rollout.step(directive.subtask_index)
    except IndexError:
        raise MismatchError(
            f"rollout has no subtask {directive.subtask_index} for {directive.episode_id}"
        ) from None
    mode = f"sim:{directive.mode}@{directive.subtask_index}"
    return _sample(rollout, st, mode, hash64(directive.directive_id), st.instruction, directive.mode)


# -- batch generation ---------------------------------------------------


def generate_execution_samples(
    corpus: Sequence[Episode],
    cfg: GenConfig,
    lex: Lexicon | None = None,
    gateway=None,
) -> list[ExecutionSample]:
    lex = lex or load_lexicon()
    ops = {
        "semantic_mismatch": lambda ep, seed: perturb_semantic_mismatch(
            ep, seed % len(ep.plan_steps), seed, lex, gateway
        ),
        "revert_action": lambda ep, seed: perturb_revert_action(ep, seed % len(ep.plan_steps)),
    }
    uniform = {mode: 1.0 for mode in EXECUTION_MODES}
    return generate_balanced(corpus, cfg, ops, success_execution_sample, uniform)
