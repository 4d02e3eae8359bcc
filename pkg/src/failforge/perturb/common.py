"""Shared machinery for the perturbation generators.

Balanced batch generation works the same way for planning and execution:
half the target count comes from untouched successes, the other half from
failure modes weighted by config, with quotas assigned by largest
remainder so every histogram lands within one sample of exact proportion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from ..episode import Episode, FrameRef
from ..errors import CorpusExhausted, NotApplicable
from ..samples import Sample
from ..seeding import hash64


@dataclass(frozen=True)
class GenConfig:
    """Batch generation knobs; weights default to uniform over a kind's modes."""

    target: int
    master_seed: int = 0
    weights: dict[str, float] = field(default_factory=dict)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "GenConfig":
        return cls(
            target=int(doc["target"]),
            master_seed=int(doc.get("master_seed", 0)),
            weights={str(k): float(v) for k, v in doc.get("weights", {}).items()},
        )


def front_camera_id(ep: Episode) -> str:
    ids = ep.camera_ids or sorted({f.camera_id for f in ep.plan_steps[0].start_frames})
    return "front" if "front" in ids else ids[0]


def initial_frame(ep: Episode) -> FrameRef:
    """Front-camera start frame of step 0."""
    cam = front_camera_id(ep)
    for f in ep.plan_steps[0].start_frames:
        if f.camera_id == cam:
            return f
    return ep.plan_steps[0].start_frames[0]


def plan_strings(ep: Episode) -> tuple[str, ...]:
    return tuple(s.instruction for s in ep.plan_steps)


def largest_remainder(weights: Mapping[str, float], total: int) -> dict[str, int]:
    """Integer quotas proportional to weights, off by at most one each."""
    active = {m: w for m, w in weights.items() if w > 0}
    if not active:
        raise ValueError("no positive weights")
    wsum = sum(active.values())
    raw = {m: total * w / wsum for m, w in active.items()}
    base = {m: math.floor(r) for m, r in raw.items()}
    leftover = total - sum(base.values())
    for m in sorted(active, key=lambda m: (-(raw[m] - base[m]), m))[:leftover]:
        base[m] += 1
    return base


FailureOp = Callable[[Episode, int], Sample]
SuccessOp = Callable[[Episode, int], Sample]


def generate_balanced(
    corpus: Sequence[Episode],
    cfg: GenConfig,
    ops: Mapping[str, FailureOp],
    success_op: SuccessOp,
    default_weights: Mapping[str, float],
) -> list[Sample]:
    """Success/failure 1:1 (success gets the odd one), failures per weights.

    Per-attempt seed is hash64(master_seed, episode_id, mode, attempt_index),
    so reruns of the same config reproduce the shard byte for byte. Episodes
    a mode can't apply to are skipped and the draw repeats elsewhere; quota a
    mode can't fill moves to modes that still produce. When nothing can,
    CorpusExhausted.
    """
    if not corpus:
        raise CorpusExhausted("empty corpus")
    if cfg.target <= 0:
        return []
    eps = sorted(corpus, key=lambda e: e.episode_id)
    weights = dict(cfg.weights) if cfg.weights else dict(default_weights)
    unknown = set(weights) - set(ops)
    if unknown:
        raise ValueError(f"weights name unknown modes: {sorted(unknown)}")

    n_fail = cfg.target // 2
    n_succ = cfg.target - n_fail
    samples: dict[str, Sample] = {}

    for i in range(n_succ):
        ep = eps[i % len(eps)]
        s = success_op(ep, hash64(cfg.master_seed, ep.episode_id, "success", i))
        samples[s.sample_id] = s

    pending = largest_remainder(weights, n_fail) if n_fail else {}
    dead: set[tuple[str, str]] = set()  # (mode, episode_id) proven inapplicable
    attempt = {m: 0 for m in pending}

    while any(n > 0 for n in pending.values()):
        progress = False
        for mode in sorted(m for m, n in pending.items() if n > 0):
            tries = 0
            budget = pending[mode] * len(eps) * 8 + 8
            while pending[mode] > 0 and tries < budget:
                pool = [e for e in eps if (mode, e.episode_id) not in dead]
                if not pool:
                    break
                ep = pool[attempt[mode] % len(pool)]
                seed = hash64(cfg.master_seed, ep.episode_id, mode, attempt[mode])
                attempt[mode] += 1
                tries += 1
                try:
                    s = ops[mode](ep, seed)
                except NotApplicable:
                    dead.add((mode, ep.episode_id))
                    continue
                if s.sample_id in samples:
                    continue  # same bytes already emitted (seed-free modes repeat)
                samples[s.sample_id] = s
                pending[mode] -= 1
                progress = True
        unmet = sum(n for n in pending.values() if n > 0)
        if unmet == 0:
            break
        if not progress:
            stuck = {m for m, n in pending.items() if n > 0}
            alive = {
                m: weights[m]
                for m in pending
                if m not in stuck and any((m, e.episode_id) not in dead for e in eps)
            }
            if not alive:
                raise CorpusExhausted(
                    f"cannot fill {unmet} remaining failure samples; "
                    f"stuck modes: {sorted(stuck)}"
                )
            for m in stuck:
                pending[m] = 0
            for m, extra in largest_remainder(alive, unmet).items():
                pending[m] += extra

    return sorted(samples.values(), key=lambda s: s.sample_id)
