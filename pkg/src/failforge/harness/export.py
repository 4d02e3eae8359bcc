"""Training-set export under the three supervision strategies.

vanilla targets are the bare answer line; thinking targets are the stored
reasoning trace (which already ends in that line); dropout deterministically
gives the trace to ceil(ratio*N) samples and the bare answer to the rest,
so one model learns to do both.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from ..errors import MissingCot
from ..imaging import select_views
from ..protocol import answer_line_for
from ..samples import ExecutionSample, PlanningSample, Sample
from ..seeding import canonical_dumps, hash64
from .evaluate import EvalOptions, build_query

_STRATEGIES = ("vanilla", "thinking", "dropout")
_VIEW_POLICIES = ("one", "four", "random_one_or_four")


@dataclass(frozen=True)
class TrainingExportConfig:
    strategy: str
    dropout_ratio: float = 0.5
    view_policy: str = "four"
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in _STRATEGIES:
            raise ValueError(f"strategy must be one of {_STRATEGIES}, got {self.strategy!r}")
        if self.view_policy not in _VIEW_POLICIES:
            raise ValueError(f"view_policy must be one of {_VIEW_POLICIES}, got {self.view_policy!r}")
        if self.strategy == "dropout" and not (0.0 < self.dropout_ratio < 1.0):
            raise ValueError(f"dropout_ratio must be in (0,1), got {self.dropout_ratio}")


def _cot_sample_ids(samples: Sequence[Sample], cfg: TrainingExportConfig) -> set[str]:
    """Which samples carry reasoning in their target, per strategy."""
    ids = sorted(s.sample_id for s in samples)
    if cfg.strategy == "vanilla":
        return set()
    if cfg.strategy == "thinking":
        return set(ids)
    rng = random.Random(cfg.seed)
    rng.shuffle(ids)
    keep = math.ceil(cfg.dropout_ratio * len(ids))
    return set(ids[:keep])


def _views_for(sample: Sample, cfg: TrainingExportConfig) -> int:
    if cfg.view_policy == "one":
        return 1
    if cfg.view_policy == "four":
        return 4
    rng = random.Random(hash64(cfg.seed, "views", sample.sample_id))
    return rng.choice((1, 4))


def _image_paths(sample: Sample, cfg: TrainingExportConfig) -> list[str]:
    if isinstance(sample, PlanningSample):
        return [sample.initial_image.path]
    assert isinstance(sample, ExecutionSample)
    by_cam_start = {f.camera_id: f for f in sample.start_images}
    by_cam_end = {f.camera_id: f for f in sample.end_images}
    limit = _views_for(sample, cfg)
    chosen = select_views(list(by_cam_start), limit, hash64(cfg.seed, "select", sample.sample_id))
    return [by_cam_start[c].path for c in chosen] + [by_cam_end[c].path for c in chosen]


def export_training_set(
    samples: Sequence[Sample],
    cfg: TrainingExportConfig,
    out_path: str | Path,
) -> int:
    """Write conversation-format JSONL {images, prompt, target}; returns count."""
    ordered = sorted(samples, key=lambda s: s.sample_id)
    with_reasoning = _cot_sample_ids(ordered, cfg)
    for s in ordered:
        if s.sample_id in with_reasoning and not s.cot:
            raise MissingCot(f"strategy {cfg.strategy!r} needs a trace on {s.sample_id}")

    lines = []
    for s in ordered:
        reasoned = s.sample_id in with_reasoning
        opts = EvalOptions(answer_mode="thinking" if reasoned else "direct")
        query = build_query(s, opts)
        target = s.cot if reasoned else answer_line_for(s.label.category)
        lines.append(
            canonical_dumps(
                {
                    "sample_id": s.sample_id,
                    "images": _image_paths(s, cfg),
                    "prompt": query.text_prompt,
                    "target": target,
                }
            )
        )
    out = Path(out_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")
    return len(lines)


def subsample_corpus(samples: Sequence[Sample], fraction: float, seed: int) -> list[Sample]:
    """Seeded stratified subsample; smaller fractions nest inside larger ones.

    Strata are (kind, success). Within each stratum samples are ranked by a
    per-sample priority hash, and the top ceil(fraction*n) survive, so the
    0.25 subsample is a subset of the 0.5 subsample under the same seed.
    """
    if not (0.0 < fraction <= 1.0):
        raise ValueError(f"fraction must be in (0,1], got {fraction}")
    if fraction == 1.0:
        return list(samples)
    strata: dict[tuple[str, bool], list[Sample]] = {}
    for s in samples:
        strata.setdefault((s.kind.value, s.label.success), []).append(s)
    keep: set[str] = set()
    for members in strata.values():
        ranked = sorted(members, key=lambda s: (hash64(seed, s.sample_id), s.sample_id))
        for s in ranked[: math.ceil(fraction * len(members))]:
            keep.add(s.sample_id)
    return [s for s in samples if s.sample_id in keep]
