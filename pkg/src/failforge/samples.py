"""Labeled detection samples and shard files.

A shard is a JSONL file of planning or execution samples, sorted by
sample_id and written with canonical JSON so regeneration under the same
seed reproduces it byte for byte.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Union

from .episode import FrameRef
from .errors import ParseError, SchemaError
from .seeding import canonical_dumps
from .taxonomy import FailureLabel, Kind

TOOL_VERSION = "failforge-0.1.0"


@dataclass(frozen=True)
class Provenance:
    episode_id: str
    mode: str  # perturbation rule id, step-scoped ones carry "@<step>"
    seed: int
    generator: str = "rule"  # "rule" | "llm"
    tool_version: str = TOOL_VERSION

    def __post_init__(self):
        if self.generator not in ("rule", "llm"):
            raise SchemaError(f"unknown generator {self.generator!r}", field="generator")

    @property
    def base_mode(self) -> str:
        """Rule id without the step suffix, for per-mode histograms."""
        return self.mode.split("@", 1)[0]

    def to_dict(self) -> dict:
        return {
            "episode_id": self.episode_id,
            "mode": self.mode,
            "seed": self.seed,
            "generator": self.generator,
            "tool_version": self.tool_version,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Provenance":
        return cls(
            episode_id=doc["episode_id"],
            mode=doc["mode"],
            seed=doc["seed"],
            generator=doc.get("generator", "rule"),
            tool_version=doc.get("tool_version", TOOL_VERSION),
        )


def _frame_to_dict(f: FrameRef) -> dict:
    return {"camera_id": f.camera_id, "path": f.path, "step": f.step}


def _frame_from_dict(doc: dict) -> FrameRef:
    return FrameRef(camera_id=doc["camera_id"], path=doc["path"], step=doc["step"])


@dataclass(frozen=True)
class PlanningSample:
    sample_id: str
    task_instruction: str
    plan: tuple[str, ...]
    initial_image: FrameRef
    label: FailureLabel
    provenance: Provenance
    cot: str | None = None

    def __post_init__(self):
        if not self.plan:
            raise SchemaError("planning sample needs a non-empty plan", field="plan")
        self.label.validate_for(Kind.PLAN)

    @property
    def kind(self) -> Kind:
        return Kind.PLAN

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "task_instruction": self.task_instruction,
            "plan": list(self.plan),
            "initial_image": _frame_to_dict(self.initial_image),
            "label": self.label.to_dict(),
            "cot": self.cot,
            "provenance": self.provenance.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "PlanningSample":
        return cls(
            sample_id=doc["sample_id"],
            task_instruction=doc["task_instruction"],
            plan=tuple(doc["plan"]),
            initial_image=_frame_from_dict(doc["initial_image"]),
            label=FailureLabel.from_dict(doc["label"]),
            provenance=Provenance.from_dict(doc["provenance"]),
            cot=doc.get("cot"),
        )


@dataclass(frozen=True)
class ExecutionSample:
    sample_id: str
    task_instruction: str
    subtask_instruction: str
    start_images: tuple[FrameRef, ...]
    end_images: tuple[FrameRef, ...]
    label: FailureLabel
    provenance: Provenance
    cot: str | None = None

    def __post_init__(self):
        if not self.start_images or not self.end_images:
            raise SchemaError("execution sample needs start and end images", field="start_images")
        start_cams = sorted(f.camera_id for f in self.start_images)
        end_cams = sorted(f.camera_id for f in self.end_images)
        if start_cams != end_cams:
            raise SchemaError(
                f"start/end images cover different cameras ({start_cams} vs {end_cams})",
                field="end_images",
            )
        self.label.validate_for(Kind.EXECUTION)

    @property
    def kind(self) -> Kind:
        return Kind.EXECUTION

    def to_dict(self) -> dict:
        return {
            "sample_id": self.sample_id,
            "task_instruction": self.task_instruction,
            "subtask_instruction": self.subtask_instruction,
            "start_images": [_frame_to_dict(f) for f in self.start_images],
            "end_images": [_frame_to_dict(f) for f in self.end_images],
            "label": self.label.to_dict(),
            "cot": self.cot,
            "provenance": self.provenance.to_dict(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ExecutionSample":
        return cls(
            sample_id=doc["sample_id"],
            task_instruction=doc["task_instruction"],
            subtask_instruction=doc["subtask_instruction"],
            start_images=tuple(_frame_from_dict(f) for f in doc["start_images"]),
            end_images=tuple(_frame_from_dict(f) for f in doc["end_images"]),
            label=FailureLabel.from_dict(doc["label"]),
            provenance=Provenance.from_dict(doc["provenance"]),
            cot=doc.get("cot"),
        )


Sample = Union[PlanningSample, ExecutionSample]


def sample_from_dict(doc: dict) -> Sample:
    if "plan" in doc:
        return PlanningSample.from_dict(doc)
    if "subtask_instruction" in doc:
        return ExecutionSample.from_dict(doc)
    raise SchemaError("record is neither a planning nor an execution sample", field="sample")


def with_cot(sample: Sample, cot: str | None) -> Sample:
    return dataclasses.replace(sample, cot=cot)


def write_shard(samples: Iterable[Sample], path: str | Path, check_traces: bool = True) -> int:
    """Write a shard sorted by sample_id; returns the record count.

    With check_traces, any stored reasoning trace must carry a final verdict
    line agreeing with the sample's own label.
    """
    from .cot import ReasoningTrace, validate_trace  # cycle: cot builds prompts from samples

    ordered = sorted(samples, key=lambda s: s.sample_id)
    seen: set[str] = set()
    lines = []
    for s in ordered:
        if s.sample_id in seen:
            raise SchemaError(f"duplicate sample_id {s.sample_id}", field="sample_id")
        seen.add(s.sample_id)
        if check_traces and s.cot is not None:
            trace = ReasoningTrace.from_text(s.cot)
            if not validate_trace(trace, s.label, kind=s.kind):
                raise SchemaError(
                    f"stored trace on {s.sample_id} does not match its label", field="cot"
                )
        lines.append(canonical_dumps(s.to_dict()))
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("\n".join(lines) + ("\n" if lines else ""), "utf-8")
    return len(ordered)


def read_shard(path: str | Path) -> list[Sample]:
    out: list[Sample] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as e:
                raise ParseError(f"bad shard line: {e.msg}", location=f"{path}:{lineno}") from e
            out.append(sample_from_dict(doc))
    return out


def shard_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
