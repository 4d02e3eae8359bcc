"""Episode manifests: loading, validation, serialization.

An episode is one recorded manipulation rollout: an ordered plan of
subtasks, per-subtask start/end frames from one or more cameras, the
visible scene objects, and optional low-dimensional robot states. Sim and
real episodes share the format; fields one source lacks stay optional and
unknown top-level keys ride along under ``extensions``.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath
from typing import Any, Iterable

from .errors import ParseError, SchemaError

MANIFEST_VERSION = "1"

_KNOWN_TOP_LEVEL = {
    "manifest_version",
    "episode_id",
    "source",
    "task_instruction",
    "plan_steps",
    "scene_objects",
    "cameras",
    "robot_states",
    "extensions",
}


@dataclass(frozen=True)
class FrameRef:
    camera_id: str
    path: str
    step: int


@dataclass(frozen=True)
class SceneObject:
    name: str
    category: str | None = None
    location_desc: str | None = None
    bbox: tuple[float, float, float, float] | None = None  # x, y, w, h


@dataclass(frozen=True)
class CameraDecl:
    camera_id: str
    width: int | None = None
    height: int | None = None


@dataclass(frozen=True)
class RobotState:
    step: int
    gripper_open: bool
    ee_pose: tuple[float, ...] = ()


@dataclass(frozen=True)
class PlanStep:
    index: int
    instruction: str
    start_frames: tuple[FrameRef, ...]
    end_frames: tuple[FrameRef, ...]
    target_object: str | None = None
    target_place: str | None = None


@dataclass(frozen=True)
class Episode:
    episode_id: str
    source: str  # "sim" | "real"
    task_instruction: str
    plan_steps: tuple[PlanStep, ...]
    scene_objects: tuple[SceneObject, ...] = ()
    cameras: tuple[CameraDecl, ...] = ()
    robot_states: tuple[RobotState, ...] = ()
    extensions: dict[str, Any] = field(default_factory=dict)

    @property
    def object_names(self) -> list[str]:
        return sorted({o.name for o in self.scene_objects})

    @property
    def camera_ids(self) -> list[str]:
        return sorted({c.camera_id for c in self.cameras})

    def step(self, index: int) -> PlanStep:
        for s in self.plan_steps:
            if s.index == index:
                return s
        raise IndexError(f"episode {self.episode_id} has no plan step {index}")


@dataclass
class ValidationReport:
    episode_id: str
    errors: list[tuple[str, str]] = field(default_factory=list)
    warnings: list[tuple[str, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors


def _require(doc: dict, key: str, where: str):
    if key not in doc:
        raise SchemaError(f"missing required field in {where}", field=key)
    return doc[key]


def _frame_ref(doc: dict, where: str) -> FrameRef:
    camera_id = str(_require(doc, "camera_id", where))
    path = str(_require(doc, "path", where))
    step = _require(doc, "step", where)
    if PurePosixPath(path).is_absolute() or Path(path).is_absolute():
        raise SchemaError(f"frame path must be relative, got {path!r}", field=f"{where}.path")
    if not isinstance(step, int) or isinstance(step, bool) or step < 0:
        raise SchemaError(f"frame step must be a non-negative integer in {where}", field=f"{where}.step")
    return FrameRef(camera_id=camera_id, path=path, step=step)


def _plan_step(doc: dict, pos: int) -> PlanStep:
    where = f"plan_steps[{pos}]"
    index = _require(doc, "index", where)
    if not isinstance(index, int) or isinstance(index, bool):
        raise SchemaError(f"step index must be an integer in {where}", field=f"{where}.index")
    instruction = str(_require(doc, "instruction", where))
    starts = tuple(
        _frame_ref(f, f"{where}.start_frames[{i}]") for i, f in enumerate(_require(doc, "start_frames", where))
    )
    ends = tuple(
        _frame_ref(f, f"{where}.end_frames[{i}]") for i, f in enumerate(_require(doc, "end_frames", where))
    )
    if not starts or not ends:
        raise SchemaError(f"{where} needs non-empty start and end frames", field=where)
    start_cams = sorted(f.camera_id for f in starts)
    end_cams = sorted(f.camera_id for f in ends)
    if start_cams != end_cams:
        raise SchemaError(
            f"{where} start/end frames cover different cameras ({start_cams} vs {end_cams})",
            field=where,
        )
    return PlanStep(
        index=index,
        instruction=instruction,
        start_frames=starts,
        end_frames=ends,
        target_object=doc.get("target_object"),
        target_place=doc.get("target_place"),
    )


def episode_from_dict(doc: dict, where: str = "episode") -> Episode:
    episode_id = str(_require(doc, "episode_id", where))
    source = _require(doc, "source", where)
    if source not in ("sim", "real"):
        raise SchemaError(f"source must be 'sim' or 'real', got {source!r}", field="source")
    task = str(_require(doc, "task_instruction", where))

    steps = tuple(_plan_step(s, i) for i, s in enumerate(_require(doc, "plan_steps", where)))
    if not steps:
        raise SchemaError("episode needs at least one plan step", field="plan_steps")
    indices = [s.index for s in steps]
    if indices != list(range(len(steps))):
        raise SchemaError(
            f"plan step indices must be contiguous from 0, got {indices}", field="plan_steps"
        )

    objects = tuple(
        SceneObject(
            name=str(_require(o, "name", f"scene_objects[{i}]")),
            category=o.get("category"),
            location_desc=o.get("location_desc"),
            bbox=tuple(o["bbox"]) if o.get("bbox") is not None else None,
        )
        for i, o in enumerate(doc.get("scene_objects", []))
    )
    cameras = tuple(
        CameraDecl(
            camera_id=str(_require(c, "camera_id", f"cameras[{i}]")),
            width=c.get("width"),
            height=c.get("height"),
        )
        for i, c in enumerate(doc.get("cameras", []))
    )
    states = tuple(
        RobotState(
            step=int(_require(r, "step", f"robot_states[{i}]")),
            gripper_open=bool(_require(r, "gripper_open", f"robot_states[{i}]")),
            ee_pose=tuple(float(v) for v in r.get("ee_pose", [])),
        )
        for i, r in enumerate(doc.get("robot_states", []))
    )

    extensions = dict(doc.get("extensions", {}))
    for key in doc:
        if key not in _KNOWN_TOP_LEVEL:
            extensions[key] = doc[key]

    return Episode(
        episode_id=episode_id,
        source=source,
        task_instruction=task,
        plan_steps=steps,
        scene_objects=objects,
        cameras=cameras,
        robot_states=states,
        extensions=extensions,
    )


def load_episode(path: str | Path) -> Episode:
    path = Path(path)
    try:
        doc = json.loads(path.read_text("utf-8"))
    except json.JSONDecodeError as e:
        raise ParseError(f"{path.name}: {e.msg}", location=f"{path}:{e.lineno}:{e.colno}") from e
    if not isinstance(doc, dict):
        raise ParseError(f"{path.name}: manifest must be a JSON object", location=str(path))
    return episode_from_dict(doc, where=path.name)


def episode_to_dict(ep: Episode) -> dict:
    doc: dict[str, Any] = {
        "manifest_version": MANIFEST_VERSION,
        "episode_id": ep.episode_id,
        "source": ep.source,
        "task_instruction": ep.task_instruction,
        "plan_steps": [
            {
                "index": s.index,
                "instruction": s.instruction,
                **({"target_object": s.target_object} if s.target_object is not None else {}),
                **({"target_place": s.target_place} if s.target_place is not None else {}),
                "start_frames": [vars(f) for f in s.start_frames],
                "end_frames": [vars(f) for f in s.end_frames],
            }
            for s in ep.plan_steps
        ],
        "scene_objects": [
            {
                "name": o.name,
                **({"category": o.category} if o.category is not None else {}),
                **({"location_desc": o.location_desc} if o.location_desc is not None else {}),
                **({"bbox": list(o.bbox)} if o.bbox is not None else {}),
            }
            for o in ep.scene_objects
        ],
        "cameras": [
            {
                "camera_id": c.camera_id,
                **({"width": c.width} if c.width is not None else {}),
                **({"height": c.height} if c.height is not None else {}),
            }
            for c in ep.cameras
        ],
    }
    if ep.robot_states:
        doc["robot_states"] = [
            {"step": r.step, "gripper_open": r.gripper_open, "ee_pose": list(r.ee_pose)}
            for r in ep.robot_states
        ]
    if ep.extensions:
        doc["extensions"] = ep.extensions
    return doc


def save_episode(ep: Episode, path: str | Path):
    Path(path).write_text(json.dumps(episode_to_dict(ep), indent=2, ensure_ascii=False) + "\n", "utf-8")


def load_corpus(root: str | Path, jobs: int = 1) -> list[Episode]:
    """Load every ``*.json`` manifest under root, sorted by episode id."""
    paths = sorted(Path(root).rglob("*.json"))
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            episodes = list(pool.map(load_episode, paths))
    else:
        episodes = [load_episode(p) for p in paths]
    seen: dict[str, Path] = {}
    for ep, p in zip(episodes, paths):
        if ep.episode_id in seen:
            raise SchemaError(
                f"duplicate episode_id {ep.episode_id!r} in {p} and {seen[ep.episode_id]}",
                field="episode_id",
            )
        seen[ep.episode_id] = p
    return sorted(episodes, key=lambda e: e.episode_id)


def validate_episode(ep: Episode, corpus_root: str | Path | None = None) -> ValidationReport:
    """Integrity checks beyond schema shape. Errors block ingestion, warnings don't."""
    report = ValidationReport(episode_id=ep.episode_id)
    declared = set(ep.camera_ids)
    names = set(o.name for o in ep.scene_objects)

    for i, obj in enumerate(ep.scene_objects):
        if obj.bbox is not None:
            x, y, w, h = obj.bbox
            if w <= 0 or h <= 0:
                report.errors.append(
                    (f"scene_objects[{i}].bbox", f"non-positive extent {w}x{h} on {obj.name!r}")
                )

    for step in ep.plan_steps:
        for side, frames in (("start_frames", step.start_frames), ("end_frames", step.end_frames)):
            for j, frame in enumerate(frames):
                where = f"plan_steps[{step.index}].{side}[{j}]"
                if declared and frame.camera_id not in declared:
                    report.errors.append((where, f"camera {frame.camera_id!r} not declared"))
                if corpus_root is not None and not (Path(corpus_root) / frame.path).is_file():
                    report.errors.append((where, f"missing frame file {frame.path!r}"))
        if step.target_object is not None and step.target_object not in names:
            report.warnings.append(
                (f"plan_steps[{step.index}].target_object", f"{step.target_object!r} not in scene_objects")
            )
    return report


def validate_corpus(episodes: Iterable[Episode], corpus_root: str | Path | None = None) -> list[ValidationReport]:
    return [validate_episode(ep, corpus_root) for ep in episodes]
