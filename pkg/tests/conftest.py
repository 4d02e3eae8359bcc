"""Shared fixtures: a hand-built mixed sim/real corpus with known structure.

Every episode is small enough that rule outputs can be derived by hand and
asserted exactly. Frames are tiny solid-color PNGs written once per
session; the color is hashed from the file name so distinct frames differ.
"""

from __future__ import annotations

import json
import zlib
from pathlib import Path

import pytest
from PIL import Image

from failforge import load_corpus, load_lexicon

FRAME_SIZE = (16, 16)


def frame_color(rel: str) -> tuple[int, int, int]:
    crc = zlib.crc32(rel.encode("utf-8"))
    return (crc & 0xFF, (crc >> 8) & 0xFF, (crc >> 16) & 0xFF)


def write_frame(root: Path, rel: str, size: tuple[int, int] = FRAME_SIZE):
    path = root / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.new("RGB", size, frame_color(rel)).save(path)


def _frames(eid: str, idx: int, phase: str, cams) -> list[dict]:
    return [
        {"camera_id": cam, "path": f"{eid}/step{idx}_{phase}_{cam}.png", "step": idx}
        for cam in cams
    ]


def make_manifest(eid, source, task, steps, objects, cameras, robot_states=None) -> dict:
    """steps are (instruction, target_object, target_place) triples."""
    plan = []
    for i, (instr, obj, place) in enumerate(steps):
        entry = {
            "index": i,
            "instruction": instr,
            "start_frames": _frames(eid, i, "a", cameras),
            "end_frames": _frames(eid, i, "b", cameras),
        }
        if obj is not None:
            entry["target_object"] = obj
        if place is not None:
            entry["target_place"] = place
        plan.append(entry)
    doc = {
        "manifest_version": "1",
        "episode_id": eid,
        "source": source,
        "task_instruction": task,
        "plan_steps": plan,
        "scene_objects": [o if isinstance(o, dict) else {"name": o} for o in objects],
        "cameras": [
            {"camera_id": c, "width": FRAME_SIZE[0], "height": FRAME_SIZE[1]} for c in cameras
        ],
    }
    if robot_states:
        doc["robot_states"] = robot_states
    return doc


MANIFESTS = [
    make_manifest(
        "ep00",
        "real",
        "put the spoon on the towel",
        [
            ("pick up the spoon", "spoon", None),
            ("put the spoon on the towel", "spoon", "towel"),
        ],
        [
            {"name": "spoon", "category": "utensil", "location_desc": "on the table", "bbox": [10, 10, 40, 20]},
            {"name": "towel", "category": "cloth", "location_desc": "near the edge", "bbox": [60, 40, 50, 30]},
            {"name": "pot", "category": "cookware", "bbox": [100, 10, 60, 60]},
        ],
        ["front", "wrist"],
        robot_states=[{"step": 0, "gripper_open": True, "ee_pose": [0.4, 0.0, 0.3]}],
    ),
    make_manifest(
        "ep01",
        "real",
        "open the drawer and pick up the sponge",
        [
            ("open the drawer", "drawer", None),
            ("pick up the sponge", "sponge", None),
            ("put down the sponge in the drawer", "sponge", "drawer"),
        ],
        ["drawer", "sponge"],
        ["front"],
        robot_states=[{"step": 0, "gripper_open": False}],
    ),
    make_manifest(
        "ep02",
        "real",
        "move the carrot to the plate",
        [
            ("pick up the carrot", "carrot", None),
            ("put the carrot on the plate", "carrot", "plate"),
            ("push the plate next to the knife", "plate", "knife"),
        ],
        ["carrot", "plate", "knife"],
        ["front", "wrist"],
    ),
    make_manifest(
        "ep03",
        "real",
        "close the microwave",
        [("close the microwave", "microwave", None)],
        ["microwave"],
        ["front"],
    ),
    make_manifest(
        "ep04",
        "real",
        "set the table with the cup and the plate",
        [
            ("pick up the cup", "cup", None),
            ("put the cup on the tray", "cup", "tray"),
            ("pick up the plate", "plate", None),
            ("put the plate next to the napkin", "plate", "napkin"),
        ],
        ["cup", "plate", "tray", "napkin"],
        ["front", "left", "right", "wrist"],
    ),
    make_manifest(
        "ep05",
        "real",
        "turn the bottle upright on the shelf",
        [
            ("pick up the bottle", "bottle", None),
            ("turn the bottle upright", "bottle", None),
            ("put the bottle on the shelf", "bottle", "shelf"),
        ],
        ["bottle", "shelf", "box"],
        ["front"],
    ),
    make_manifest(
        "ep06",
        "real",
        "stack the two blocks in the bin",
        [
            ("pick up the red block", "red block", None),
            ("put the red block in the bin", "red block", "bin"),
            ("put the red block in the bin", "red block", "bin"),
        ],
        ["red block", "blue block", "bin"],
        ["front"],
    ),
    make_manifest(
        "ep07",
        "sim",
        "put the lid on the jar",
        [
            ("pick up the lid", "lid", None),
            ("put the lid on the jar", "lid", "jar"),
        ],
        ["lid", "jar", "spatula"],
        ["front"],
    ),
    make_manifest(
        "ep08",
        "sim",
        "press the button",
        [("press the button", "button", None)],
        ["button"],
        ["front"],
    ),
    make_manifest(
        "ep09",
        "sim",
        "load the dishwasher with the bowl",
        [
            ("open the dishwasher", "dishwasher", None),
            ("put the bowl in the dishwasher", "bowl", "dishwasher"),
            ("close the dishwasher", "dishwasher", None),
        ],
        ["bowl", "dishwasher", "mug"],
        ["front", "wrist"],
    ),
]


def write_corpus(root: Path, manifests=None) -> Path:
    root.mkdir(parents=True, exist_ok=True)
    for doc in manifests if manifests is not None else MANIFESTS:
        path = root / f"{doc['episode_id']}.json"
        path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", "utf-8")
        for step in doc["plan_steps"]:
            for ref in step["start_frames"] + step["end_frames"]:
                write_frame(root, ref["path"])
    return root


@pytest.fixture(scope="session")
def corpus_root(tmp_path_factory) -> Path:
    return write_corpus(tmp_path_factory.mktemp("corpus"))


@pytest.fixture(scope="session")
def corpus(corpus_root):
    return load_corpus(corpus_root)


@pytest.fixture(scope="session")
def by_id(corpus):
    return {ep.episode_id: ep for ep in corpus}


@pytest.fixture(scope="session")
def lex():
    return load_lexicon()
