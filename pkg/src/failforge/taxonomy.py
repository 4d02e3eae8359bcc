"""Failure taxonomy: detection kinds, category menus, and labels."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum


class Kind(str, Enum):
    PLAN = "plan"
    EXECUTION = "execution"


class PlanningCategory(str, Enum):
    SUCCESS = "success"
    WRONG_OBJECT_MANIPULATED = "wrong_object_manipulated"
    WRONG_STATE_OR_PLACEMENT = "wrong_state_or_placement"
    WRONG_ORDER = "wrong_order"
    MISSING_SUBTASK = "missing_subtask"
    CONTRADICTORY_SUBTASKS = "contradictory_subtasks"


class ExecutionCategory(str, Enum):
    # Declaration order is the seeded-choice order for simulator directives.
    SUCCESS = "success"
    NO_GRIPPER_CLOSE = "no_gripper_close"
    WRONG_STATE_OR_PLACEMENT = "wrong_state_or_placement"
    WRONG_OBJECT_MANIPULATED = "wrong_object_manipulated"
    IMPRECISE_GRASP_OR_PUSH = "imprecise_grasp_or_push"
    NO_PROGRESS = "no_progress"


PLANNING_CATEGORIES = tuple(c.value for c in PlanningCategory)
EXECUTION_CATEGORIES = tuple(c.value for c in ExecutionCategory)

DISPLAY_NAMES = {
    "success": "Success",
    "wrong_object_manipulated": "Wrong object manipulated",
    "wrong_state_or_placement": "Wrong object state or placement",
    "wrong_order": "Wrong order",
    "missing_subtask": "Missing subtask",
    "contradictory_subtasks": "Contradictory subtasks",
    "no_gripper_close": "No gripper close",
    "imprecise_grasp_or_push": "Imprecise grasping/pushing",
    "no_progress": "No progress",
}


def category_menu(kind: Kind | str) -> tuple[str, ...]:
    """Category slugs valid for a detection kind, success included."""
    kind = Kind(kind)
    return PLANNING_CATEGORIES if kind is Kind.PLAN else EXECUTION_CATEGORIES


def failure_menu(kind: Kind | str) -> tuple[str, ...]:
    """Failure-only category slugs for a detection kind."""
    return tuple(c for c in category_menu(kind) if c != "success")


@dataclass(frozen=True)
class FailureLabel:
    """Ground-truth label: binary success flag plus fine-grained category.

    Invariant: success is true exactly when category == "success".
    """

    success: bool
    category: str

    def __post_init__(self):
        if self.success != (self.category == "success"):
            raise ValueError(
                f"label inconsistency: success={self.success} with category={self.category!r}"
            )

    @classmethod
    def success_label(cls) -> "FailureLabel":
        return cls(success=True, category="success")

    @classmethod
    def failure(cls, category: str) -> "FailureLabel":
        return cls(success=False, category=category)

    def validate_for(self, kind: Kind | str) -> None:
        if self.category not in category_menu(kind):
            raise ValueError(f"category {self.category!r} invalid for kind {Kind(kind).value}")

    def to_dict(self) -> dict:
        return {"success": self.success, "category": self.category}

    @classmethod
    def from_dict(cls, d: dict) -> "FailureLabel":
        return cls(success=bool(d["success"]), category=str(d["category"]))
