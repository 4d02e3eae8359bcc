"""Whole-phrase matching and splicing over instruction text.

Matching is case-sensitive and word-boundary anchored; longer phrases win
over shorter ones at the same position so multiword entries like
"next to" are never shadowed by their components.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence


@dataclass(frozen=True)
class Occurrence:
    start: int
    end: int
    phrase: str


def phrase_pattern(phrases: Sequence[str]) -> re.Pattern:
    ordered = sorted(set(phrases), key=len, reverse=True)
    if not ordered:
        raise ValueError("no phrases to match")
    body = "|".join(re.escape(p) for p in ordered)
    return re.compile(rf"\b(?:{body})\b")


def find_occurrences(text: str, phrases: Sequence[str]) -> list[Occurrence]:
    """All non-overlapping phrase occurrences in position order."""
    if not phrases:
        return []
    return [
        Occurrence(m.start(), m.end(), m.group(0))
        for m in phrase_pattern(phrases).finditer(text)
    ]


def replace_occurrence(text: str, occ: Occurrence, replacement: str) -> str:
    return text[: occ.start] + replacement + text[occ.end :]


def replace_first(text: str, phrase: str, replacement: str) -> str:
    """Replace the first whole-word occurrence of phrase; text unchanged if absent."""
    occs = find_occurrences(text, [phrase])
    if not occs:
        return text
    return replace_occurrence(text, occs[0], replacement)
