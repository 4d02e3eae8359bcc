"""Action lexicon: antonym verb pairs and interchangeable place prepositions.

The packaged seed vocabulary is deliberately small; callers can load their
own file with the same shape. The antonym map is closed under inversion at
load time, so a file only needs to list each pair once.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import SchemaError
from .textmatch import Occurrence, find_occurrences, phrase_pattern


@dataclass(frozen=True)
class Lexicon:
    verb_antonyms: dict[str, str]
    preposition_groups: tuple[tuple[str, ...], ...]
    _group_of: dict[str, tuple[str, ...]] = field(repr=False, default_factory=dict)

    def __post_init__(self):
        for a, b in self.verb_antonyms.items():
            if a == b:
                raise SchemaError(f"antonym pair maps {a!r} to itself", field="verb_antonyms")
            if self.verb_antonyms.get(b) != a:
                raise SchemaError(f"antonym map not symmetric at {a!r}", field="verb_antonyms")
        seen: dict[str, tuple[str, ...]] = {}
        for group in self.preposition_groups:
            if len(group) < 2:
                raise SchemaError("preposition group needs at least two members", field="preposition_groups")
            for prep in group:
                if prep in seen:
                    raise SchemaError(f"preposition {prep!r} appears in two groups", field="preposition_groups")
                seen[prep] = group
        object.__setattr__(self, "_group_of", seen)

    # -- antonyms ------------------------------------------------------

    def antonym_of(self, phrase: str) -> str:
        return self.verb_antonyms[phrase]

    def find_antonym_occurrences(self, text: str) -> list[Occurrence]:
        if not self.verb_antonyms:
            return []
        return find_occurrences(text, list(self.verb_antonyms))

    def rewrite_antonyms(self, text: str) -> str:
        """Swap every antonym phrase in one simultaneous pass.

        Single-pass substitution keeps the rewrite involutive: applying it
        twice returns the original text.
        """
        if not self.verb_antonyms:
            return text
        pat = phrase_pattern(list(self.verb_antonyms))
        return pat.sub(lambda m: self.verb_antonyms[m.group(0)], text)

    # -- prepositions --------------------------------------------------

    @property
    def prepositions(self) -> list[str]:
        return [p for group in self.preposition_groups for p in group]

    def find_preposition_occurrences(self, text: str) -> list[Occurrence]:
        preps = self.prepositions
        if not preps:
            return []
        return find_occurrences(text, preps)

    def preposition_alternatives(self, phrase: str) -> list[str]:
        """Other members of the phrase's group, sorted."""
        group = self._group_of.get(phrase)
        if group is None:
            raise KeyError(phrase)
        return sorted(p for p in group if p != phrase)


def load_lexicon(path: str | Path | None = None) -> Lexicon:
    """Load a lexicon file; with no path, the packaged seed vocabulary."""
    if path is None:
        raw = resources.files("failforge.data").joinpath("lexicon.json").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    doc = json.loads(raw)
    antonyms = dict(doc.get("verb_antonyms", {}))
    for a, b in list(antonyms.items()):
        antonyms.setdefault(b, a)
    groups = tuple(tuple(g) for g in doc.get("preposition_groups", []))
    return Lexicon(verb_antonyms=antonyms, preposition_groups=groups)
