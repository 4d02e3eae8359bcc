"""Versioned prompt templates, shipped as package data.

A template's id is its name plus a digest of its bytes, so logs and shards
record exactly which prompt produced them.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from pathlib import Path


@dataclass(frozen=True)
class Template:
    name: str
    text: str

    @property
    def template_id(self) -> str:
        digest = hashlib.sha256(self.text.encode("utf-8")).hexdigest()[:12]
        return f"{self.name}:{digest}"

    def render(self, **fields: str) -> str:
        return self.text.format(**fields)


def load_template(name: str) -> Template:
    """Load a packaged template by name (without the .txt suffix)."""
    text = resources.files("failforge.data.templates").joinpath(f"{name}.txt").read_text("utf-8")
    return Template(name=name, text=text)


def load_template_file(path: str | Path) -> Template:
    p = Path(path)
    return Template(name=p.stem, text=p.read_text("utf-8"))


def builtin_template_names() -> list[str]:
    root = resources.files("failforge.data.templates")
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".txt"))
