"""Dataset statistics over shard files.

Understands the split layout {dataset}/{train,val,test}/{planning,execution}.jsonl
but also takes bare shard files or a single split directory.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from ..samples import read_shard

_SPLIT_NAMES = ("train", "val", "test")
_KIND_FILES = ("planning", "execution")


@dataclass
class ShardStats:
    split: str
    kind: str
    n: int = 0
    n_success: int = 0
    n_failure: int = 0
    by_category: Counter = field(default_factory=Counter)
    by_mode: Counter = field(default_factory=Counter)
    cot_tokens: list[int] = field(default_factory=list)

    @property
    def mean_cot_tokens(self) -> float | None:
        if not self.cot_tokens:
            return None
        return sum(self.cot_tokens) / len(self.cot_tokens)

    def to_dict(self) -> dict:
        return {
            "split": self.split,
            "kind": self.kind,
            "n": self.n,
            "n_success": self.n_success,
            "n_failure": self.n_failure,
            "by_category": dict(sorted(self.by_category.items())),
            "by_mode": dict(sorted(self.by_mode.items())),
            "mean_cot_tokens": self.mean_cot_tokens,
        }


@dataclass
class DatasetStats:
    shards: list[ShardStats] = field(default_factory=list)

    def total(self, kind: str | None = None) -> int:
        return sum(s.n for s in self.shards if kind is None or s.kind == kind)

    def find(self, split: str, kind: str) -> ShardStats | None:
        for s in self.shards:
            if s.split == split and s.kind == kind:
                return s
        return None

    def to_dict(self) -> dict:
        return {"shards": [s.to_dict() for s in self.shards]}


def _stat_one(path: Path, split: str, kind: str) -> ShardStats:
    stats = ShardStats(split=split, kind=kind)
    for sample in read_shard(path):
        stats.n += 1
        if sample.label.success:
            stats.n_success += 1
        else:
            stats.n_failure += 1
        stats.by_category[sample.label.category] += 1
        stats.by_mode[sample.provenance.base_mode] += 1
        if sample.cot:
            stats.cot_tokens.append(len(sample.cot.split()))
    return stats


def _discover(root: Path) -> list[tuple[Path, str, str]]:
    if root.is_file():
        return [(root, root.parent.name or "-", root.stem)]
    found = []
    for split in _SPLIT_NAMES:
        for stem in _KIND_FILES:
            p = root / split / f"{stem}.jsonl"
            if p.is_file():
                found.append((p, split, stem))
    if not found:  # maybe root is itself one split directory
        for stem in _KIND_FILES:
            p = root / f"{stem}.jsonl"
            if p.is_file():
                found.append((p, root.name, stem))
    if not found:
        for p in sorted(root.rglob("*.jsonl")):
            found.append((p, p.parent.name, p.stem))
    return found


def dataset_stats(paths: str | Path | Iterable[str | Path]) -> DatasetStats:
    """Shard statistics for a dataset root, split dir, file, or list of files."""
    if isinstance(paths, (str, Path)):
        entries = _discover(Path(paths))
    else:
        entries = [e for p in paths for e in _discover(Path(p))]
    out = DatasetStats()
    for path, split, kind in entries:
        out.shards.append(_stat_one(path, split, kind))
    return out


def render_stats(stats: DatasetStats) -> str:
    header = ("split", "kind", "n", "success", "failure", "mean cot tokens")
    rows = []
    for s in stats.shards:
        mean = f"{s.mean_cot_tokens:.1f}" if s.mean_cot_tokens is not None else "-"
        rows.append((s.split, s.kind, str(s.n), str(s.n_success), str(s.n_failure), mean))
    widths = [max(len(r[i]) for r in [header, *rows]) for i in range(len(header))]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for r in rows:
        lines.append("  ".join(c.ljust(w) for c, w in zip(r, widths)))
    for s in stats.shards:
        if s.by_category:
            cats = ", ".join(f"{c}={n}" for c, n in sorted(s.by_category.items()))
            lines.append(f"{s.split}/{s.kind} categories: {cats}")
    return "\n".join(lines)
