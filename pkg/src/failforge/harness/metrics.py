"""Detection metrics: binary accuracy and row-normalized confusion matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from ..errors import EmptyInput, UnknownClass


def binary_accuracy(pairs: Sequence[tuple[bool, bool]]) -> float:
    """Fraction of (gold, predicted) success flags that agree."""
    if not pairs:
        raise EmptyInput("no predictions to score")
    return sum(g == p for g, p in pairs) / len(pairs)


@dataclass(frozen=True)
class ConfusionMatrix:
    classes: tuple[str, ...]
    counts: tuple[tuple[int, ...], ...]  # rows = gold, columns = predicted
    row_normalized: tuple[tuple[float, ...], ...]  # percent
    zero_support: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "classes": list(self.classes),
            "counts": [list(r) for r in self.counts],
            "row_normalized": [list(r) for r in self.row_normalized],
            "zero_support": list(self.zero_support),
        }

    def render_text(self) -> str:
        width = max([len(c) for c in self.classes] + [7])
        head = " " * (width + 2) + "  ".join(c.rjust(width) for c in self.classes)
        lines = [head]
        for cls, row in zip(self.classes, self.row_normalized):
            cells = "  ".join(f"{v:>{width}.1f}" for v in row)
            mark = " *" if cls in self.zero_support else "  "
            lines.append(f"{cls.rjust(width)}{mark}{cells}")
        if self.zero_support:
            lines.append("* no ground-truth support")
        return "\n".join(lines)


def confusion_matrix(
    golds: Sequence[str], preds: Sequence[str], classes: Sequence[str]
) -> ConfusionMatrix:
    """counts[i][j] = #(gold=classes[i], pred=classes[j]); rows normalized to 100."""
    if len(golds) != len(preds):
        raise ValueError(f"{len(golds)} golds vs {len(preds)} preds")
    index = {c: i for i, c in enumerate(classes)}
    if len(index) != len(classes):
        raise ValueError("duplicate class names")
    counts = [[0] * len(classes) for _ in classes]
    for g, p in zip(golds, preds):
        if g not in index:
            raise UnknownClass(f"gold category {g!r} not in classes")
        if p not in index:
            raise UnknownClass(f"predicted category {p!r} not in classes")
        counts[index[g]][index[p]] += 1

    normalized = []
    zero = []
    for cls, row in zip(classes, counts):
        support = sum(row)
        if support == 0:
            zero.append(cls)
            normalized.append(tuple(0.0 for _ in row))
        else:
            normalized.append(tuple(100.0 * v / support for v in row))
    return ConfusionMatrix(
        classes=tuple(classes),
        counts=tuple(tuple(r) for r in counts),
        row_normalized=tuple(normalized),
        zero_support=tuple(zero),
    )


@dataclass(frozen=True)
class MetricsReport:
    split_name: str
    n: int
    binary_accuracy: float
    per_kind: dict[str, float] = field(default_factory=dict)
    confusion: ConfusionMatrix | None = None
    parse_failure_rate: float = 0.0
    mean_trace_tokens: float | None = None

    def combined_accuracy(self, average: str = "macro") -> float:
        """Across-kind summary: macro = mean of per-kind, micro = pooled."""
        if average == "micro" or not self.per_kind:
            return self.binary_accuracy
        if average == "macro":
            return sum(self.per_kind.values()) / len(self.per_kind)
        raise ValueError(f"unknown average {average!r}")

    def to_dict(self) -> dict:
        return {
            "split_name": self.split_name,
            "n": self.n,
            "binary_accuracy": self.binary_accuracy,
            "per_kind": dict(self.per_kind),
            "confusion": self.confusion.to_dict() if self.confusion else None,
            "parse_failure_rate": self.parse_failure_rate,
            "mean_trace_tokens": self.mean_trace_tokens,
        }

    def render_text(self) -> str:
        rows = [
            ("split", self.split_name),
            ("samples", str(self.n)),
            ("binary accuracy", f"{self.binary_accuracy:.4f}"),
        ]
        for kind, acc in sorted(self.per_kind.items()):
            rows.append((f"accuracy [{kind}]", f"{acc:.4f}"))
        rows.append(("parse failures", f"{self.parse_failure_rate:.4f}"))
        if self.mean_trace_tokens is not None:
            rows.append(("mean trace tokens", f"{self.mean_trace_tokens:.1f}"))
        width = max(len(k) for k, _ in rows)
        lines = [f"{k.ljust(width)}  {v}" for k, v in rows]
        if self.confusion is not None:
            lines.append("")
            lines.append(self.confusion.render_text())
        return "\n".join(lines)
