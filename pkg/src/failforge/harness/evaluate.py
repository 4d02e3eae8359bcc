"""Run a detector over a sample split and score it.

The detector is just a callable from DetectionQuery to raw reply text, so
the same harness drives a live gateway, a cache replay, or a scripted
stub. Every sample lands in a JSONL audit log from which the headline
accuracy can be recomputed independently.
"""

from __future__ import annotations

import hashlib
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from ..errors import VerdictError
from ..imaging import prepare_image_parts
from ..protocol import DetectionQuery, build_exec_query, build_plan_query, parse_verdict
from ..samples import PlanningSample, Sample
from ..taxonomy import Kind, category_menu
from .metrics import MetricsReport, binary_accuracy, confusion_matrix

Detector = Callable[[DetectionQuery], str]


@dataclass(frozen=True)
class EvalOptions:
    split_name: str = "eval"
    answer_mode: str = "thinking"
    image_mode: str = "separated"
    view_limit: int = 0
    corpus_root: str | None = None
    audit_path: str | None = None
    jobs: int = 1


def build_query(sample: Sample, opts: EvalOptions) -> DetectionQuery:
    parts = prepare_image_parts(
        sample,
        mode=opts.image_mode,
        view_limit=opts.view_limit,
        corpus_root=opts.corpus_root,
    )
    if isinstance(sample, PlanningSample):
        return build_plan_query(
            sample.task_instruction, sample.plan, parts, answer_mode=opts.answer_mode
        )
    return build_exec_query(
        sample.task_instruction,
        sample.subtask_instruction,
        parts,
        answer_mode=opts.answer_mode,
        image_mode=opts.image_mode,
    )


def _query_digest(query: DetectionQuery) -> str:
    h = hashlib.sha256()
    h.update(query.kind.value.encode())
    h.update(query.text_prompt.encode("utf-8"))
    for part in query.image_parts:
        h.update((part.b64 or "").encode("ascii"))
    h.update(query.answer_mode.encode())
    return h.hexdigest()


def _score_one(sample: Sample, detector: Detector, opts: EvalOptions) -> dict:
    query = build_query(sample, opts)
    row = {
        "sample_id": sample.sample_id,
        "kind": sample.kind.value,
        "query_sha256": _query_digest(query),
        "gold": sample.label.to_dict(),
        "raw_text": None,
        "parsed": None,
        "error": None,
        "correct": False,
    }
    try:
        raw = detector(query)
    except Exception as e:  # endpoint failures score as incorrect, never abort
        row["error"] = f"detector: {e}"
        return row
    row["raw_text"] = raw
    try:
        verdict = parse_verdict(raw, sample.kind)
    except VerdictError as e:
        row["error"] = f"parse: {e}"
        return row
    row["parsed"] = {
        "success": verdict.success,
        "category": verdict.category,
        "reasoning": verdict.reasoning,
    }
    row["correct"] = verdict.success == sample.label.success
    return row


def evaluate_split(
    samples: Sequence[Sample], detector: Detector, opts: EvalOptions | None = None
) -> MetricsReport:
    opts = opts or EvalOptions()
    ordered = sorted(samples, key=lambda s: s.sample_id)
    if opts.jobs > 1:
        with ThreadPoolExecutor(max_workers=opts.jobs) as pool:
            rows = list(pool.map(lambda s: _score_one(s, detector, opts), ordered))
    else:
        rows = [_score_one(s, detector, opts) for s in ordered]

    if opts.audit_path:
        path = Path(opts.audit_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True, ensure_ascii=False) + "\n")

    pairs = []
    per_kind_pairs: dict[str, list] = {}
    golds, preds = [], []
    parse_failures = 0
    reasoning_tokens: list[int] = []
    for sample, row in zip(ordered, rows):
        predicted_success = bool(row["parsed"] and row["parsed"]["success"])
        if row["parsed"] is None:
            predicted_success = not sample.label.success  # force a miss
            if row["error"] and str(row["error"]).startswith("parse:"):
                parse_failures += 1
        pairs.append((sample.label.success, predicted_success))
        per_kind_pairs.setdefault(sample.kind.value, []).append(
            (sample.label.success, predicted_success)
        )
        if row["parsed"] is not None:
            golds.append(sample.label.category)
            preds.append(row["parsed"]["category"])
            if row["parsed"].get("reasoning"):
                reasoning_tokens.append(len(row["parsed"]["reasoning"].split()))

    kinds = {s.kind for s in ordered}
    if len(kinds) == 1:
        classes = category_menu(next(iter(kinds)))
    else:
        classes = tuple(sorted(set(category_menu(Kind.PLAN)) | set(category_menu(Kind.EXECUTION))))
    confusion = confusion_matrix(golds, preds, classes) if golds else None

    return MetricsReport(
        split_name=opts.split_name,
        n=len(ordered),
        binary_accuracy=binary_accuracy(pairs) if pairs else 0.0,
        per_kind={k: binary_accuracy(v) for k, v in sorted(per_kind_pairs.items())},
        confusion=confusion,
        parse_failure_rate=parse_failures / len(ordered) if ordered else 0.0,
        mean_trace_tokens=(
            sum(reasoning_tokens) / len(reasoning_tokens) if reasoning_tokens else None
        ),
    )


def accuracy_from_audit(path: str | Path) -> float:
    """Recompute binary accuracy from an audit log alone."""
    total = 0
    correct = 0
    for line in Path(path).read_text("utf-8").splitlines():
        if not line.strip():
            continue
        row = json.loads(line)
        total += 1
        correct += bool(row["correct"])
    if total == 0:
        raise ValueError(f"empty audit log {path}")
    return correct / total
