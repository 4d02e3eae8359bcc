"""Deterministic seeding: stable 64-bit hashing, canonical JSON, seeded choice."""

from __future__ import annotations

import hashlib
import json
from typing import Sequence, TypeVar

T = TypeVar("T")

_SEP = b"\x1f"


def hash64(*parts: object) -> int:
    """Stable 64-bit hash of heterogeneous parts; identical across runs and platforms."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(str(p).encode("utf-8"))
        h.update(_SEP)
    return int.from_bytes(h.digest(), "big")


def stable_id(*parts: object) -> str:
    """16-hex-character stable identifier derived like hash64."""
    return format(hash64(*parts), "016x")


def canonical_dumps(obj: object) -> str:
    """Canonical JSON: sorted keys, compact separators, raw unicode.

    Same object, same bytes, so file digests and cache keys are stable.
    """
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def seeded_choice(options: Sequence[T], seed: int, *, presorted: bool = False) -> T:
    """Pick one of k options as seed mod k, over options sorted lexicographically.

    Pass presorted=True when the sequence order is itself the contract
    (e.g. enum declaration order) and must not be re-sorted.
    """
    if not options:
        raise ValueError("seeded_choice over empty options")
    pool = list(options) if presorted else sorted(options, key=str)
    return pool[seed % len(pool)]
