"""One TOML config shared by every subcommand.

Precedence is flags > environment > file > defaults. Environment overrides
are spelled FAILFORGE_<SECTION>_<KEY> (FAILFORGE_GATEWAY_BASE_URL, ...);
top-level keys drop the section (FAILFORGE_MASTER_SEED).
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

try:
    import tomllib
except ImportError:  # pragma: no cover - 3.10 fallback
    import tomli as tomllib

from .errors import SchemaError
from .gateway import GatewayConfig, RetryConfig
from .harness.evaluate import EvalOptions
from .harness.export import TrainingExportConfig
from .perturb.common import GenConfig
from .seeding import canonical_dumps
from .service.app import ServiceSettings

# (section, key) -> env var. Values parse as their field type; a bad parse
# is a config error, not a crash.
_ENV_OVERRIDES = {
    ("", "master_seed"): "FAILFORGE_MASTER_SEED",
    ("", "out_root"): "FAILFORGE_OUT_ROOT",
    ("gateway", "base_url"): "FAILFORGE_GATEWAY_BASE_URL",
    ("gateway", "api_key_env"): "FAILFORGE_GATEWAY_API_KEY_ENV",
    ("gateway", "cache_dir"): "FAILFORGE_GATEWAY_CACHE_DIR",
    ("service", "backend_url"): "FAILFORGE_BACKEND_URL",
    ("service", "model_id"): "FAILFORGE_SERVICE_MODEL_ID",
}


@dataclass(frozen=True)
class PipelineConfig:
    corpus: tuple[str, ...] = ()
    lexicon: str | None = None
    out_root: str = "out"
    master_seed: int = 0
    planning: GenConfig = field(default_factory=lambda: GenConfig(target=0))
    execution: GenConfig = field(default_factory=lambda: GenConfig(target=0))
    gateway: GatewayConfig | None = None
    export: TrainingExportConfig = field(
        default_factory=lambda: TrainingExportConfig(strategy="thinking")
    )
    eval_options: EvalOptions = field(default_factory=EvalOptions)
    cot: dict[str, Any] = field(default_factory=dict)
    service: ServiceSettings = field(default_factory=ServiceSettings)
    raw: dict = field(default_factory=dict, compare=False)

    def config_hash(self) -> str:
        """Stable digest of the effective config, for artifact provenance."""
        doc = dict(self.raw)
        doc["master_seed"] = self.master_seed
        return hashlib.sha256(canonical_dumps(doc).encode("utf-8")).hexdigest()[:16]


def _apply_env(doc: dict) -> dict:
    for (section, key), var in _ENV_OVERRIDES.items():
        val = os.environ.get(var)
        if val is None:
            continue
        target = doc
        if section:
            target = doc.setdefault(section, {})
        if not isinstance(target, dict):
            raise SchemaError(f"config section {section!r} is not a table")
        target[key] = int(val) if key.endswith("seed") else val
    return doc


def _gateway_from(doc: Mapping) -> GatewayConfig | None:
    if "base_url" not in doc:
        return None
    retry_doc = doc.get("retry", {})
    retry = RetryConfig(
        max_attempts=int(retry_doc.get("max_attempts", 4)),
        base_backoff_ms=int(retry_doc.get("base_backoff_ms", 500)),
        jitter=float(retry_doc.get("jitter", 0.2)),
    )
    return GatewayConfig(
        base_url=str(doc["base_url"]),
        api_key_env=str(doc.get("api_key_env", "FAILFORGE_API_KEY")),
        max_inflight=int(doc.get("max_inflight", 8)),
        retry=retry,
        cache_dir=doc.get("cache_dir"),
        timeout_s=float(doc.get("timeout_s", 60.0)),
    )


def _gen_from(doc: Mapping, master_seed: int) -> GenConfig:
    merged = dict(doc)
    merged.setdefault("target", 0)
    merged.setdefault("master_seed", master_seed)
    return GenConfig.from_dict(merged)


def _export_from(doc: Mapping, master_seed: int) -> TrainingExportConfig:
    return TrainingExportConfig(
        strategy=str(doc.get("strategy", "thinking")),
        dropout_ratio=float(doc.get("dropout_ratio", 0.5)),
        view_policy=str(doc.get("view_policy", "four")),
        seed=int(doc.get("seed", master_seed)),
    )


def _eval_from(doc: Mapping) -> EvalOptions:
    return EvalOptions(
        split_name=str(doc.get("split_name", "eval")),
        answer_mode=str(doc.get("answer_mode", "thinking")),
        image_mode=str(doc.get("image_mode", "separated")),
        view_limit=int(doc.get("view_limit", 0)),
        corpus_root=doc.get("corpus_root"),
        audit_path=doc.get("audit_path"),
        jobs=int(doc.get("jobs", 1)),
    )


def _service_from(doc: Mapping) -> ServiceSettings:
    return ServiceSettings(
        backend_url=str(doc.get("backend_url", "http://127.0.0.1:8100/v1")),
        api_key_env=str(doc.get("api_key_env", "FAILFORGE_API_KEY")),
        model_id=str(doc.get("model_id", "detector")),
        max_inflight=int(doc.get("max_inflight", 8)),
        max_attempts=int(doc.get("max_attempts", 4)),
        base_backoff_ms=int(doc.get("base_backoff_ms", 500)),
        timeout_s=float(doc.get("timeout_s", 60.0)),
        cache_dir=doc.get("cache_dir"),
        max_tokens=int(doc.get("max_tokens", 512)),
    )


def config_from_dict(doc: Mapping, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    """Build the pipeline config; `overrides` are flag values (highest wins)."""
    merged = _apply_env({k: v for k, v in doc.items()})
    for key, val in (overrides or {}).items():
        if val is None:
            continue
        merged[key] = val
    try:
        master_seed = int(merged.get("master_seed", 0))
        corpus = merged.get("corpus", ())
        if isinstance(corpus, (str, Path)):
            corpus = (str(corpus),)
        return PipelineConfig(
            corpus=tuple(str(p) for p in corpus),
            lexicon=merged.get("lexicon"),
            out_root=str(merged.get("out_root", "out")),
            master_seed=master_seed,
            planning=_gen_from(merged.get("planning", {}), master_seed),
            execution=_gen_from(merged.get("execution", {}), master_seed),
            gateway=_gateway_from(merged.get("gateway", {})),
            export=_export_from(merged.get("export", {}), master_seed),
            eval_options=_eval_from(merged.get("eval", {})),
            cot=dict(merged.get("cot", {})),
            service=_service_from(merged.get("service", {})),
            raw={k: v for k, v in merged.items() if k != "raw"},
        )
    except (KeyError, TypeError, ValueError) as e:
        raise SchemaError(f"bad config value: {e}") from e


def load_config(path: str | Path | None, overrides: Mapping[str, Any] | None = None) -> PipelineConfig:
    doc: dict = {}
    if path is not None:
        raw = Path(path).read_bytes()
        try:
            doc = tomllib.loads(raw.decode("utf-8"))
        except tomllib.TOMLDecodeError as e:
            raise SchemaError(f"{path}: {e}") from e
    return config_from_dict(doc, overrides)
