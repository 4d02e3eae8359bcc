"""Client for chat-completion endpoints.

Speaks the common chat-completion wire format (text and data-URI image
parts), retries transient failures with jittered exponential backoff,
bounds concurrent requests with one gateway-wide semaphore, and serves
repeated requests from a content-addressed disk cache.
"""

from __future__ import annotations

import hashlib
import os
import random
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Union

import httpx

from .errors import GatewayError, GatewayTimeoutError
from .imaging import ImagePart
from .seeding import canonical_dumps


@dataclass(frozen=True)
class TextPart:
    text: str

    def to_wire(self) -> dict:
        return {"type": "text", "text": self.text}


Part = Union[TextPart, ImagePart]


@dataclass(frozen=True)
class Message:
    role: str  # "system" | "user" | "assistant"
    parts: tuple[Part, ...]

    def to_wire(self) -> dict:
        return {"role": self.role, "content": [p.to_wire() for p in self.parts]}


@dataclass(frozen=True)
class ChatRequest:
    model_id: str
    messages: tuple[Message, ...]
    max_tokens: int = 512
    temperature: float = 0.0

    def to_wire(self) -> dict:
        return {
            "model": self.model_id,
            "messages": [m.to_wire() for m in self.messages],
            "max_tokens": self.max_tokens,
            "temperature": self.temperature,
        }


@dataclass(frozen=True)
class ChatResponse:
    text: str
    usage: dict
    attempts: int
    cached: bool = False


@dataclass(frozen=True)
class RetryConfig:
    max_attempts: int = 4
    base_backoff_ms: int = 500
    jitter: float = 0.2


@dataclass(frozen=True)
class GatewayConfig:
    base_url: str
    api_key_env: str = "FAILFORGE_API_KEY"
    max_inflight: int = 8
    retry: RetryConfig = field(default_factory=RetryConfig)
    cache_dir: str | None = None
    timeout_s: float = 60.0

    def __post_init__(self):
        if self.max_inflight < 1:
            raise ValueError("max_inflight must be >= 1")
        if self.retry.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")


def canonical_request(req: ChatRequest) -> str:
    return canonical_dumps(req.to_wire())


def cache_key(req: ChatRequest) -> str:
    return hashlib.sha256(canonical_request(req).encode("utf-8")).hexdigest()


def text_request(
    model_id: str,
    user_text: str,
    images: tuple[ImagePart, ...] = (),
    system: str | None = None,
    max_tokens: int = 512,
    temperature: float = 0.0,
) -> ChatRequest:
    messages = []
    if system:
        messages.append(Message(role="system", parts=(TextPart(system),)))
    parts: tuple[Part, ...] = (TextPart(user_text),) + tuple(images)
    messages.append(Message(role="user", parts=parts))
    return ChatRequest(
        model_id=model_id,
        messages=tuple(messages),
        max_tokens=max_tokens,
        temperature=temperature,
    )


class ModelGateway:
    """Shareable across threads; one in-flight semaphore per gateway."""

    def __init__(self, cfg: GatewayConfig):
        self.cfg = cfg
        self._sem = threading.BoundedSemaphore(cfg.max_inflight)
        self._client = httpx.Client(timeout=cfg.timeout_s)

    def close(self):
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    # -- cache ---------------------------------------------------------

    def _cache_path(self, key: str) -> Path | None:
        if not self.cfg.cache_dir:
            return None
        return Path(self.cfg.cache_dir) / f"{key}.json"

    def _cache_load(self, key: str) -> ChatResponse | None:
        path = self._cache_path(key)
        if path is None or not path.is_file():
            return None
        import json

        doc = json.loads(path.read_text("utf-8"))
        return ChatResponse(text=doc["text"], usage=doc.get("usage", {}), attempts=0, cached=True)

    def _cache_store(self, key: str, resp: ChatResponse):
        path = self._cache_path(key)
        if path is None:
            return
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(f".tmp{os.getpid()}.{threading.get_ident()}")
        tmp.write_text(canonical_dumps({"text": resp.text, "usage": resp.usage}), "utf-8")
        os.replace(tmp, path)

    # -- transport -----------------------------------------------------

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.cfg.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def chat_completion(self, req: ChatRequest) -> ChatResponse:
        key = cache_key(req)
        cached = self._cache_load(key)
        if cached is not None:
            return cached

        url = self.cfg.base_url.rstrip("/") + "/chat/completions"
        body = req.to_wire()
        retry = self.cfg.retry
        last_status: int | None = None
        last_timeout = False

        for attempt in range(1, retry.max_attempts + 1):
            try:
                with self._sem:
                    resp = self._client.post(url, json=body, headers=self._headers())
            except httpx.TimeoutException:
                last_status, last_timeout = None, True
            except httpx.HTTPError:
                last_status, last_timeout = None, False
            else:
                last_timeout = False
                last_status = resp.status_code
                if resp.status_code == 200:
                    try:
                        doc = resp.json()
                        text = doc["choices"][0]["message"]["content"]
                        usage = doc.get("usage", {})
                    except (KeyError, IndexError, TypeError, ValueError) as e:
                        raise GatewayError(
                            f"malformed completion body: {e}", status=200, attempts=attempt
                        ) from e
                    out = ChatResponse(text=text, usage=usage, attempts=attempt)
                    self._cache_store(key, out)
                    return out
                if resp.status_code not in (429,) and resp.status_code < 500:
                    raise GatewayError(
                        f"endpoint rejected request: {resp.status_code}",
                        status=resp.status_code,
                        attempts=attempt,
                    )
            if attempt < retry.max_attempts:
                delay = retry.base_backoff_ms / 1000.0 * (2 ** (attempt - 1))
                delay *= 1 + retry.jitter * (2 * random.random() - 1)
                time.sleep(max(delay, 0.0))

        if last_timeout:
            raise GatewayTimeoutError(
                f"timed out after {retry.max_attempts} attempts",
                status=None,
                attempts=retry.max_attempts,
            )
        raise GatewayError(
            f"exhausted {retry.max_attempts} attempts (last status {last_status})",
            status=last_status,
            attempts=retry.max_attempts,
        )
