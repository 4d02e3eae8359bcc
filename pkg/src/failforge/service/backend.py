"""Detector backends: where a DetectionQuery's raw reply text comes from."""

from __future__ import annotations

from typing import Callable, Protocol

import httpx

from ..gateway import ModelGateway, text_request
from ..protocol import DetectionQuery


class DetectorBackend(Protocol):
    def complete(self, query: DetectionQuery) -> str: ...

    def probe(self) -> str: ...


class GatewayBackend:
    """Forward queries to a chat-completion endpoint through the gateway."""

    def __init__(self, gateway: ModelGateway, model_id: str = "detector", max_tokens: int = 512):
        self.gateway = gateway
        self.model_id = model_id
        self.max_tokens = max_tokens

    def complete(self, query: DetectionQuery) -> str:
        req = text_request(
            self.model_id,
            query.text_prompt,
            images=tuple(p for p in query.image_parts if p.b64 is not None),
            max_tokens=self.max_tokens,
        )
        return self.gateway.chat_completion(req).text

    def probe(self) -> str:
        """Reachability label for healthz; any HTTP answer counts as reachable."""
        try:
            httpx.get(self.gateway.cfg.base_url, timeout=2.0)
        except httpx.HTTPError:
            return "unreachable"
        return "reachable"


class ScriptedBackend:
    """Test backend driven by a plain function."""

    def __init__(self, fn: Callable[[DetectionQuery], str]):
        self.fn = fn

    def complete(self, query: DetectionQuery) -> str:
        return self.fn(query)

    def probe(self) -> str:
        return "scripted"
