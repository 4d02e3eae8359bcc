"""The verification service: plan/execution checks over a detector backend.

Stateless by construction; every request carries its own images inline,
and determinism comes from the backend (temperature 0 plus the gateway
cache), not from anything held here.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

from fastapi import FastAPI, Request
from fastapi.encoders import jsonable_encoder
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .. import __version__
from ..errors import GatewayError, GatewayTimeoutError, VerdictError
from ..gateway import GatewayConfig, ModelGateway, RetryConfig
from ..imaging import ImagePart, compose_grid, encode_image
from ..protocol import build_exec_query, build_plan_query, parse_verdict
from ..taxonomy import Kind, category_menu
from ..templates import load_template
from .backend import DetectorBackend, GatewayBackend
from .guarded import retry_target_for
from .schemas import (
    ExecutionVerifyRequest,
    HealthResponse,
    ImagePayload,
    PlanVerifyRequest,
    VerdictResponse,
)


@dataclass(frozen=True)
class ServiceSettings:
    backend_url: str = "http://127.0.0.1:8100/v1"
    api_key_env: str = "FAILFORGE_API_KEY"
    model_id: str = "detector"
    max_inflight: int = 8
    max_attempts: int = 4
    base_backoff_ms: int = 500
    timeout_s: float = 60.0
    cache_dir: str | None = None
    max_tokens: int = 512


def _parts(payloads: list[ImagePayload], phase: str | None = None) -> list[ImagePart]:
    parts = []
    for i, p in enumerate(payloads, 1):
        cam = f" ({p.camera_id})" if p.camera_id else ""
        label = f"{phase} view {i}{cam}" if phase else f"initial view {i}{cam}"
        parts.append(ImagePart(media_type=p.media_type, b64=p.b64, label=label))
    return parts


def _grid_part(req: ExecutionVerifyRequest) -> list[ImagePart]:
    cells = []
    for i, (start, end) in enumerate(zip(req.start_images, req.end_images)):
        view = start.camera_id or f"view{i:02d}"
        cells.append((view, 0, ImagePart(start.media_type, start.b64).decode()))
        cells.append((view, 1, ImagePart(end.media_type, end.b64).decode()))
    grid = compose_grid(cells, views=len(req.start_images), timesteps=2)
    return [encode_image(grid, label=f"grid of {len(req.start_images)} views x start/end")]


def create_app(
    settings: ServiceSettings | None = None, backend: DetectorBackend | None = None
) -> FastAPI:
    settings = settings or ServiceSettings()
    if backend is None:
        gateway = ModelGateway(
            GatewayConfig(
                base_url=settings.backend_url,
                api_key_env=settings.api_key_env,
                max_inflight=settings.max_inflight,
                retry=RetryConfig(
                    max_attempts=settings.max_attempts,
                    base_backoff_ms=settings.base_backoff_ms,
                ),
                cache_dir=settings.cache_dir,
                timeout_s=settings.timeout_s,
            )
        )
        backend = GatewayBackend(gateway, model_id=settings.model_id, max_tokens=settings.max_tokens)

    app = FastAPI(title="failforge verification service", version=__version__)
    template_ids = ",".join(
        load_template(name).template_id for name in ("detect_plan_v1", "detect_exec_v1")
    )

    @app.exception_handler(RequestValidationError)
    async def _invalid(request: Request, exc: RequestValidationError):
        # errors() can carry the raising ValueError in ctx; encode before replying
        return JSONResponse(status_code=400, content={"detail": jsonable_encoder(exc.errors())})

    def _respond(kind: Kind, raw: str, started: float) -> VerdictResponse:
        verdict = parse_verdict(raw, kind)
        if verdict.category not in category_menu(kind):  # defense in depth
            raise VerdictError(f"category {verdict.category} invalid for {kind.value}", raw)
        return VerdictResponse(
            success=verdict.success,
            category=verdict.category,
            reasoning=verdict.reasoning,
            latency_ms=(time.perf_counter() - started) * 1000.0,
            retry_target=None if verdict.success else retry_target_for(kind),
        )

    def _call(kind: Kind, query) -> JSONResponse | str:
        try:
            return backend.complete(query)
        except GatewayTimeoutError as e:
            return JSONResponse(status_code=504, content={"detail": str(e)})
        except GatewayError as e:
            return JSONResponse(status_code=502, content={"detail": str(e)})

    @app.post("/v1/verify/plan", response_model=VerdictResponse)
    def verify_plan(req: PlanVerifyRequest):
        started = time.perf_counter()
        query = build_plan_query(
            req.task_instruction, req.plan, _parts(req.images), answer_mode=req.options.answer_mode
        )
        raw = _call(Kind.PLAN, query)
        if isinstance(raw, JSONResponse):
            return raw
        try:
            return _respond(Kind.PLAN, raw, started)
        except VerdictError as e:
            return JSONResponse(
                status_code=502, content={"detail": str(e), "raw_text": e.raw_text}
            )

    @app.post("/v1/verify/execution", response_model=VerdictResponse)
    def verify_execution(req: ExecutionVerifyRequest):
        started = time.perf_counter()
        if req.options.image_mode == "grid":
            parts = _grid_part(req)
        else:
            parts = _parts(req.start_images, "start") + _parts(req.end_images, "end")
        query = build_exec_query(
            req.task_instruction,
            req.subtask_instruction,
            parts,
            answer_mode=req.options.answer_mode,
            image_mode=req.options.image_mode,
        )
        raw = _call(Kind.EXECUTION, query)
        if isinstance(raw, JSONResponse):
            return raw
        try:
            return _respond(Kind.EXECUTION, raw, started)
        except VerdictError as e:
            return JSONResponse(
                status_code=502, content={"detail": str(e), "raw_text": e.raw_text}
            )

    @app.get("/healthz", response_model=HealthResponse)
    def healthz():
        status = backend.probe()
        return HealthResponse(
            ok=status != "unreachable",
            version=__version__,
            template_id=template_ids,
            backend=status,
        )

    return app
