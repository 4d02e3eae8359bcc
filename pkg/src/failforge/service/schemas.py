"""Request/response bodies for the verification API."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field, model_validator


class ImagePayload(BaseModel):
    b64: str = Field(min_length=1)
    media_type: str = "image/png"
    camera_id: str | None = None


class VerifyOptions(BaseModel):
    answer_mode: Literal["direct", "thinking"] = "thinking"
    image_mode: Literal["separated", "grid"] = "separated"


class PlanVerifyRequest(BaseModel):
    task_instruction: str
    plan: list[str] = Field(min_length=1)
    images: list[ImagePayload] = Field(min_length=1)
    options: VerifyOptions = VerifyOptions()


class ExecutionVerifyRequest(BaseModel):
    task_instruction: str
    subtask_instruction: str
    start_images: list[ImagePayload] = Field(min_length=1)
    end_images: list[ImagePayload] = Field(min_length=1)
    options: VerifyOptions = VerifyOptions()

    @model_validator(mode="after")
    def _matched_views(self):
        if len(self.start_images) != len(self.end_images):
            raise ValueError(
                f"start/end view counts differ: {len(self.start_images)} vs {len(self.end_images)}"
            )
        return self


class VerdictResponse(BaseModel):
    success: bool
    category: str
    reasoning: str | None = None
    latency_ms: float
    retry_target: str | None = None


class HealthResponse(BaseModel):
    ok: bool
    version: str
    template_id: str
    backend: str
