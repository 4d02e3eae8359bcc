"""failforge: procedurally synthesize robot failure datasets from successes,
annotate them with validated reasoning traces, evaluate failure detectors,
and serve plan/execution verification over HTTP."""

__version__ = "0.1.0"

from .episode import (
    CameraDecl,
    Episode,
    FrameRef,
    PlanStep,
    RobotState,
    SceneObject,
    ValidationReport,
    load_corpus,
    load_episode,
    save_episode,
    validate_episode,
)
from .lexicon import Lexicon, load_lexicon
from .reversal import reverse_corpus, reverse_episode
from .samples import (
    ExecutionSample,
    PlanningSample,
    Provenance,
    read_shard,
    shard_digest,
    write_shard,
)
from .taxonomy import (
    EXECUTION_CATEGORIES,
    PLANNING_CATEGORIES,
    ExecutionCategory,
    FailureLabel,
    Kind,
    PlanningCategory,
    category_menu,
    failure_menu,
)
from .protocol import (
    DetectionQuery,
    Verdict,
    build_exec_query,
    build_plan_query,
    parse_verdict,
    serialize_verdict,
)
from .gateway import (
    ChatRequest,
    ChatResponse,
    GatewayConfig,
    Message,
    ModelGateway,
    RetryConfig,
    TextPart,
    cache_key,
    text_request,
)
from .imaging import ImagePart, compose_grid, grid_cell, prepare_image_parts
from .cot import (
    GroundingInfo,
    Prompt,
    ReasoningTrace,
    build_cot_prompt_execution,
    build_cot_prompt_planning,
    generate_cot,
    validate_trace,
)

__all__ = [
    "CameraDecl",
    "ChatRequest",
    "ChatResponse",
    "DetectionQuery",
    "EXECUTION_CATEGORIES",
    "Episode",
    "ExecutionCategory",
    "ExecutionSample",
    "FailureLabel",
    "FrameRef",
    "GatewayConfig",
    "GroundingInfo",
    "ImagePart",
    "Kind",
    "Lexicon",
    "Message",
    "ModelGateway",
    "PLANNING_CATEGORIES",
    "PlanStep",
    "PlanningCategory",
    "PlanningSample",
    "Prompt",
    "Provenance",
    "ReasoningTrace",
    "RetryConfig",
    "RobotState",
    "SceneObject",
    "TextPart",
    "ValidationReport",
    "Verdict",
    "build_cot_prompt_execution",
    "build_cot_prompt_planning",
    "build_exec_query",
    "build_plan_query",
    "cache_key",
    "category_menu",
    "compose_grid",
    "failure_menu",
    "generate_cot",
    "grid_cell",
    "load_corpus",
    "load_episode",
    "load_lexicon",
    "parse_verdict",
    "prepare_image_parts",
    "read_shard",
    "reverse_corpus",
    "reverse_episode",
    "save_episode",
    "serialize_verdict",
    "shard_digest",
    "text_request",
    "validate_episode",
    "validate_trace",
    "write_shard",
    "__version__",
]
