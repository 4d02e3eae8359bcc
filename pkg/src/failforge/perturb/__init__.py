from .common import GenConfig
from .planning import (
    PLANNING_MODES,
    generate_planning_samples,
    perturb_contradictory,
    perturb_missing_subtask,
    perturb_wrong_object,
    perturb_wrong_order,
    perturb_wrong_state_or_placement,
    success_planning_sample,
)
from .execution import (
    EXECUTION_MODES,
    SIM_DIRECTIVE_MODES,
    SimDirective,
    emit_sim_directive,
    generate_execution_samples,
    ingest_sim_rollout,
    perturb_revert_action,
    perturb_semantic_mismatch,
    preposition_swap,
    read_directives,
    success_execution_sample,
    write_directives,
)

__all__ = [
    "GenConfig",
    "PLANNING_MODES",
    "EXECUTION_MODES",
    "SIM_DIRECTIVE_MODES",
    "SimDirective",
    "emit_sim_directive",
    "generate_execution_samples",
    "generate_planning_samples",
    "ingest_sim_rollout",
    "perturb_contradictory",
    "perturb_missing_subtask",
    "perturb_revert_action",
    "perturb_semantic_mismatch",
    "perturb_wrong_object",
    "perturb_wrong_order",
    "perturb_wrong_state_or_placement",
    "preposition_swap",
    "read_directives",
    "success_execution_sample",
    "success_planning_sample",
    "write_directives",
]
