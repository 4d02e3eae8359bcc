from .app import ServiceSettings, create_app
from .backend import DetectorBackend, GatewayBackend, ScriptedBackend
from .guarded import GuardedOutcome, RetryPolicy, retry_target_for, run_guarded_step

__all__ = [
    "DetectorBackend",
    "GatewayBackend",
    "GuardedOutcome",
    "RetryPolicy",
    "ScriptedBackend",
    "ServiceSettings",
    "create_app",
    "retry_target_for",
    "run_guarded_step",
]
