from .runner import (
    DEFAULT_TIMEOUT_S,
    ExecRequest,
    ExecResult,
    SpawnFailure,
    execute_code,
)

__all__ = [
    "DEFAULT_TIMEOUT_S",
    "ExecRequest",
    "ExecResult",
    "SpawnFailure",
    "execute_code",
]

__version__ = "0.1.0"
