from .registry import ToolCall, ToolContext, ToolRegistry, ToolResult, ToolSpec, error_result

__all__ = [
    "ToolCall",
    "ToolContext",
    "ToolRegistry",
    "ToolResult",
    "ToolSpec",
    "error_result",
]
