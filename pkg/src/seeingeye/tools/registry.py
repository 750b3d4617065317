"""Declarative tool registry with schema-checked dispatch.

Tool failures are data, not control flow: unknown names, schema violations,
and handler exceptions all come back as ``ok=False`` results whose content
starts with ``ERROR:`` so the calling agent can observe and react.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

SCHEMA_TYPES = {
    "string": str,
    "integer": int,
    "number": (int, float),
    "boolean": bool,
    "object": dict,
    "array": list,
}


@dataclass(frozen=True)
class ToolSpec:
    name: str
    description: str
    parameters: dict

    def __post_init__(self) -> None:
        properties = self.parameters.get("properties", {})
        for required in self.parameters.get("required", []):
            if required not in properties:
                raise ValueError(
                    f"tool {self.name!r}: required property {required!r} not declared"
                )

    def wire_format(self) -> dict:
        return {
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": self.parameters,
            },
        }


@dataclass(frozen=True)
class ToolCall:
    """A concrete invocation: tool name plus argument map."""

    tool_name: str
    arguments: dict


@dataclass(frozen=True)
class ToolResult:
    ok: bool
    content: str
    artifacts: tuple = ()

    def __post_init__(self) -> None:
        if not self.ok and not self.content.startswith("ERROR:"):
            raise ValueError("failed results must carry an ERROR: content prefix")


def error_result(message: str) -> ToolResult:
    return ToolResult(ok=False, content=f"ERROR: {message}")


@dataclass
class ToolContext:
    """Per-episode resources handed to tool implementations."""

    image: Any | None = None
    backend: Any | None = None
    vision_model: str | None = None
    sandbox: Any | None = None
    max_output_tokens: int = 1024
    temperature: float = 0.0


def validate_arguments(spec: ToolSpec, arguments: dict) -> list[str]:
    """Return problem descriptions, each naming the offending property."""
    problems: list[str] = []
    properties = spec.parameters.get("properties", {})
    required = spec.parameters.get("required", [])
    missing = [name for name in required if name not in arguments]
    if missing:
        problems.append("missing: " + ", ".join(missing))
    for name, value in arguments.items():
        declared = properties.get(name)
        if declared is None:
            problems.append(f"unknown property: {name}")
            continue
        expected = declared.get("type")
        if expected in SCHEMA_TYPES and not _type_ok(value, expected):
            problems.append(f"property {name!r}: expected {expected}")
            continue
        allowed = declared.get("enum")
        if allowed is not None and value not in allowed:
            problems.append(f"property {name!r}: must be one of {allowed}")
    return problems


def _type_ok(value: Any, expected: str) -> bool:
    if expected in ("integer", "number") and isinstance(value, bool):
        return False
    return isinstance(value, SCHEMA_TYPES[expected])


Handler = Callable[[dict, ToolContext], ToolResult]


class ToolRegistry:
    def __init__(self) -> None:
        self._specs: dict[str, ToolSpec] = {}
        self._handlers: dict[str, Handler] = {}

    def register(self, spec: ToolSpec, handler: Handler) -> None:
        if spec.name in self._specs:
            raise ValueError(f"tool {spec.name!r} already registered")
        self._specs[spec.name] = spec
        self._handlers[spec.name] = handler

    @property
    def names(self) -> list[str]:
        return sorted(self._specs)

    def __contains__(self, name: str) -> bool:
        return name in self._specs

    def spec(self, name: str) -> ToolSpec:
        return self._specs[name]

    def specs(self, names) -> tuple[ToolSpec, ...]:
        return tuple(self._specs[name] for name in names)

    def execute(self, name: str, arguments: dict, context: ToolContext) -> ToolResult:
        spec = self._specs.get(name)
        if spec is None:
            return error_result(f"unknown tool: {name}")
        problems = validate_arguments(spec, arguments)
        if problems:
            return error_result(f"schema violation for {name}; " + "; ".join(problems))
        try:
            return self._handlers[name](arguments, context)
        except Exception as exc:  # handler bugs become observable tool output
            return error_result(f"{name} failed: {exc}")
