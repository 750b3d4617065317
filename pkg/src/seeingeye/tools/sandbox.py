"""Client side of the code-execution runner protocol.

The runner is a separate process: it reads one JSON request line on stdin
({"code": ..., "timeout": ...}), runs the code in an isolated child
interpreter, and writes one JSON result line ({"status", "stdout", "stderr",
"wall_time"}) on stdout, exiting 0 whenever the protocol itself succeeded.
"""

from __future__ import annotations

import json
import subprocess
import sys
from typing import Protocol, Sequence

from .registry import ToolContext, ToolResult, error_result

DEFAULT_RUNNER_COMMAND = (sys.executable, "-m", "sandbox_runner")
DEFAULT_CODE_TIMEOUT_S = 10.0


class SandboxProtocolError(RuntimeError):
    pass


class SandboxClient(Protocol):
    def run(self, code: str, timeout: float) -> dict: ...


class ProcessSandboxClient:
    """Spawns one runner process per call and speaks the line protocol."""

    def __init__(self, command: Sequence[str] = DEFAULT_RUNNER_COMMAND, spawn_margin_s: float = 15.0):
        self.command = tuple(command)
        self.spawn_margin_s = spawn_margin_s

    def run(self, code: str, timeout: float) -> dict:
        request_line = json.dumps({"code": code, "timeout": timeout}) + "\n"
        try:
            completed = subprocess.run(
                self.command,
                input=request_line,
                capture_output=True,
                text=True,
                timeout=timeout + self.spawn_margin_s,
            )
        except FileNotFoundError as exc:
            raise SandboxProtocolError(f"runner not found: {self.command[0]}") from exc
        except subprocess.TimeoutExpired as exc:
            raise SandboxProtocolError("runner did not respond in time") from exc
        if completed.returncode != 0:
            raise SandboxProtocolError(
                f"runner exited {completed.returncode}: {completed.stderr.strip()[:500]}"
            )
        line = completed.stdout.strip().splitlines()
        if not line:
            raise SandboxProtocolError("runner produced no result line")
        try:
            result = json.loads(line[0])
        except json.JSONDecodeError as exc:
            raise SandboxProtocolError(f"unparseable result line: {line[0][:200]!r}") from exc
        for key in ("status", "stdout", "stderr", "wall_time"):
            if key not in result:
                raise SandboxProtocolError(f"result line missing {key!r}")
        return result


def python_execute(arguments: dict, context: ToolContext) -> ToolResult:
    if context.sandbox is None:
        return error_result("python_execute needs a sandbox in context")
    try:
        result = context.sandbox.run(arguments["code"], timeout=DEFAULT_CODE_TIMEOUT_S)
    except SandboxProtocolError as exc:
        return error_result(f"python_execute sandbox unavailable: {exc}")
    status = result["status"]
    if status == "ok":
        return ToolResult(ok=True, content=result["stdout"])
    if status == "timeout":
        return error_result(
            f"python_execute timed out after {result['wall_time']:.1f}s"
        )
    stderr = result.get("stderr", "")
    return error_result(f"python_execute failed:\n{stderr}")
