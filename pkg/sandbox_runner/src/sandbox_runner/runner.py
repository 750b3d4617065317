"""Isolated execution of submitted Python code.

Each call runs in a fresh child interpreter rooted at a throwaway working
directory with a scrubbed environment; the process group is killed hard at
the timeout and the directory is removed afterwards, so consecutive runs
share no state.
"""

from __future__ import annotations

import os
import shutil
import signal
import subprocess
import sys
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

CODE_LIMIT_BYTES = 64 * 1024
STDOUT_LIMIT_BYTES = 32 * 1024
STDERR_LIMIT_BYTES = 8 * 1024
DEFAULT_TIMEOUT_S = 10.0
MAX_TIMEOUT_S = 60.0
TRUNCATION_MARKER = "\n...[truncated]"

STATUS_OK = "ok"
STATUS_ERROR = "error"
STATUS_TIMEOUT = "timeout"


class SpawnFailure(RuntimeError):
    """The host cannot start a child interpreter at all."""


@dataclass(frozen=True)
class ExecRequest:
    code: str
    timeout: float = DEFAULT_TIMEOUT_S

    def __post_init__(self) -> None:
        if len(self.code.encode("utf-8")) > CODE_LIMIT_BYTES:
            raise ValueError(f"code exceeds {CODE_LIMIT_BYTES} bytes")
        if not (0 < self.timeout <= MAX_TIMEOUT_S):
            raise ValueError(f"timeout must be in (0, {MAX_TIMEOUT_S:g}] seconds")


@dataclass(frozen=True)
class ExecResult:
    status: str
    stdout: str
    stderr: str
    wall_time: float


def execute_code(request: ExecRequest) -> ExecResult:
    workdir = tempfile.mkdtemp(prefix="sandbox-run-")
    try:
        script = Path(workdir) / "main.py"
        script.write_text(request.code, encoding="utf-8")
        # no inherited secrets: only what the interpreter needs to start
        env = {
            "PATH": os.environ.get("PATH", ""),
            "HOME": workdir,
            "LC_ALL": "C.UTF-8",
            "PYTHONIOENCODING": "utf-8",
        }
        started = time.monotonic()
        try:
            child = subprocess.Popen(
                [sys.executable, "-I", str(script)],
                cwd=workdir,
                env=env,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                stdin=subprocess.DEVNULL,
                start_new_session=True,
            )
        except OSError as exc:
            raise SpawnFailure(f"cannot spawn interpreter: {exc}") from exc
        try:
            out, err = child.communicate(timeout=request.timeout)
            status = STATUS_OK if child.returncode == 0 else STATUS_ERROR
        except subprocess.TimeoutExpired:
            _kill_process_group(child)
            out, err = child.communicate()
            status = STATUS_TIMEOUT
        wall_time = time.monotonic() - started
        if status == STATUS_TIMEOUT:
            wall_time = max(wall_time, request.timeout)
        return ExecResult(
            status=status,
            stdout=_decode_and_truncate(out, STDOUT_LIMIT_BYTES),
            stderr=_decode_and_truncate(err, STDERR_LIMIT_BYTES),
            wall_time=wall_time,
        )
    finally:
        shutil.rmtree(workdir, ignore_errors=True)


def _kill_process_group(child: subprocess.Popen) -> None:
    try:
        os.killpg(os.getpgid(child.pid), signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        child.kill()


def _decode_and_truncate(data: bytes, limit: int) -> str:
    text = data.decode("utf-8", errors="replace")
    encoded = text.encode("utf-8")
    if len(encoded) <= limit:
        return text
    # cut on a character boundary so truncation never corrupts UTF-8
    return encoded[:limit].decode("utf-8", errors="ignore") + TRUNCATION_MARKER
