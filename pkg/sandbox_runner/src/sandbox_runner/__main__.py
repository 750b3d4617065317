"""One-shot line protocol: read a JSON request line on stdin, execute, write a
JSON result line on stdout. Exit 0 whenever the protocol works, whatever the
user code did; nonzero only for protocol or host failures."""

from __future__ import annotations

import json
import sys

from .runner import DEFAULT_TIMEOUT_S, ExecRequest, SpawnFailure, execute_code


def main() -> int:
    line = sys.stdin.readline()
    if not line.strip():
        print("sandbox-runner: empty request line", file=sys.stderr)
        return 2
    try:
        payload = json.loads(line)
    except json.JSONDecodeError as exc:
        print(f"sandbox-runner: request line is not JSON: {exc}", file=sys.stderr)
        return 2
    if not isinstance(payload, dict) or not isinstance(payload.get("code"), str):
        print("sandbox-runner: request needs a string 'code' field", file=sys.stderr)
        return 2
    timeout = payload.get("timeout", DEFAULT_TIMEOUT_S)
    if not isinstance(timeout, (int, float)) or isinstance(timeout, bool):
        print("sandbox-runner: 'timeout' must be a number", file=sys.stderr)
        return 2
    try:
        request = ExecRequest(code=payload["code"], timeout=float(timeout))
    except ValueError as exc:
        print(f"sandbox-runner: invalid request: {exc}", file=sys.stderr)
        return 2
    try:
        result = execute_code(request)
    except SpawnFailure as exc:
        print(f"sandbox-runner: {exc}", file=sys.stderr)
        return 3
    sys.stdout.write(
        json.dumps(
            {
                "status": result.status,
                "stdout": result.stdout,
                "stderr": result.stderr,
                "wall_time": result.wall_time,
            },
            ensure_ascii=False,
        )
        + "\n"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())
