"""Append-only episode event log with deterministic replay.

One episode writes one JSONL file (or an in-memory list with the same
surface); events carry a strictly increasing sequence number so a trace can
be re-read and the episode's outcome reconstructed without re-running it.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

from .sir import Sir, SirSnapshot

EVENT_KINDS = (
    "translator_thought",
    "tool_call",
    "tool_result",
    "sir_snapshot",
    "reasoner_thought",
    "terminal_action",
    "backend_call",
    "force_answer",
    "error",
)


class OutOfOrder(ValueError):
    pass


class StorageFailure(RuntimeError):
    pass


class IncompleteTrace(ValueError):
    pass


@dataclass(frozen=True)
class TraceEvent:
    episode_id: str
    seq: int
    ts: float
    kind: str
    payload: dict

    def __post_init__(self) -> None:
        if self.kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.kind!r}")


def event_line(event: TraceEvent) -> str:
    record = {
        "episode_id": event.episode_id,
        "seq": event.seq,
        "ts": event.ts,
        "kind": event.kind,
        "payload": event.payload,
    }
    return json.dumps(record, ensure_ascii=False, separators=(",", ":"))


def parse_event_line(line: str) -> TraceEvent:
    record = json.loads(line)
    return TraceEvent(
        episode_id=record["episode_id"],
        seq=record["seq"],
        ts=record["ts"],
        kind=record["kind"],
        payload=record["payload"],
    )


class EpisodeTraceWriter:
    """Single-writer, append-only sink for one episode's events."""

    def __init__(self, episode_id: str, sink: Callable[[TraceEvent], None], clock=None):
        self.episode_id = episode_id
        self._sink = sink
        self._clock = clock if clock is not None else time.time
        self._last_seq = 0

    def append_event(self, event: TraceEvent) -> int:
        if event.episode_id != self.episode_id:
            raise OutOfOrder(f"event for {event.episode_id!r} on writer {self.episode_id!r}")
        if event.seq != self._last_seq + 1:
            raise OutOfOrder(f"expected seq {self._last_seq + 1}, got {event.seq}")
        self._sink(event)
        self._last_seq = event.seq
        return event.seq

    def emit(self, kind: str, payload: dict) -> TraceEvent:
        event = TraceEvent(
            episode_id=self.episode_id,
            seq=self._last_seq + 1,
            ts=self._clock(),
            kind=kind,
            payload=payload,
        )
        self.append_event(event)
        return event


class TraceStore:
    """File-backed store: runs/<run_id>/<episode_id>.trace.jsonl."""

    def __init__(self, root: str | Path, run_id: str, clock=None):
        self.run_dir = Path(root) / run_id
        self.run_id = run_id
        self._clock = clock
        self.run_dir.mkdir(parents=True, exist_ok=True)

    def episode_path(self, episode_id: str) -> Path:
        return self.run_dir / f"{episode_id}.trace.jsonl"

    def writer(self, episode_id: str) -> EpisodeTraceWriter:
        path = self.episode_path(episode_id)
        handle = path.open("a", encoding="utf-8")

        def sink(event: TraceEvent) -> None:
            try:
                handle.write(event_line(event) + "\n")
                handle.flush()
            except OSError as exc:
                raise StorageFailure(str(exc)) from exc

        return EpisodeTraceWriter(episode_id, sink, clock=self._clock)

    def events(self, episode_id: str) -> list[TraceEvent]:
        path = self.episode_path(episode_id)
        if not path.exists():
            raise StorageFailure(f"no trace for episode {episode_id!r}")
        return [parse_event_line(line) for line in path.read_text(encoding="utf-8").splitlines()]

    def episode_ids(self) -> list[str]:
        return sorted(p.name[: -len(".trace.jsonl")] for p in self.run_dir.glob("*.trace.jsonl"))


class MemoryTraceStore:
    """In-memory store with the same surface, for tests and throwaway runs."""

    def __init__(self, clock=None):
        self._episodes: dict[str, list[TraceEvent]] = {}
        self._clock = clock

    def writer(self, episode_id: str) -> EpisodeTraceWriter:
        bucket = self._episodes.setdefault(episode_id, [])
        return EpisodeTraceWriter(episode_id, bucket.append, clock=self._clock)

    def events(self, episode_id: str) -> list[TraceEvent]:
        if episode_id not in self._episodes:
            raise StorageFailure(f"no trace for episode {episode_id!r}")
        return list(self._episodes[episode_id])

    def episode_ids(self) -> list[str]:
        return sorted(self._episodes)


@dataclass
class Replay:
    """Episode view reconstructed purely from trace events."""

    episode_id: str
    outer_iterations_used: int
    forced: bool
    answer: dict
    snapshots: list[SirSnapshot] = field(default_factory=list)


def replay(store, episode_id: str) -> Replay:
    """Rebuild the outcome and SIR evolution of a completed episode.

    Raises IncompleteTrace when the trace has no final answer.
    """
    events = store.events(episode_id)
    answer: dict | None = None
    forced = False
    iterations_used = 0
    snapshots: list[SirSnapshot] = []
    for event in events:
        payload = event.payload
        if event.kind == "sir_snapshot":
            snapshots.append(
                SirSnapshot(
                    sir=Sir(
                        global_caption=payload["sir"]["global_caption"],
                        confidence=payload["sir"]["confidence"],
                        feedback=payload["sir"].get("feedback"),
                    ),
                    outer_iteration=payload["outer_iteration"],
                    inner_step=payload["inner_step"],
                    origin=payload["origin"],
                )
            )
        elif event.kind == "terminal_action" and payload.get("action") == "terminate_answer":
            answer = payload["answer"]
            iterations_used = int(payload["outer_iteration"])
        elif event.kind == "force_answer":
            answer = payload["answer"]
            iterations_used = int(payload["outer_iteration"])
            forced = True
    if answer is None:
        raise IncompleteTrace(f"episode {episode_id!r} has no final answer event")
    labels = [s.step_label for s in snapshots]
    if labels != sorted(set(labels)):
        raise IncompleteTrace("snapshot labels are not strictly increasing")
    return Replay(
        episode_id=episode_id,
        outer_iterations_used=iterations_used,
        forced=forced,
        answer=answer,
        snapshots=snapshots,
    )
