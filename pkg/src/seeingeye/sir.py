"""Structured intermediate representation (SIR).

The SIR is the single object the two agents exchange: a factual caption of
the image, the translator's confidence in it, and (optionally) the latest
feedback query from the reasoner. Parsing is lenient (model output is noisy),
serialization is strict and byte-deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

CONFIDENCE_LEVELS = ("low", "mid", "high")

ORIGIN_INITIAL = "initial"
ORIGIN_REFINED = "refined"
ORIGIN_FEEDBACK_MERGED = "feedback_merged"
SNAPSHOT_ORIGINS = (ORIGIN_INITIAL, ORIGIN_REFINED, ORIGIN_FEEDBACK_MERGED)


class SirError(ValueError):
    """Base class for SIR document rejections."""


class MissingField(SirError):
    pass


class BadEnum(SirError):
    pass


class Unparseable(SirError):
    pass


class EmptyFeedback(SirError):
    pass


@dataclass(frozen=True)
class Sir:
    global_caption: str
    confidence: str
    feedback: str | None = None

    def __post_init__(self) -> None:
        if self.confidence not in CONFIDENCE_LEVELS:
            raise BadEnum(
                f"confidence must be one of {CONFIDENCE_LEVELS}, got {self.confidence!r}"
            )
        if self.feedback is not None and not self.feedback:
            raise EmptyFeedback("feedback, when present, must be non-empty")


@dataclass(frozen=True)
class SirSnapshot:
    """One point of the SIR's evolution, addressable for trace replay."""

    sir: Sir
    outer_iteration: int
    inner_step: int
    origin: str

    def __post_init__(self) -> None:
        if self.outer_iteration < 1:
            raise ValueError("outer_iteration must be >= 1")
        if self.inner_step < 0:
            raise ValueError("inner_step must be >= 0")
        if self.origin not in SNAPSHOT_ORIGINS:
            raise ValueError(f"origin must be one of {SNAPSHOT_ORIGINS}")

    @property
    def step_label(self) -> tuple[int, int]:
        return (self.outer_iteration, self.inner_step)


def initial_sir() -> Sir:
    """The null state before the translator's first step."""
    return Sir(global_caption="", confidence="low", feedback=None)


def parse_and_validate(raw_text: str) -> Sir:
    """Extract and validate a SIR document from free-form model output.

    Surrounding prose is tolerated: every balanced ``{...}`` span is tried in
    order of appearance and the first one that validates wins. Unknown keys
    are dropped (lenient read).

    Raises MissingField, BadEnum, or Unparseable.
    """
    first_error: SirError | None = None
    found_object = False
    for span in _balanced_spans(raw_text):
        try:
            obj = json.loads(span)
        except json.JSONDecodeError:
            continue
        if not isinstance(obj, dict):
            continue
        found_object = True
        try:
            return _from_document(obj)
        except SirError as exc:
            if first_error is None:
                first_error = exc
    if found_object and first_error is not None:
        raise first_error
    raise Unparseable("no balanced JSON object found in text")


def serialize_canonical(sir: Sir) -> str:
    """Deterministic document form: fixed key order, feedback omitted when absent."""
    doc: dict[str, str] = {
        "global_caption": sir.global_caption,
        "confidence": sir.confidence,
    }
    if sir.feedback is not None:
        doc["feedback"] = sir.feedback
    return json.dumps(doc, ensure_ascii=False, separators=(",", ":"))


def sir_document(sir: Sir) -> dict[str, str]:
    """The canonical key-ordered dict form, for embedding in trace payloads."""
    doc = {"global_caption": sir.global_caption, "confidence": sir.confidence}
    if sir.feedback is not None:
        doc["feedback"] = sir.feedback
    return doc


def merge_feedback(sir: Sir, feedback: str) -> Sir:
    """Attach the reasoner's feedback query, replacing any prior feedback."""
    if not feedback:
        raise EmptyFeedback("cannot merge empty feedback")
    return replace(sir, feedback=feedback)


def _from_document(obj: dict) -> Sir:
    caption = obj.get("global_caption")
    if not isinstance(caption, str):
        raise MissingField("global_caption")
    if "confidence" not in obj:
        raise MissingField("confidence")
    confidence = obj["confidence"]
    if not isinstance(confidence, str) or confidence not in CONFIDENCE_LEVELS:
        raise BadEnum(f"confidence outside {CONFIDENCE_LEVELS}: {confidence!r}")
    feedback = obj.get("feedback")
    if not (isinstance(feedback, str) and feedback):
        feedback = None
    return Sir(global_caption=caption, confidence=confidence, feedback=feedback)


def _balanced_spans(text: str):
    """Yield candidate object spans, outermost-first, string-aware."""
    for start, char in enumerate(text):
        if char != "{":
            continue
        end = _match_brace(text, start)
        if end is not None:
            yield text[start : end + 1]


def _match_brace(text: str, start: int) -> int | None:
    depth = 0
    in_string = False
    escaped = False
    for i in range(start, len(text)):
        c = text[i]
        if in_string:
            if escaped:
                escaped = False
            elif c == "\\":
                escaped = True
            elif c == '"':
                in_string = False
            continue
        if c == '"':
            in_string = True
        elif c == "{":
            depth += 1
        elif c == "}":
            depth -= 1
            if depth == 0:
                return i
    return None
