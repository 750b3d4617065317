"""Text-side policy: SIR-grounded reasoning, terminal decisions, answer
normalization. This agent never sees the image; the request type enforces it.

Note the answer confidence enum is {high, medium, low} while the SIR uses
{low, mid, high}; the two schemas are mirrored deliberately and share one
numeric scale.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field

from . import prompts
from .backend import (
    ActionParseFailure,
    Backend,
    BackendError,
    ChatRequest,
    ChatResponse,
    Message,
    RetryPolicy,
)
from .sir import Sir, serialize_canonical
from .tools.builtin import (
    REASONER_TOOL_NAMES,
    TERMINATE_ANSWER,
    TERMINATE_ASK_TRANSLATOR,
)
from .tools.registry import ToolCall, ToolRegistry

ANSWER_CONFIDENCE_LEVELS = ("high", "medium", "low")
ANSWER_CONFIDENCE_SCORES = {"low": 0.3, "medium": 0.6, "high": 0.9}

FALLBACK_OPEN_ENDED = "UNKNOWN"
FALLBACK_TRIM = 200


@dataclass(frozen=True)
class TerminateAnswer:
    answer: str
    confidence: str
    reasoning: str


@dataclass(frozen=True)
class TerminateFeedback:
    feedback: str


ReasonerAction = "ToolCall | TerminateAnswer | TerminateFeedback"


@dataclass
class ReasonerMemory:
    """One-line digests of prior outer iterations, capped at 500 chars each."""

    summaries: list[tuple[int, str]] = field(default_factory=list)

    def add(self, outer_iteration: int, digest: str) -> None:
        if any(existing == outer_iteration for existing, _ in self.summaries):
            raise ValueError(f"iteration {outer_iteration} already summarized")
        self.summaries.append((outer_iteration, digest[:500]))

    def render(self) -> str:
        return "\n".join(digest for _, digest in self.summaries)


@dataclass(frozen=True)
class FinalAnswer:
    raw: str
    normalized: str
    confidence: str
    reasoning: str
    fallback: bool


class TerminalDecision(enum.Enum):
    MUST_ANSWER = "must_answer"
    MAY_CONTINUE = "may_continue"


def decide_terminal(
    confidence_score: float, step_index: int, outer_iteration: int, config
) -> TerminalDecision:
    """Answer is compelled at high confidence or in the final outer iteration."""
    if confidence_score >= config.tau_r or outer_iteration == config.max_iters:
        return TerminalDecision.MUST_ANSWER
    return TerminalDecision.MAY_CONTINUE


_ANSWER_LABEL = re.compile(r"answer\s*:\s*[\(\[]?([A-Za-z])(?![A-Za-z0-9])", re.IGNORECASE)
_LEADING_LABEL = re.compile(r"^\s*(?:\(([A-Za-z])\)|([A-Za-z])\.)")


def normalize_answer(raw: str, options) -> tuple[str, bool]:
    """Map raw answer text onto an option label; first matching rule wins.

    Rules: exact single-letter label, an "Answer: <L>" pattern, a leading
    "<L>." or "(<L>)", then unique containment of one option's text. Anything
    else falls back to the trimmed raw text with the fallback flag set.
    Open-ended tasks (no options) pass through untouched.
    """
    if not options:
        return raw, False
    labels = {label.upper(): label for label, _ in options}

    stripped = raw.strip()
    if len(stripped) == 1 and stripped.upper() in labels:
        return labels[stripped.upper()], False

    match = _ANSWER_LABEL.search(raw)
    if match and match.group(1).upper() in labels:
        return labels[match.group(1).upper()], False

    match = _LEADING_LABEL.match(raw)
    if match:
        letter = (match.group(1) or match.group(2)).upper()
        if letter in labels:
            return labels[letter], False

    lowered = raw.lower()
    containing = [label for label, text in options if text and text.lower() in lowered]
    if len(containing) == 1:
        return containing[0], False

    return stripped[:FALLBACK_TRIM], True


def final_answer_from_terminal(terminal: TerminateAnswer, options) -> FinalAnswer:
    normalized, fallback = normalize_answer(terminal.answer, options)
    return FinalAnswer(
        raw=terminal.answer,
        normalized=normalized,
        confidence=terminal.confidence,
        reasoning=terminal.reasoning,
        fallback=fallback,
    )


@dataclass
class ReasonerAgent:
    backend: Backend
    model: str
    registry: ToolRegistry
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    max_output_tokens: int = 1024
    temperature: float = 0.0

    def propose_action(
        self,
        sir: Sir,
        task,
        memory: ReasonerMemory,
        history: list,
        step_index: int,
        on_retry=None,
    ) -> tuple[str, object]:
        from .backend import request_action

        messages = self._build_messages(sir, task, memory, history)
        request = ChatRequest(
            model=self.model,
            agent_role="reasoner",
            messages=messages,
            tool_specs=self.registry.specs(REASONER_TOOL_NAMES),
            max_output_tokens=self.max_output_tokens,
            temperature=self.temperature,
            tag="reasoner_action",
        )
        return request_action(self.backend, request, self._parse_reply, self.retry, on_retry)

    def force_answer(self, sir: Sir, task, on_retry=None) -> tuple[FinalAnswer, int]:
        """One compelled call (the answer tool is the only one offered), with
        a deterministic fallback after the retry budget. Total by construction."""
        context = self._context_block(sir, task, ReasonerMemory())
        request = ChatRequest(
            model=self.model,
            agent_role="reasoner",
            messages=(
                Message.text("system", prompts.load(prompts.REASONER_SYSTEM)),
                Message.text("user", context + "\n\n" + prompts.load(prompts.FORCE_ANSWER)),
            ),
            tool_specs=self.registry.specs((TERMINATE_ANSWER,)),
            max_output_tokens=self.max_output_tokens,
            temperature=self.temperature,
            tag="force_answer",
        )
        attempts = 0
        delay = self.retry.base_delay_s
        for attempt in range(1, self.retry.attempts + 1):
            attempts = attempt
            try:
                response = self.backend.complete(request)
            except BackendError as exc:
                if on_retry:
                    on_retry(attempt, exc)
                if attempt < self.retry.attempts:
                    self.retry.sleep(delay)
                    delay *= 2
                continue
            try:
                _, action = self._parse_reply(response)
            except ActionParseFailure as exc:
                if on_retry:
                    on_retry(attempt, exc)
                continue
            if isinstance(action, TerminateAnswer):
                return final_answer_from_terminal(action, task.options), attempts
        if task.options:
            normalized = task.options[0][0]
        else:
            normalized = FALLBACK_OPEN_ENDED
        return (
            FinalAnswer(
                raw="",
                normalized=normalized,
                confidence="low",
                reasoning="deterministic fallback: model produced no compliant final answer",
                fallback=True,
            ),
            attempts,
        )

    def _context_block(self, sir: Sir, task, memory: ReasonerMemory) -> str:
        lines = [
            "Image description (SIR) from the translator:",
            serialize_canonical(sir),
            "",
            f"Question: {task.question}",
        ]
        if task.options:
            lines.append("Options:")
            lines.extend(f"{label}. {text}" for label, text in task.options)
        else:
            lines.append("This is an open-ended question.")
        if memory.summaries:
            lines.extend(["", "Your notes from prior iterations:", memory.render()])
        return "\n".join(lines)

    def _build_messages(self, sir, task, memory, history) -> tuple:
        messages = [
            Message.text("system", prompts.load(prompts.REASONER_SYSTEM)),
            Message.text("user", self._context_block(sir, task, memory)),
        ]
        for record in history:
            messages.append(Message.text("assistant", _render_step(record)))
            if record.tool_result is not None:
                messages.append(
                    Message.text(
                        "user",
                        f"Tool result ({record.action.tool_name}):\n{record.tool_result}",
                    )
                )
        messages.append(Message.text("user", prompts.load(prompts.REASONER_NEXT_STEP)))
        return tuple(messages)

    def _parse_reply(self, response: ChatResponse) -> tuple[str, object]:
        thought = (response.text or "").strip()
        if not response.tool_calls:
            raise ActionParseFailure("reasoner reply carries no tool call")
        call = response.tool_calls[0]
        try:
            arguments = json.loads(call.arguments_text) if call.arguments_text.strip() else {}
        except json.JSONDecodeError as exc:
            raise ActionParseFailure(f"tool arguments are not valid JSON: {exc}") from None
        if not isinstance(arguments, dict):
            raise ActionParseFailure("tool arguments must be a JSON object")
        if call.name == TERMINATE_ANSWER:
            return thought, _parse_terminate_answer(arguments)
        if call.name == TERMINATE_ASK_TRANSLATOR:
            feedback = arguments.get("feedback")
            if not (isinstance(feedback, str) and feedback):
                raise ActionParseFailure("terminate_and_ask_translator needs non-empty feedback")
            return thought, TerminateFeedback(feedback)
        return thought, ToolCall(call.name, arguments)


@dataclass
class ReasonerStepRecord:
    thought: str
    action: object
    tool_result: str | None


def _parse_terminate_answer(arguments: dict) -> TerminateAnswer:
    # All three fields are required; a partial terminal is never accepted.
    missing = [key for key in ("answer", "confidence", "reasoning") if key not in arguments]
    if missing:
        raise ActionParseFailure(f"terminate_and_answer missing: {', '.join(missing)}")
    answer, confidence, reasoning = (
        arguments["answer"],
        arguments["confidence"],
        arguments["reasoning"],
    )
    if not all(isinstance(v, str) for v in (answer, confidence, reasoning)):
        raise ActionParseFailure("terminate_and_answer fields must be strings")
    if confidence not in ANSWER_CONFIDENCE_LEVELS:
        raise ActionParseFailure(
            f"terminate_and_answer confidence must be one of {ANSWER_CONFIDENCE_LEVELS}"
        )
    return TerminateAnswer(answer=answer, confidence=confidence, reasoning=reasoning)


def _render_step(record: ReasonerStepRecord) -> str:
    if isinstance(record.action, ToolCall):
        call = f"[tool call] {record.action.tool_name}({json.dumps(record.action.arguments)})"
    else:
        call = "[terminal action]"
    return f"{record.thought}\n{call}" if record.thought else call
