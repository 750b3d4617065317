"""Vision-side policy: action proposal, SIR refinement, sufficiency scoring.

The translator sees the image; it never answers the question. Each inner
step proposes one action (a visual tool call or loop termination), and tool
results are folded back into the SIR by a separate refinement call so the
two model behaviors stay independently testable.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, replace

from . import prompts
from .backend import (
    ActionParseFailure,
    Backend,
    ChatRequest,
    ChatResponse,
    ImagePart,
    Message,
    RetryPolicy,
    TextPart,
    complete_with_retry,
    request_action,
)
from .media import ImageData
from .sir import Sir, SirError, serialize_canonical
from .tools.builtin import (
    TERMINATE_OUTPUT_CAPTION,
    TRANSLATOR_TOOL_NAMES,
)
from .tools.registry import ToolCall, ToolRegistry

log = logging.getLogger(__name__)

# Numeric sufficiency scores for the categorical confidence levels. With the
# default threshold of 0.9 the inner loop exits early exactly on "high".
CONFIDENCE_SCORES = {"low": 0.3, "mid": 0.6, "high": 0.9}


@dataclass(frozen=True)
class TerminateSir:
    sir: Sir


TranslatorAction = "ToolCall | TerminateSir"


@dataclass
class TranslatorStepRecord:
    thought: str
    action: object
    tool_result: str | None
    sir_after: Sir

    def __post_init__(self) -> None:
        is_tool_call = isinstance(self.action, ToolCall)
        if is_tool_call != (self.tool_result is not None):
            raise ValueError("tool_result must be present exactly for tool-call steps")


def assess_sufficiency(sir: Sir) -> tuple[float, str]:
    """Deterministic mapping from the SIR's categorical confidence."""
    return CONFIDENCE_SCORES[sir.confidence], sir.confidence


@dataclass
class TranslatorAgent:
    backend: Backend
    model: str
    registry: ToolRegistry
    retry: RetryPolicy = field(default_factory=RetryPolicy)
    max_output_tokens: int = 1024
    temperature: float = 0.0

    def propose_action(
        self,
        image: ImageData,
        question: str,
        sir_current: Sir,
        feedback: str | None,
        history: list[TranslatorStepRecord],
        step_index: int,
        step_cap: int,
        outer_iteration: int = 1,
        on_retry=None,
    ) -> tuple[str, object]:
        """One policy step: returns (thought, action).

        Raises ActionParseFailure when the retry budget produces no usable
        reply; the engine treats that step as a no-op thought.
        """
        messages = self._build_messages(
            image, question, sir_current, feedback, history, step_index, step_cap, outer_iteration
        )
        if step_index >= step_cap:
            offered = self.registry.specs((TERMINATE_OUTPUT_CAPTION,))
        else:
            offered = self.registry.specs(TRANSLATOR_TOOL_NAMES)
        request = ChatRequest(
            model=self.model,
            agent_role="translator",
            messages=messages,
            tool_specs=offered,
            max_output_tokens=self.max_output_tokens,
            temperature=self.temperature,
            tag="translator_action",
        )
        return request_action(self.backend, request, self._parse_reply, self.retry, on_retry)

    def refine_sir(
        self,
        sir_prev: Sir,
        thought: str,
        tool_result: str,
        on_retry=None,
    ) -> Sir:
        """Fold (thought, tool result) into the SIR with one management call.

        Degrades rather than fails: an unparseable reply returns the previous
        SIR with confidence forced to low.
        """
        user_text = (
            prompts.load(prompts.SIR_MANAGEMENT)
            + "\n\nCurrent SIR:\n"
            + serialize_canonical(sir_prev)
            + "\n\nNew observation (thought):\n"
            + thought
            + "\n\nTool result:\n"
            + tool_result
            + "\n\nFold the new information into the SIR and reply with the "
            "updated SIR as a JSON object in the SIR OUTPUT FORMAT."
        )
        request = ChatRequest(
            model=self.model,
            agent_role="translator",
            messages=(
                Message.text("system", prompts.load(prompts.TRANSLATOR_SYSTEM)),
                Message.text("user", user_text),
            ),
            max_output_tokens=self.max_output_tokens,
            temperature=self.temperature,
            tag="sir_refinement",
        )
        response = complete_with_retry(self.backend, request, self.retry, on_retry)
        try:
            return sir_from_reply(response.text or "")
        except SirError as exc:
            log.warning("refinement reply unparseable (%s); keeping prior SIR at low", exc)
            return replace(sir_prev, confidence="low")

    def _build_messages(
        self, image, question, sir_current, feedback, history, step_index, step_cap, outer_iteration
    ) -> tuple:
        if feedback is not None:
            context = prompts.render(
                prompts.FEEDBACK_IMPROVEMENT,
                iteration=max(outer_iteration - 1, 1),
                current_sir=serialize_canonical(sir_current),
                question=question,
            )
        else:
            context = prompts.load(prompts.TRANSLATOR_FIRST_STEP)
        first_user = (
            context
            + "\n\nQuestion (for relevance only; describe, don't answer): "
            + question
        )
        messages = [
            Message.text("system", prompts.load(prompts.TRANSLATOR_SYSTEM)),
            Message(
                role="user",
                parts=(TextPart(first_user), ImagePart(image.data, image.media_type)),
            ),
        ]
        for record in history:
            messages.append(Message.text("assistant", _render_step(record)))
            if record.tool_result is not None:
                tool_name = record.action.tool_name
                messages.append(
                    Message.text("user", f"Tool result ({tool_name}):\n{record.tool_result}")
                )
        if step_index >= step_cap:
            messages.append(Message.text("user", prompts.load(prompts.TRANSLATOR_FINAL_STEP)))
        elif step_index > 1:
            messages.append(Message.text("user", prompts.load(prompts.TRANSLATOR_NEXT_STEP)))
        return tuple(messages)

    def _parse_reply(self, response: ChatResponse) -> tuple[str, object]:
        thought = (response.text or "").strip()
        if response.tool_calls:
            call = response.tool_calls[0]
            arguments = _parse_arguments(call.arguments_text)
            if call.name == TERMINATE_OUTPUT_CAPTION:
                return thought, TerminateSir(_sir_from_arguments(arguments))
            return thought, ToolCall(call.name, arguments)
        # No tool call: accept a terminate payload embedded in the text.
        try:
            return thought, TerminateSir(sir_from_reply(thought))
        except SirError:
            raise ActionParseFailure(
                "reply has neither a tool call nor a parseable terminate payload"
            ) from None


def sir_from_reply(text: str) -> Sir:
    from .sir import parse_and_validate

    return parse_and_validate(text)


def _parse_arguments(arguments_text: str) -> dict:
    if not arguments_text.strip():
        return {}
    try:
        arguments = json.loads(arguments_text)
    except json.JSONDecodeError as exc:
        raise ActionParseFailure(f"tool arguments are not valid JSON: {exc}") from None
    if not isinstance(arguments, dict):
        raise ActionParseFailure("tool arguments must be a JSON object")
    return arguments


def _sir_from_arguments(arguments: dict) -> Sir:
    caption = arguments.get("global_caption")
    confidence = arguments.get("confidence")
    if not isinstance(caption, str) or not isinstance(confidence, str):
        raise ActionParseFailure("terminate payload needs global_caption and confidence")
    try:
        return Sir(global_caption=caption, confidence=confidence)
    except SirError as exc:
        raise ActionParseFailure(f"terminate payload invalid: {exc}") from None


def _render_step(record: TranslatorStepRecord) -> str:
    if isinstance(record.action, ToolCall):
        call = f"[tool call] {record.action.tool_name}({json.dumps(record.action.arguments)})"
    else:
        call = "[terminate] output caption"
    return f"{record.thought}\n{call}" if record.thought else call
