"""Episode orchestration: the outer feedback loop and both inner loops.

One episode takes a question through at most ``max_iters`` rounds of
translator refinement and reasoner deliberation. Every step is appended to
the trace before the next one starts, every backend call lands in the cost
ledger, and an episode can only end with a final answer (the forced path is
total by construction). Only backend transport exhaustion aborts.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace as dc_replace

from .backend import (
    ActionParseFailure,
    BackendExhausted,
    RecordingBackend,
    RetryPolicy,
    request_wire_body,
    response_wire_body,
)
from .costs import CostLedger
from .media import ImageData
from .reasoner import (
    FinalAnswer,
    ReasonerAgent,
    ReasonerMemory,
    ReasonerStepRecord,
    TerminateAnswer,
    TerminateFeedback,
    final_answer_from_terminal,
)
from .sir import (
    ORIGIN_FEEDBACK_MERGED,
    ORIGIN_INITIAL,
    ORIGIN_REFINED,
    Sir,
    initial_sir,
    merge_feedback,
    sir_document,
)
from .tools.registry import ToolContext, ToolRegistry
from .trace import MemoryTraceStore, TraceEvent
from .translator import (
    TerminateSir,
    TranslatorAgent,
    TranslatorStepRecord,
    assess_sufficiency,
)


@dataclass(frozen=True)
class Task:
    task_id: str
    question: str
    options: tuple = ()
    image: ImageData | None = None

    def __post_init__(self) -> None:
        if not self.question:
            raise ValueError("question must be non-empty")
        labels = [label for label, _ in self.options]
        if len(labels) != len(set(labels)):
            raise ValueError("option labels must be unique")

    @property
    def option_labels(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.options)


@dataclass(frozen=True)
class RunConfig:
    translator_model: str
    reasoner_model: str
    max_iters: int = 3
    max_steps_translator: int = 3
    max_steps_reasoner: int = 3
    tau_t: float = 0.9
    tau_r: float = 0.9
    response_token_limit: int = 1024
    temperature: float = 0.0
    translator_base_url: str | None = None
    reasoner_base_url: str | None = None
    retry: RetryPolicy = field(default_factory=RetryPolicy)

    def __post_init__(self) -> None:
        if self.max_iters < 1 or self.max_steps_translator < 1 or self.max_steps_reasoner < 1:
            raise ValueError("iteration and step caps must be >= 1")
        if not (0 < self.tau_t <= 1 and 0 < self.tau_r <= 1):
            raise ValueError("thresholds must be in (0, 1]")
        if self.response_token_limit < 1:
            raise ValueError("response_token_limit must be >= 1")


@dataclass(frozen=True)
class EpisodeOutcome:
    answer: FinalAnswer
    outer_iterations_used: int
    forced: bool
    trace_ref: str
    cost_ref: str


@dataclass(frozen=True)
class LoopAnswer:
    final: FinalAnswer
    tools_used: tuple = ()


@dataclass(frozen=True)
class LoopFeedback:
    feedback: str
    tools_used: tuple = ()
    synthesized: bool = False


class EpisodeRecorder:
    """Per-episode sink: trace events plus ledger entries, kept in lockstep."""

    def __init__(self, writer, ledger: CostLedger):
        self.writer = writer
        self.ledger = ledger
        self.outer_iteration = 1
        self._correlation = 0

    def backend_hook(self, request, response) -> None:
        self.ledger.record(
            model=request.model,
            outer_iteration=self.outer_iteration,
            input_tokens=response.usage.input_tokens,
            output_tokens=response.usage.output_tokens,
            approximate=response.approximate_usage,
        )
        self.event(
            "backend_call",
            {
                "agent": request.agent_role,
                "model": request.model,
                "purpose": request.tag,
                "outer_iteration": self.outer_iteration,
                "input_tokens": response.usage.input_tokens,
                "output_tokens": response.usage.output_tokens,
                "approximate": response.approximate_usage,
                "request": request_wire_body(request),
                "response": response_wire_body(response),
            },
        )

    def event(self, kind: str, payload: dict) -> TraceEvent:
        return self.writer.emit(kind, payload)

    def snapshot(self, sir: Sir, outer_iteration: int, inner_step: int, origin: str) -> None:
        self.event(
            "sir_snapshot",
            {
                "outer_iteration": outer_iteration,
                "inner_step": inner_step,
                "origin": origin,
                "sir": sir_document(sir),
            },
        )

    def next_correlation(self) -> str:
        self._correlation += 1
        return f"c{self._correlation}"

    def retry_hook(self, agent: str, purpose: str):
        def on_retry(attempt: int, exc: Exception) -> None:
            self.event(
                "error",
                {
                    "agent": agent,
                    "outer_iteration": self.outer_iteration,
                    "where": purpose,
                    "attempt": attempt,
                    "reason": str(exc),
                },
            )

        return on_retry


def answer_payload(final: FinalAnswer) -> dict:
    return {
        "raw": final.raw,
        "normalized": final.normalized,
        "confidence": final.confidence,
        "reasoning": final.reasoning,
        "fallback": final.fallback,
    }


def run_episode(
    task: Task,
    config: RunConfig,
    translator: TranslatorAgent,
    reasoner: ReasonerAgent,
    toolbox: ToolRegistry,
    *,
    trace_store=None,
    ledger: CostLedger | None = None,
    sandbox=None,
    episode_id: str | None = None,
) -> EpisodeOutcome:
    """Run one question end to end and return its outcome.

    Raises BackendExhausted if a policy call cannot be completed; the trace
    marks the failure point and no fabricated answer is returned.
    """
    episode_id = episode_id or task.task_id
    store = trace_store if trace_store is not None else MemoryTraceStore(clock=lambda: 0.0)
    writer = store.writer(episode_id)
    ledger = ledger if ledger is not None else CostLedger()
    recorder = EpisodeRecorder(writer, ledger)

    translator = dc_replace(
        translator, backend=RecordingBackend(translator.backend, recorder.backend_hook)
    )
    reasoner = dc_replace(
        reasoner, backend=RecordingBackend(reasoner.backend, recorder.backend_hook)
    )
    # Role separation: the translator's tools may see the image and the vision
    # backend; the reasoner's tools get the sandbox only, so a stray vision
    # tool call from the reasoner fails as data instead of touching pixels.
    translator_context = ToolContext(
        image=task.image,
        backend=translator.backend,
        vision_model=translator.model,
        max_output_tokens=config.response_token_limit,
        temperature=config.temperature,
    )
    reasoner_context = ToolContext(sandbox=sandbox)

    sir = initial_sir()
    recorder.snapshot(sir, 1, 0, ORIGIN_INITIAL)
    memory = ReasonerMemory()
    answer: FinalAnswer | None = None
    forced = False
    iterations_used = 0

    try:
        for iteration in range(1, config.max_iters + 1):
            recorder.outer_iteration = iteration
            iterations_used = iteration
            sir = translator_inner_loop(
                task, sir, config, translator, toolbox,
                context=translator_context, recorder=recorder, outer_iteration=iteration,
            )
            result = reasoner_inner_loop(
                task, sir, memory, config, reasoner, toolbox,
                context=reasoner_context, recorder=recorder, outer_iteration=iteration,
            )
            if isinstance(result, LoopAnswer):
                answer = result.final
                break
            sir = merge_feedback(sir, result.feedback)
            recorder.snapshot(sir, iteration + 1, 0, ORIGIN_FEEDBACK_MERGED)
            tools = ", ".join(result.tools_used) or "none"
            memory.add(iteration, f"iter {iteration}: asked for {result.feedback} / used tools {tools}")
        if answer is None:
            answer = force_answer(
                sir, task, reasoner, config, recorder=recorder
            )
            forced = True
    except BackendExhausted as exc:
        recorder.event(
            "error",
            {
                "agent": "engine",
                "outer_iteration": recorder.outer_iteration,
                "where": "episode_abort",
                "reason": str(exc),
            },
        )
        raise

    return EpisodeOutcome(
        answer=answer,
        outer_iterations_used=iterations_used,
        forced=forced,
        trace_ref=episode_id,
        cost_ref=episode_id,
    )


def translator_inner_loop(
    task: Task,
    sir_prev: Sir,
    config: RunConfig,
    translator: TranslatorAgent,
    toolbox: ToolRegistry,
    *,
    context: ToolContext | None = None,
    recorder: EpisodeRecorder | None = None,
    outer_iteration: int = 1,
) -> Sir:
    """Refine the SIR for up to max_steps_translator policy steps.

    Exits early on a terminate action or once sufficiency reaches tau_t;
    always returns a valid SIR. Tool errors become observable tool results.
    """
    recorder = recorder or _null_recorder(task.task_id)
    context = context or ToolContext(
        image=task.image,
        backend=translator.backend,
        vision_model=translator.model,
        max_output_tokens=config.response_token_limit,
        temperature=config.temperature,
    )
    sir_current = sir_prev
    feedback = sir_prev.feedback
    history: list[TranslatorStepRecord] = []
    cap = config.max_steps_translator
    for step in range(1, cap + 1):
        try:
            thought, action = translator.propose_action(
                task.image,
                task.question,
                sir_current,
                feedback,
                history,
                step,
                cap,
                outer_iteration=outer_iteration,
                on_retry=recorder.retry_hook("translator", "translator_action"),
            )
        except ActionParseFailure:
            recorder.event(
                "translator_thought",
                {
                    "outer_iteration": outer_iteration,
                    "step": step,
                    "thought": "",
                    "parse_failure": True,
                },
            )
            continue
        recorder.event(
            "translator_thought",
            {"outer_iteration": outer_iteration, "step": step, "thought": thought},
        )
        if isinstance(action, TerminateSir):
            sir_current = action.sir
            recorder.event(
                "terminal_action",
                {
                    "agent": "translator",
                    "action": "terminate_sir",
                    "outer_iteration": outer_iteration,
                    "step": step,
                    "sir": sir_document(sir_current),
                },
            )
            recorder.snapshot(sir_current, outer_iteration, step, ORIGIN_REFINED)
            history.append(TranslatorStepRecord(thought, action, None, sir_current))
            break
        correlation = recorder.next_correlation()
        recorder.event(
            "tool_call",
            {
                "agent": "translator",
                "outer_iteration": outer_iteration,
                "step": step,
                "name": action.tool_name,
                "arguments": action.arguments,
                "correlation_id": correlation,
            },
        )
        result = toolbox.execute(action.tool_name, action.arguments, context)
        recorder.event(
            "tool_result",
            {
                "agent": "translator",
                "outer_iteration": outer_iteration,
                "step": step,
                "correlation_id": correlation,
                "ok": result.ok,
                "content": result.content,
            },
        )
        sir_current = translator.refine_sir(
            sir_current,
            thought,
            result.content,
            on_retry=recorder.retry_hook("translator", "sir_refinement"),
        )
        recorder.snapshot(sir_current, outer_iteration, step, ORIGIN_REFINED)
        history.append(TranslatorStepRecord(thought, action, result.content, sir_current))
        score, _ = assess_sufficiency(sir_current)
        if score >= config.tau_t:
            break
    return sir_current


def reasoner_inner_loop(
    task: Task,
    sir: Sir,
    memory: ReasonerMemory,
    config: RunConfig,
    reasoner: ReasonerAgent,
    toolbox: ToolRegistry,
    *,
    context: ToolContext | None = None,
    recorder: EpisodeRecorder | None = None,
    outer_iteration: int = 1,
) -> LoopAnswer | LoopFeedback:
    """Reason over the SIR for up to max_steps_reasoner policy steps.

    A terminate action ends the loop; hitting the step cap without one
    synthesizes feedback from the last reasoning turn.
    """
    recorder = recorder or _null_recorder(task.task_id)
    context = context or ToolContext(sandbox=None)
    history: list[ReasonerStepRecord] = []
    tools_used: list[str] = []
    last_thought = ""
    for step in range(1, config.max_steps_reasoner + 1):
        try:
            thought, action = reasoner.propose_action(
                sir,
                task,
                memory,
                history,
                step,
                on_retry=recorder.retry_hook("reasoner", "reasoner_action"),
            )
        except ActionParseFailure:
            recorder.event(
                "reasoner_thought",
                {
                    "outer_iteration": outer_iteration,
                    "step": step,
                    "thought": "",
                    "parse_failure": True,
                },
            )
            continue
        if thought:
            last_thought = thought
        recorder.event(
            "reasoner_thought",
            {"outer_iteration": outer_iteration, "step": step, "thought": thought},
        )
        if isinstance(action, TerminateAnswer):
            final = final_answer_from_terminal(action, task.options)
            recorder.event(
                "terminal_action",
                {
                    "agent": "reasoner",
                    "action": "terminate_answer",
                    "outer_iteration": outer_iteration,
                    "step": step,
                    "answer": answer_payload(final),
                },
            )
            return LoopAnswer(final, tuple(tools_used))
        if isinstance(action, TerminateFeedback):
            recorder.event(
                "terminal_action",
                {
                    "agent": "reasoner",
                    "action": "terminate_feedback",
                    "outer_iteration": outer_iteration,
                    "step": step,
                    "feedback": action.feedback,
                },
            )
            return LoopFeedback(action.feedback, tuple(tools_used))
        correlation = recorder.next_correlation()
        recorder.event(
            "tool_call",
            {
                "agent": "reasoner",
                "outer_iteration": outer_iteration,
                "step": step,
                "name": action.tool_name,
                "arguments": action.arguments,
                "correlation_id": correlation,
            },
        )
        result = toolbox.execute(action.tool_name, action.arguments, context)
        recorder.event(
            "tool_result",
            {
                "agent": "reasoner",
                "outer_iteration": outer_iteration,
                "step": step,
                "correlation_id": correlation,
                "ok": result.ok,
                "content": result.content,
            },
        )
        tools_used.append(action.tool_name)
        history.append(ReasonerStepRecord(thought, action, result.content))
    feedback = "AUTO-FEEDBACK: " + (
        last_thought or "no reasoning recorded; need a more complete visual description"
    )
    recorder.event(
        "terminal_action",
        {
            "agent": "reasoner",
            "action": "terminate_feedback",
            "outer_iteration": outer_iteration,
            "step": config.max_steps_reasoner,
            "feedback": feedback,
            "synthesized": True,
        },
    )
    return LoopFeedback(feedback, tuple(tools_used), synthesized=True)


def force_answer(
    sir: Sir,
    task: Task,
    reasoner: ReasonerAgent,
    config: RunConfig,
    *,
    recorder: EpisodeRecorder | None = None,
) -> FinalAnswer:
    """Compel one final answer after the last iteration; never fails."""
    recorder = recorder or _null_recorder(task.task_id)
    final, attempts = reasoner.force_answer(
        sir, task, on_retry=recorder.retry_hook("reasoner", "force_answer")
    )
    recorder.event(
        "force_answer",
        {
            "agent": "reasoner",
            "outer_iteration": config.max_iters,
            "answer": answer_payload(final),
            "attempts": attempts,
            "fallback": final.fallback,
        },
    )
    return final


def _null_recorder(episode_id: str) -> EpisodeRecorder:
    store = MemoryTraceStore(clock=lambda: 0.0)
    return EpisodeRecorder(store.writer(episode_id), CostLedger())
