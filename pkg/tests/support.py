"""Shared scripted-run helpers for the test suite."""

from __future__ import annotations

import json

from seeingeye.backend import (
    ChatResponse,
    NO_WAIT,
    ScriptedBackend,
    ScriptedReply,
    Usage,
    WireToolCall,
)
from seeingeye.engine import RunConfig, Task
from seeingeye.media import ImageData, solid_png

TRANSLATOR_MODEL = "vlm-translator-3b"
REASONER_MODEL = "llm-reasoner-8b"


def tiny_image(width: int = 8, height: int = 8) -> ImageData:
    return ImageData(data=solid_png(width, height), media_type="image/png")


def text_reply(text, usage=(10, 5), match=None, model=None):
    return ScriptedReply(
        response=ChatResponse(text=text, usage=Usage(*usage)),
        match_model=model,
        match_substring=match,
    )


def tool_reply(tool, args, thought=None, usage=(10, 5), match=None, model=None):
    return ScriptedReply(
        response=ChatResponse(
            text=thought,
            tool_calls=(WireToolCall(name=tool, arguments_text=json.dumps(args)),),
            usage=Usage(*usage),
        ),
        match_model=model,
        match_substring=match,
    )


def raw_tool_reply(tool, arguments_text, thought=None, usage=(10, 5)):
    return ScriptedReply(
        response=ChatResponse(
            text=thought,
            tool_calls=(WireToolCall(name=tool, arguments_text=arguments_text),),
            usage=Usage(*usage),
        )
    )


def scripted(*replies) -> ScriptedBackend:
    return ScriptedBackend(replies)


def fast_config(**overrides) -> RunConfig:
    defaults = dict(
        translator_model=TRANSLATOR_MODEL,
        reasoner_model=REASONER_MODEL,
        retry=NO_WAIT,
    )
    defaults.update(overrides)
    return RunConfig(**defaults)


def make_task(
    task_id="t1",
    question="What animal is shown in the poster?",
    options=(("A", "dove"), ("B", "cat"), ("C", "dog"), ("D", "eagle")),
    image=None,
) -> Task:
    return Task(
        task_id=task_id,
        question=question,
        options=tuple(options),
        image=image or tiny_image(),
    )


class FakeSandbox:
    """Fixed-output stand-in for the external code runner."""

    def __init__(self, mapping=None, default=("ok", "42\n", "")):
        self.mapping = dict(mapping or {})
        self.default = default
        self.calls: list[str] = []

    def run(self, code: str, timeout: float) -> dict:
        self.calls.append(code)
        status, stdout, stderr = self.mapping.get(code, self.default)
        return {
            "status": status,
            "stdout": stdout,
            "stderr": stderr,
            "wall_time": 0.01,
        }
