"""Model backends: a chat-completions HTTP client and a scripted test double.

Both speak the same small request/response surface. The scripted backend is
the deterministic oracle substrate for every protocol test; the live client
talks to any chat-completions-compatible endpoint with tool calling and
image parts.
"""

from __future__ import annotations

import json
import math
import os
import time
from dataclasses import dataclass
from typing import Callable, Iterable, Protocol

import requests

from .media import to_data_url
TRANSLATOR_ROLE = "translator"
REASONER_ROLE = "reasoner"


class BackendError(Exception):
    pass


class RetryableBackendError(BackendError):
    """Transient transport failure: timeout, 429, 5xx."""


class FatalBackendError(BackendError):
    """Non-retryable failure: other 4xx, malformed response body."""


class BackendExhausted(BackendError):
    """Raised after the retry budget is spent; aborts the episode."""


class NoMatchError(AssertionError):
    """Scripted backend got a request no canned reply matches (test-fatal)."""


class ImagePartsForbidden(ValueError):
    pass


@dataclass(frozen=True)
class TextPart:
    text: str


@dataclass(frozen=True)
class ImagePart:
    data: bytes
    media_type: str = "image/png"


@dataclass(frozen=True)
class Message:
    role: str
    parts: tuple = ()

    @classmethod
    def text(cls, role: str, text: str) -> "Message":
        return cls(role=role, parts=(TextPart(text),))


@dataclass(frozen=True)
class ChatRequest:
    model: str
    agent_role: str
    messages: tuple
    tool_specs: tuple = ()
    max_output_tokens: int = 1024
    temperature: float = 0.0
    tag: str = ""

    def __post_init__(self) -> None:
        if not self.messages:
            raise ValueError("a request needs at least one message")
        if self.agent_role == REASONER_ROLE and self.has_image_parts():
            raise ImagePartsForbidden("reasoner requests must be text-only")

    def has_image_parts(self) -> bool:
        return any(
            isinstance(part, ImagePart) for message in self.messages for part in message.parts
        )

    def text_content(self) -> str:
        return "\n".join(
            part.text
            for message in self.messages
            for part in message.parts
            if isinstance(part, TextPart)
        )


@dataclass(frozen=True)
class Usage:
    input_tokens: int
    output_tokens: int

    def __post_init__(self) -> None:
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("usage counts must be >= 0")


@dataclass(frozen=True)
class WireToolCall:
    name: str
    arguments_text: str


@dataclass(frozen=True)
class ChatResponse:
    text: str | None = None
    tool_calls: tuple = ()
    usage: Usage = Usage(0, 0)
    latency_s: float = 0.0
    approximate_usage: bool = False


class Backend(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


def approx_token_count(char_count: int) -> int:
    return math.ceil(char_count / 4)


def request_wire_body(request: ChatRequest) -> dict:
    """The chat-completions JSON body (no credentials; those live in headers)."""
    messages = []
    for message in request.messages:
        content = []
        for part in message.parts:
            if isinstance(part, TextPart):
                content.append({"type": "text", "text": part.text})
            else:
                content.append(
                    {
                        "type": "image_url",
                        "image_url": {"url": to_data_url(part.data, part.media_type)},
                    }
                )
        messages.append({"role": message.role, "content": content})
    body = {
        "model": request.model,
        "messages": messages,
        "max_tokens": request.max_output_tokens,
        "temperature": request.temperature,
    }
    if request.tool_specs:
        body["tools"] = [spec.wire_format() for spec in request.tool_specs]
    return body


def response_wire_body(response: ChatResponse) -> dict:
    body: dict = {
        "text": response.text,
        "tool_calls": [
            {"name": c.name, "arguments": c.arguments_text} for c in response.tool_calls
        ],
        "usage": {
            "input_tokens": response.usage.input_tokens,
            "output_tokens": response.usage.output_tokens,
        },
    }
    if response.approximate_usage:
        body["approximate_usage"] = True
    return body


class LiveBackend:
    """Client for one chat-completions endpoint; safe for concurrent episodes."""

    def __init__(
        self,
        base_url: str,
        api_key_env: str,
        timeout_s: float = 120.0,
        transport: Callable[..., "requests.Response"] | None = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env
        self.timeout_s = timeout_s
        self._post = transport or requests.post

    def complete(self, request: ChatRequest) -> ChatResponse:
        headers = {"Content-Type": "application/json"}
        api_key = os.environ.get(self.api_key_env, "")
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        body = request_wire_body(request)
        started = time.monotonic()
        try:
            http_response = self._post(
                f"{self.base_url}/chat/completions",
                json=body,
                headers=headers,
                timeout=self.timeout_s,
            )
        except requests.Timeout as exc:
            raise RetryableBackendError(f"timeout after {self.timeout_s}s") from exc
        except requests.RequestException as exc:
            raise RetryableBackendError(f"transport failure: {exc}") from exc
        latency = time.monotonic() - started
        status = http_response.status_code
        if status == 429 or status >= 500:
            raise RetryableBackendError(f"HTTP {status}")
        if status >= 400:
            raise FatalBackendError(f"HTTP {status}: {http_response.text[:500]}")
        try:
            payload = http_response.json()
            message = payload["choices"][0]["message"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise FatalBackendError(f"malformed response body: {exc}") from exc
        text = message.get("content")
        if isinstance(text, list):
            text = "".join(
                part.get("text", "") for part in text if isinstance(part, dict)
            )
        tool_calls = []
        for call in message.get("tool_calls") or []:
            function = call.get("function") or {}
            tool_calls.append(
                WireToolCall(
                    name=function.get("name", ""),
                    arguments_text=function.get("arguments", "") or "",
                )
            )
        usage_payload = payload.get("usage") or {}
        approximate = False
        if "prompt_tokens" in usage_payload or "completion_tokens" in usage_payload:
            usage = Usage(
                input_tokens=int(usage_payload.get("prompt_tokens", 0)),
                output_tokens=int(usage_payload.get("completion_tokens", 0)),
            )
        else:
            input_chars = len(request.text_content())
            output_chars = len(text or "") + sum(
                len(c.name) + len(c.arguments_text) for c in tool_calls
            )
            usage = Usage(approx_token_count(input_chars), approx_token_count(output_chars))
            approximate = True
        return ChatResponse(
            text=text,
            tool_calls=tuple(tool_calls),
            usage=usage,
            latency_s=latency,
            approximate_usage=approximate,
        )


@dataclass
class ScriptedReply:
    """One canned response, matched by model-name and message substrings."""

    response: ChatResponse | None = None
    match_model: str | None = None
    match_substring: str | None = None
    error: BackendError | None = None

    def matches(self, request: ChatRequest) -> bool:
        if self.match_model is not None and self.match_model not in request.model:
            return False
        if self.match_substring is not None and self.match_substring not in request.text_content():
            return False
        return True


class ScriptedBackend:
    """FIFO-with-predicate queue of canned responses; single-episode use."""

    def __init__(self, replies: Iterable[ScriptedReply] = ()):
        self.queue: list[ScriptedReply] = list(replies)
        self.consumed: list[tuple[ChatRequest, ScriptedReply]] = []

    def complete(self, request: ChatRequest) -> ChatResponse:
        return scripted_next(self, request)


def scripted_next(backend: ScriptedBackend, request: ChatRequest) -> ChatResponse:
    """Consume and return the first matching canned reply; NoMatch is test-fatal."""
    for index, entry in enumerate(backend.queue):
        if entry.matches(request):
            backend.queue.pop(index)
            backend.consumed.append((request, entry))
            if entry.error is not None:
                raise entry.error
            assert entry.response is not None
            return entry.response
    raise NoMatchError(
        "no scripted reply matches request\n"
        f"  model={request.model!r} role={request.agent_role!r} tag={request.tag!r}\n"
        f"  text starts: {request.text_content()[:200]!r}\n"
        f"  remaining queue keys: "
        f"{[(e.match_model, e.match_substring) for e in backend.queue]}"
    )


class RecordingBackend:
    """Wraps a backend and reports every successful call to a hook."""

    def __init__(self, inner: Backend, hook: Callable[[ChatRequest, ChatResponse], None]):
        self.inner = inner
        self.hook = hook

    def complete(self, request: ChatRequest) -> ChatResponse:
        response = self.inner.complete(request)
        self.hook(request, response)
        return response


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    base_delay_s: float = 1.0
    sleep: Callable[[float], None] = time.sleep

    def __post_init__(self) -> None:
        if self.attempts < 1:
            raise ValueError("attempts must be >= 1")


NO_WAIT = RetryPolicy(sleep=lambda _: None)


class ActionParseFailure(ValueError):
    """The model replied, but the reply holds no usable action."""


def request_action(
    backend: Backend,
    request: ChatRequest,
    parse: Callable[[ChatResponse], object],
    policy: RetryPolicy,
    on_retry: Callable[[int, Exception], None] | None = None,
):
    """Call the backend and parse the reply, retrying transport failures and
    unusable replies under one shared attempt budget."""
    delay = policy.base_delay_s
    last_parse_error: ActionParseFailure | None = None
    for attempt in range(1, policy.attempts + 1):
        try:
            response = backend.complete(request)
        except FatalBackendError as exc:
            raise BackendExhausted(f"fatal backend failure: {exc}") from exc
        except RetryableBackendError as exc:
            if on_retry:
                on_retry(attempt, exc)
            if attempt == policy.attempts:
                raise BackendExhausted(f"retries exhausted: {exc}") from exc
            policy.sleep(delay)
            delay *= 2
            continue
        try:
            return parse(response)
        except ActionParseFailure as exc:
            last_parse_error = exc
            if on_retry:
                on_retry(attempt, exc)
            if attempt == policy.attempts:
                raise
            policy.sleep(delay)
            delay *= 2
    raise last_parse_error if last_parse_error else BackendExhausted("no attempts made")


def complete_with_retry(
    backend: Backend,
    request: ChatRequest,
    policy: RetryPolicy,
    on_retry: Callable[[int, Exception], None] | None = None,
) -> ChatResponse:
    """Retry transport failures only; the reply is returned unparsed."""
    return request_action(backend, request, lambda r: r, policy, on_retry)


def render_scripted(
    text: str | None = None,
    tool: str | None = None,
    args: dict | None = None,
    usage: tuple[int, int] = (10, 5),
) -> ChatResponse:
    """Convenience constructor for scripted replies."""
    calls = ()
    if tool is not None:
        calls = (WireToolCall(name=tool, arguments_text=json.dumps(args or {})),)
    return ChatResponse(text=text, tool_calls=calls, usage=Usage(*usage))
