"""Verbatim text extraction and table reading over the vision backend.

Both tools are prompt-backed by default (the translator model is itself a
VLM); ``ocr`` carries an adapter seam so an external OCR engine can be
swapped in without touching the protocol.
"""

from __future__ import annotations

import re
from typing import Protocol

from ..media import ImageData
from .registry import ToolContext, ToolResult, error_result

OCR_INSTRUCTION = (
    "Extract all text visible in this image, verbatim. Preserve blanks "
    '("", "--", "___"), unknowns ("?"), typos, casing, punctuation, and line '
    "breaks exactly as seen. Output the extracted text only."
)

READ_TABLE_INSTRUCTION = (
    "Read the table in this image and output it as delimited rows: one line "
    "per table row, cells separated by |, header row first when one is "
    "visually present. Copy cell text exactly as seen. If there is no table, "
    "reply NO TABLE DETECTED."
)

NO_TABLE_SENTINEL = "NO TABLE DETECTED"


class OcrAdapter(Protocol):
    def extract_text(self, image: ImageData) -> str: ...


class BackendOcrAdapter:
    """Default adapter: one vision call with the verbatim-extraction instruction."""

    def __init__(self, context: ToolContext):
        self._context = context

    def extract_text(self, image: ImageData) -> str:
        reply = _vision_call(self._context, image, OCR_INSTRUCTION, tag="ocr")
        return reply if reply is not None else ""


def ocr(image: ImageData | None, context: ToolContext, adapter: OcrAdapter | None = None) -> ToolResult:
    if image is None:
        return error_result("ocr needs an image in context")
    from ..backend import BackendError

    if adapter is None:
        if context.backend is None or context.vision_model is None:
            return error_result("ocr needs a vision backend in context")
        adapter = BackendOcrAdapter(context)
    try:
        return ToolResult(ok=True, content=adapter.extract_text(image))
    except BackendError as exc:
        return error_result(f"ocr backend failure: {exc}")


def read_table(image: ImageData | None, context: ToolContext) -> ToolResult:
    if image is None:
        return error_result("read_table needs an image in context")
    if context.backend is None or context.vision_model is None:
        return error_result("read_table needs a vision backend in context")
    from ..backend import BackendError

    try:
        reply = _vision_call(context, image, READ_TABLE_INSTRUCTION, tag="read_table")
    except BackendError as exc:
        return error_result(f"read_table backend failure: {exc}")
    return ToolResult(ok=True, content=normalize_table(reply or ""))


_SEPARATOR_LINE = re.compile(r"^[\s\|\-:=+]+$")
_NO_TABLE = re.compile(r"no\s+table", re.IGNORECASE)


def normalize_table(reply: str) -> str:
    """Normalize a model's table transcription to pipe-delimited rows.

    Markdown rulers are dropped, surrounding pipes stripped, and ragged rows
    padded with empty cells to the widest row.
    """
    if not reply.strip() or _NO_TABLE.search(reply):
        return NO_TABLE_SENTINEL
    rows: list[list[str]] = []
    for line in reply.splitlines():
        stripped = line.strip()
        if not stripped or _SEPARATOR_LINE.match(stripped):
            continue
        if stripped.startswith("|"):
            stripped = stripped[1:]
        if stripped.endswith("|"):
            stripped = stripped[:-1]
        cells = [cell.strip() for cell in stripped.split("|")]
        rows.append(cells)
    if not rows:
        return NO_TABLE_SENTINEL
    width = max(len(row) for row in rows)
    padded = [row + [""] * (width - len(row)) for row in rows]
    return "\n".join("|".join(row) for row in padded)


def _vision_call(context: ToolContext, image: ImageData, instruction: str, tag: str) -> str | None:
    from ..backend import ChatRequest, ImagePart, Message, TextPart

    response = context.backend.complete(
        ChatRequest(
            model=context.vision_model,
            agent_role="translator",
            messages=(
                Message(
                    role="user",
                    parts=(TextPart(instruction), ImagePart(image.data, image.media_type)),
                ),
            ),
            max_output_tokens=context.max_output_tokens,
            temperature=context.temperature,
            tag=tag,
        )
    )
    return response.text
