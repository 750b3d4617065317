"""The standard tool registry shared by both agents.

Termination tools are registered for schema validation but are control flow:
the engine intercepts them before dispatch, so their handlers only ever run
if a caller misuses ``execute`` directly.
"""

from __future__ import annotations

from .grid import smart_grid_caption
from .registry import ToolContext, ToolRegistry, ToolResult, ToolSpec, error_result
from .sandbox import python_execute
from .vision import ocr, read_table

TERMINATE_OUTPUT_CAPTION = "terminate_and_output_caption"
TERMINATE_ANSWER = "terminate_and_answer"
TERMINATE_ASK_TRANSLATOR = "terminate_and_ask_translator"

TRANSLATOR_TOOL_NAMES = ("ocr", "read_table", "smart_grid_caption", TERMINATE_OUTPUT_CAPTION)
REASONER_TOOL_NAMES = ("python_execute", TERMINATE_ANSWER, TERMINATE_ASK_TRANSLATOR)
TERMINATION_TOOL_NAMES = (TERMINATE_OUTPUT_CAPTION, TERMINATE_ANSWER, TERMINATE_ASK_TRANSLATOR)

_GLOBAL_CAPTION_DESCRIPTION = (
    "A comprehensive description of ALL visual elements in sentence form or "
    "table form, including: text content, numerical values, table structures, "
    "objects, layouts, colors, spatial relationships, and any other visual "
    "information. Be factual and descriptive - do not infer anything not "
    "exists in the original image."
)

_SIR_CONFIDENCE_DESCRIPTION = (
    "Your confidence level in the completeness and accuracy of this global "
    "caption. 'low' = incomplete analysis or unclear image, 'mid' = good "
    "analysis with some limitations, 'high' = comprehensive and thorough "
    "analysis."
)

OCR_SPEC = ToolSpec(
    name="ocr",
    description="Extract text with high precision, useful for image that contains text",
    parameters={"type": "object", "properties": {}, "required": []},
)

READ_TABLE_SPEC = ToolSpec(
    name="read_table",
    description="Parse structured tabular data, useful for spreadsheets, data tables",
    parameters={"type": "object", "properties": {}, "required": []},
)

SMART_GRID_CAPTION_SPEC = ToolSpec(
    name="smart_grid_caption",
    description="Used to analyze specific image regions",
    parameters={
        "type": "object",
        "properties": {
            "query": {
                "type": "string",
                "description": "What to look for; guides which grid regions get captioned.",
            }
        },
        "required": ["query"],
    },
)

TERMINATE_OUTPUT_CAPTION_SPEC = ToolSpec(
    name=TERMINATE_OUTPUT_CAPTION,
    description=(
        "Output your final visual description (SIR) and end the captioning "
        "process. Use once your description is comprehensive."
    ),
    parameters={
        "type": "object",
        "properties": {
            "global_caption": {"type": "string", "description": _GLOBAL_CAPTION_DESCRIPTION},
            "confidence": {
                "type": "string",
                "enum": ["low", "mid", "high"],
                "description": _SIR_CONFIDENCE_DESCRIPTION,
            },
        },
        "required": ["global_caption", "confidence"],
    },
)

PYTHON_EXECUTE_SPEC = ToolSpec(
    name="python_execute",
    description=(
        "Use for calculations, data analysis, mathematical operations, or any "
        "computation. ALWAYS include print() statements to show results."
    ),
    parameters={
        "type": "object",
        "properties": {"code": {"type": "string", "description": "Python code to run."}},
        "required": ["code"],
    },
)

TERMINATE_ANSWER_SPEC = ToolSpec(
    name=TERMINATE_ANSWER,
    description=(
        "Terminate the reasoning process and provide a final answer when you "
        "have sufficient information from the SIR to confidently answer the "
        "question."
    ),
    parameters={
        "type": "object",
        "properties": {
            "answer": {
                "type": "string",
                "description": (
                    "Your final answer to the question. Please include short "
                    "answer only. For multiple choice, only include option"
                ),
            },
            "confidence": {
                "type": "string",
                "description": "Your confidence level in this answer.",
                "enum": ["high", "medium", "low"],
            },
            "reasoning": {
                "type": "string",
                "description": (
                    "Brief explanation of how the SIR information led to this answer."
                ),
            },
        },
        "required": ["answer", "confidence", "reasoning"],
    },
)

TERMINATE_ASK_TRANSLATOR_SPEC = ToolSpec(
    name=TERMINATE_ASK_TRANSLATOR,
    description=(
        "Terminate current reasoning step and request more specific visual "
        "observations from the translator."
    ),
    parameters={
        "type": "object",
        "properties": {
            "feedback": {
                "type": "string",
                "description": (
                    "Specific feedback about what additional visual information "
                    "you need from the translator. Be precise about what's "
                    "missing or unclear in the current description."
                ),
            }
        },
        "required": ["feedback"],
    },
)


def _terminal_handler(name: str):
    def handler(arguments: dict, context: ToolContext) -> ToolResult:
        return error_result(f"{name} is a terminal action handled by the engine, not an effect")

    return handler


def standard_registry() -> ToolRegistry:
    registry = ToolRegistry()
    registry.register(OCR_SPEC, lambda args, ctx: ocr(ctx.image, ctx))
    registry.register(READ_TABLE_SPEC, lambda args, ctx: read_table(ctx.image, ctx))
    registry.register(
        SMART_GRID_CAPTION_SPEC,
        lambda args, ctx: smart_grid_caption(ctx.image, args["query"], ctx),
    )
    registry.register(PYTHON_EXECUTE_SPEC, python_execute)
    registry.register(TERMINATE_OUTPUT_CAPTION_SPEC, _terminal_handler(TERMINATE_OUTPUT_CAPTION))
    registry.register(TERMINATE_ANSWER_SPEC, _terminal_handler(TERMINATE_ANSWER))
    registry.register(
        TERMINATE_ASK_TRANSLATOR_SPEC, _terminal_handler(TERMINATE_ASK_TRANSLATOR)
    )
    return registry
