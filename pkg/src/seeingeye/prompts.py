"""Prompt text assets and the tool-mention closure check.

The prompt wording is load-bearing protocol surface, so it lives in
versioned .txt assets rather than inline strings. Substitution is done with
plain replace because the assets contain literal JSON braces.
"""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

PROMPTS_VERSION = "1"

TRANSLATOR_SYSTEM = "translator_system"
TRANSLATOR_FIRST_STEP = "translator_first_step"
TRANSLATOR_NEXT_STEP = "translator_next_step"
TRANSLATOR_FINAL_STEP = "translator_final_step"
FEEDBACK_IMPROVEMENT = "feedback_improvement"
SIR_MANAGEMENT = "sir_management"
REASONER_SYSTEM = "reasoner_system"
REASONER_NEXT_STEP = "reasoner_next_step"
FORCE_ANSWER = "force_answer"

ALL_PROMPTS = (
    TRANSLATOR_SYSTEM,
    TRANSLATOR_FIRST_STEP,
    TRANSLATOR_NEXT_STEP,
    TRANSLATOR_FINAL_STEP,
    FEEDBACK_IMPROVEMENT,
    SIR_MANAGEMENT,
    REASONER_SYSTEM,
    REASONER_NEXT_STEP,
    FORCE_ANSWER,
)


@lru_cache(maxsize=None)
def load(name: str) -> str:
    path = resources.files(__package__) / "prompts" / f"{name}.txt"
    return path.read_text(encoding="utf-8")


def render(name: str, **variables: str) -> str:
    text = load(name)
    for key, value in variables.items():
        text = text.replace("{" + key + "}", str(value))
    return text


# Tool mentions appear as "- name: description" bullets, "use <name>"
# directives, or "<name> tool" suffixes; all three forms are scanned.
_BULLET_MENTION = re.compile(r"^\s*-\s+([A-Za-z][A-Za-z0-9_]*)\s*:", re.MULTILINE)
_USE_MENTION = re.compile(r"\buse\s+([a-z][a-z0-9]*(?:_[a-z0-9]+)+)\b", re.IGNORECASE)
_TOOL_SUFFIX_MENTION = re.compile(r"\b([a-z][a-z0-9]*(?:_[a-z0-9]+)+)\s+tool\b", re.IGNORECASE)


def mentioned_tool_names(text: str) -> set[str]:
    names = {m.group(1) for m in _BULLET_MENTION.finditer(text)}
    names |= {m.group(1) for m in _USE_MENTION.finditer(text)}
    names |= {m.group(1) for m in _TOOL_SUFFIX_MENTION.finditer(text)}
    return {name.lower() for name in names}


def check_registry_closure(registry) -> None:
    """Fail fast if any prompt mentions a tool the registry does not provide."""
    missing: dict[str, set[str]] = {}
    for prompt_name in ALL_PROMPTS:
        for tool_name in mentioned_tool_names(load(prompt_name)):
            if tool_name not in registry:
                missing.setdefault(prompt_name, set()).add(tool_name)
    if missing:
        details = "; ".join(
            f"{prompt}: {sorted(tools)}" for prompt, tools in sorted(missing.items())
        )
        raise ValueError(f"prompts mention unregistered tools ({details})")
