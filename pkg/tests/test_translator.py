from __future__ import annotations

import pytest

from seeingeye.backend import ActionParseFailure, ScriptedBackend
from seeingeye.sir import Sir, initial_sir
from seeingeye.tools.builtin import standard_registry
from seeingeye.tools.registry import ToolCall
from seeingeye.translator import (
    TerminateSir,
    TranslatorAgent,
    TranslatorStepRecord,
    assess_sufficiency,
)
from support import TRANSLATOR_MODEL, fast_config, text_reply, tiny_image, tool_reply


def make_agent(*replies):
    return TranslatorAgent(
        backend=ScriptedBackend(replies),
        model=TRANSLATOR_MODEL,
        registry=standard_registry(),
        retry=fast_config().retry,
    )


def propose(agent, sir=None, feedback=None, history=None, step_index=1, step_cap=3, iteration=1):
    return agent.propose_action(
        tiny_image(),
        "What animal is shown in the poster?",
        sir or initial_sir(),
        feedback,
        history or [],
        step_index,
        step_cap,
        outer_iteration=iteration,
    )


class TestAssessSufficiency:
    def test_mapping_table(self):
        assert assess_sufficiency(Sir("x", "low")) == (0.3, "low")
        assert assess_sufficiency(Sir("x", "mid")) == (0.6, "mid")
        assert assess_sufficiency(Sir("x", "high")) == (0.9, "high")

    def test_pure_function(self):
        sir = Sir("same", "mid")
        assert assess_sufficiency(sir) == assess_sufficiency(sir)

    def test_high_meets_default_threshold(self):
        config = fast_config()
        score, level = assess_sufficiency(Sir("x", "high"))
        assert (score >= config.tau_t) == (level == "high")
        for level_name, expected in (("low", False), ("mid", False), ("high", True)):
            score, _ = assess_sufficiency(Sir("x", level_name))
            assert (score >= config.tau_t) is expected


class TestProposeAction:
    def test_first_step_prompt_and_tool_call(self):
        agent = make_agent(
            tool_reply(
                "smart_grid_caption",
                {"query": "animal in the poster"},
                thought="A church with a poster; the poster content is unclear.",
            )
        )
        thought, action = propose(agent)
        assert action == ToolCall("smart_grid_caption", {"query": "animal in the poster"})
        assert "unclear" in thought
        text = agent.backend.consumed[0][0].text_content()
        assert "Direct Visual Observation" in text
        assert "Create Initial SIR" in text

    def test_system_prompt_fidelity(self):
        agent = make_agent(tool_reply("ocr", {}))
        propose(agent)
        text = agent.backend.consumed[0][0].text_content()
        assert "No answers, explanations, conclusions" in text
        assert (
            'SIR OUTPUT FORMAT:\n{\n    "global_caption": "A comprehensive description '
            'of ALL visual elements",\n    "confidence": "low/mid/high"\n}' in text
        )

    def test_feedback_triggers_improvement_prompt_with_prior_sir(self):
        agent = make_agent(tool_reply("ocr", {}))
        sir = Sir("church building", "mid", "what animal is in the poster")
        propose(agent, sir=sir, feedback="what animal is in the poster", iteration=2)
        text = agent.backend.consumed[0][0].text_content()
        assert "IMPROVEMENT TASK" in text
        assert '"global_caption":"church building"' in text
        assert '"feedback":"what animal is in the poster"' in text
        assert "(iteration 1)" in text

    def test_final_step_offers_only_terminator(self):
        agent = make_agent(
            tool_reply(
                "terminate_and_output_caption",
                {"global_caption": "a church", "confidence": "mid"},
            )
        )
        _, action = propose(agent, step_index=3, step_cap=3)
        assert isinstance(action, TerminateSir)
        request = agent.backend.consumed[0][0]
        assert [spec.name for spec in request.tool_specs] == ["terminate_and_output_caption"]
        assert "MANDATORY: Use terminate_and_output_caption" in request.text_content()

    def test_intermediate_step_offers_full_toolset(self):
        agent = make_agent(tool_reply("ocr", {}))
        propose(agent, step_index=2, history=[_tool_step()])
        request = agent.backend.consumed[0][0]
        assert {spec.name for spec in request.tool_specs} == {
            "ocr",
            "read_table",
            "smart_grid_caption",
            "terminate_and_output_caption",
        }
        assert "what's your next action" in request.text_content()

    def test_image_attached_to_request(self):
        agent = make_agent(tool_reply("ocr", {}))
        propose(agent)
        assert agent.backend.consumed[0][0].has_image_parts()

    def test_terminate_via_tool_arguments(self):
        agent = make_agent(
            tool_reply(
                "terminate_and_output_caption",
                {"global_caption": "a person holding a dove", "confidence": "high"},
            )
        )
        _, action = propose(agent)
        assert action == TerminateSir(Sir("a person holding a dove", "high"))

    def test_terminate_payload_in_plain_text(self):
        agent = make_agent(
            text_reply('Here is my SIR: {"global_caption":"two bars","confidence":"mid"}')
        )
        _, action = propose(agent)
        assert action == TerminateSir(Sir("two bars", "mid"))

    def test_unusable_replies_exhaust_to_parse_failure(self):
        agent = make_agent(*[text_reply("no payload here") for _ in range(3)])
        with pytest.raises(ActionParseFailure):
            propose(agent)

    def test_bad_terminate_arguments_retry(self):
        agent = make_agent(
            tool_reply("terminate_and_output_caption", {"global_caption": "x", "confidence": "certain"}),
            tool_reply("terminate_and_output_caption", {"global_caption": "x", "confidence": "low"}),
        )
        _, action = propose(agent)
        assert action == TerminateSir(Sir("x", "low"))

    def test_history_rendered_into_conversation(self):
        agent = make_agent(tool_reply("ocr", {}))
        record = _tool_step(thought="saw a poster", result="selected regions: (1,1); dove")
        propose(agent, step_index=2, history=[record])
        text = agent.backend.consumed[0][0].text_content()
        assert "saw a poster" in text
        assert "Tool result (smart_grid_caption):" in text
        assert "selected regions: (1,1); dove" in text


class TestRefineSir:
    def test_folds_tool_result(self):
        agent = make_agent(
            text_reply(
                '{"global_caption":"A church building; its poster shows a person '
                'holding a dove","confidence":"mid"}'
            )
        )
        refined = agent.refine_sir(
            Sir("church building", "low"),
            "the poster needs a closer look",
            "Poster featuring a person holding a dove",
        )
        assert "dove" in refined.global_caption
        assert refined.confidence == "mid"
        text = agent.backend.consumed[0][0].text_content()
        assert "SIR MANAGEMENT" in text
        assert '"global_caption":"church building"' in text
        assert "Poster featuring a person holding a dove" in text

    def test_unparseable_reply_degrades_to_low(self):
        agent = make_agent(text_reply("sorry, I got confused"))
        previous = Sir("church building", "high")
        refined = agent.refine_sir(previous, "t", "r")
        assert refined == Sir("church building", "low")

    def test_empty_tool_result_keeps_caption(self):
        agent = make_agent(text_reply('{"global_caption":"church building","confidence":"low"}'))
        previous = Sir("church building", "low")
        refined = agent.refine_sir(previous, "no new information", "")
        assert refined.global_caption == previous.global_caption


class TestStepRecord:
    def test_tool_result_required_for_tool_calls(self):
        with pytest.raises(ValueError):
            TranslatorStepRecord("t", ToolCall("ocr", {}), None, initial_sir())

    def test_tool_result_forbidden_for_terminals(self):
        with pytest.raises(ValueError):
            TranslatorStepRecord("t", TerminateSir(initial_sir()), "r", initial_sir())


def _tool_step(thought="t", result="r"):
    return TranslatorStepRecord(
        thought,
        ToolCall("smart_grid_caption", {"query": "poster"}),
        result,
        Sir("church building", "low"),
    )
