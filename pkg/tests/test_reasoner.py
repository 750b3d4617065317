from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seeingeye.backend import ActionParseFailure, ImagePart, ScriptedBackend
from seeingeye.reasoner import (
    FinalAnswer,
    ReasonerAgent,
    ReasonerMemory,
    TerminalDecision,
    TerminateAnswer,
    TerminateFeedback,
    decide_terminal,
    final_answer_from_terminal,
    normalize_answer,
)
from seeingeye.sir import Sir
from seeingeye.tools.builtin import standard_registry
from seeingeye.tools.registry import ToolCall
from support import (
    REASONER_MODEL,
    fast_config,
    make_task,
    raw_tool_reply,
    text_reply,
    tool_reply,
)

OPTS = (("A", "dove"), ("B", "cat"), ("C", "dog"), ("D", "eagle"))
NUM_OPTS = (("A", "3"), ("B", "5"), ("C", "7"))

# Hand-frozen rule-order corpus: (raw, options, expected_normalized, expected_fallback).
NORMALIZE_CORPUS = [
    # rule 1: exact single-letter label
    ("B", OPTS, "B", False),
    ("b", OPTS, "B", False),
    (" C ", OPTS, "C", False),
    ("A", OPTS, "A", False),
    ("D", OPTS, "D", False),
    ("a", OPTS, "A", False),
    ("d", OPTS, "D", False),
    ("\nB\n", OPTS, "B", False),
    ("E", OPTS, "E", True),  # not a label; nothing else matches
    # rule 2: "Answer: <L>"
    ("Answer: B", OPTS, "B", False),
    ("Answer: (c) because the poster shows a dove", OPTS, "C", False),
    ("answer:d", OPTS, "D", False),
    ("Final Answer: A", OPTS, "A", False),
    ("ANSWER : (B)", OPTS, "B", False),
    ("Answer:\nC", OPTS, "C", False),
    ("Answer: [B]", OPTS, "B", False),
    ("preliminary answer: (d), final answer: (a)", OPTS, "D", False),  # leftmost wins
    ("Answer: b", NUM_OPTS, "B", False),
    ("Answer: e", OPTS, "Answer: e", True),  # letter outside labels
    ("Answer: 42", OPTS, "Answer: 42", True),
    # rule 3: leading "<L>." or "(<L>)"
    ("B. because the chart rises", OPTS, "B", False),
    ("(d) eagle", OPTS, "D", False),  # rule 3 fires before containment
    ("c. the dog", OPTS, "C", False),
    ("  (B) ", OPTS, "B", False),
    ("A.", OPTS, "A", False),
    ("(a) dove", OPTS, "A", False),
    ("(x) unknown", OPTS, "(x) unknown", True),
    # rule 4: unique option-text containment
    ("the dove", OPTS, "A", False),
    ("it shows a DOVE flying", OPTS, "A", False),
    ("an eagle", OPTS, "D", False),
    ("CAT", OPTS, "B", False),
    ("Answer: the cat", OPTS, "B", False),  # rule 2 can't bind "the"; containment wins
    ("b) cat", OPTS, "B", False),  # "b)" is not a rule-3 form; containment finds cat
    ("Dove.", OPTS, "A", False),
    ("dover street", OPTS, "A", False),  # substring containment is mechanical
    ("the result is 5", NUM_OPTS, "B", False),
    # ambiguity or no match: fallback
    ("either a cat or a dog", OPTS, "either a cat or a dog", True),
    ("the EAGLE and the dove", OPTS, "the EAGLE and the dove", True),
    ("a brown animal", OPTS, "a brown animal", True),
    ("The answer is B", OPTS, "The answer is B", True),  # no colon, not the rule-2 form
    ("I would pick (B).", OPTS, "I would pick (B).", True),  # "(B)" not leading
    ("35", NUM_OPTS, "35", True),  # contains both "3" and "5"
    ("", OPTS, "", True),
    ("   ", OPTS, "", True),
    ("x" * 250, OPTS, "x" * 200, True),  # trimmed to 200 chars
    # open-ended: pass-through
    ("Paris", (), "Paris", False),
    ("  whatever  ", (), "  whatever  ", False),
    ("", (), "", False),
    ("the dove", (), "the dove", False),
    ("x" * 250, (), "x" * 250, False),
]


def test_corpus_has_at_least_fifty_cases():
    assert len(NORMALIZE_CORPUS) >= 50


@pytest.mark.parametrize("raw,options,expected,fallback", NORMALIZE_CORPUS)
def test_normalize_corpus(raw, options, expected, fallback):
    assert normalize_answer(raw, options) == (expected, fallback)


@given(st.text(max_size=220))
@settings(max_examples=300)
def test_normalize_idempotent_for_mcq(raw):
    normalized, _ = normalize_answer(raw, OPTS)
    again, _ = normalize_answer(normalized, OPTS)
    assert normalized == again


@given(st.text(max_size=220))
@settings(max_examples=200)
def test_normalized_is_label_or_fallback(raw):
    normalized, fallback = normalize_answer(raw, OPTS)
    if not fallback:
        assert normalized in {label for label, _ in OPTS}


class TestDecideTerminal:
    def test_high_confidence_must_answer(self):
        config = fast_config()
        assert decide_terminal(0.9, 1, 1, config) is TerminalDecision.MUST_ANSWER

    def test_mid_confidence_may_continue(self):
        config = fast_config()
        assert decide_terminal(0.6, 2, 1, config) is TerminalDecision.MAY_CONTINUE

    def test_final_iteration_compels_regardless_of_confidence(self):
        config = fast_config()
        assert decide_terminal(0.3, 3, 3, config) is TerminalDecision.MUST_ANSWER

    @given(st.floats(0, 1), st.floats(0, 1), st.integers(1, 3), st.integers(1, 2))
    @settings(max_examples=200)
    def test_monotone_in_confidence(self, low, delta, step, iteration):
        config = fast_config()
        high = min(low + delta, 1.0)
        if decide_terminal(low, step, iteration, config) is TerminalDecision.MUST_ANSWER:
            assert decide_terminal(high, step, iteration, config) is TerminalDecision.MUST_ANSWER


class TestReasonerMemory:
    def test_one_digest_per_iteration(self):
        memory = ReasonerMemory()
        memory.add(1, "iter 1: asked for labels / used tools none")
        with pytest.raises(ValueError):
            memory.add(1, "again")

    def test_digest_capped_at_500_chars(self):
        memory = ReasonerMemory()
        memory.add(1, "x" * 900)
        assert len(memory.summaries[0][1]) == 500


def make_agent(*replies):
    return ReasonerAgent(
        backend=ScriptedBackend(replies),
        model=REASONER_MODEL,
        registry=standard_registry(),
        retry=fast_config().retry,
    )


class TestProposeAction:
    def test_answer_terminal(self):
        agent = make_agent(
            tool_reply(
                "terminate_and_answer",
                {"answer": "A", "confidence": "high", "reasoning": "the SIR names a dove"},
                thought="The description mentions a dove.",
            )
        )
        thought, action = agent.propose_action(
            Sir("person holding a dove", "high"), make_task(), ReasonerMemory(), [], 1
        )
        assert action == TerminateAnswer("A", "high", "the SIR names a dove")
        assert "dove" in thought

    def test_feedback_terminal(self):
        agent = make_agent(
            tool_reply("terminate_and_ask_translator", {"feedback": "need exact y-axis tick values"})
        )
        _, action = agent.propose_action(
            Sir("a bar chart", "mid"), make_task(), ReasonerMemory(), [], 1
        )
        assert action == TerminateFeedback("need exact y-axis tick values")

    def test_tool_call_action(self):
        agent = make_agent(tool_reply("python_execute", {"code": "print(2+3)"}))
        _, action = agent.propose_action(
            Sir("numbers 2 and 3", "mid"), make_task(), ReasonerMemory(), [], 1
        )
        assert action == ToolCall("python_execute", {"code": "print(2+3)"})

    def test_partial_answer_terminal_rejected(self):
        # All three attempts return an incomplete terminate_and_answer payload.
        replies = [
            tool_reply("terminate_and_answer", {"answer": "A"}) for _ in range(3)
        ]
        agent = make_agent(*replies)
        with pytest.raises(ActionParseFailure):
            agent.propose_action(Sir("x", "mid"), make_task(), ReasonerMemory(), [], 1)

    def test_empty_feedback_terminal_rejected(self):
        replies = [tool_reply("terminate_and_ask_translator", {"feedback": ""}) for _ in range(3)]
        agent = make_agent(*replies)
        with pytest.raises(ActionParseFailure):
            agent.propose_action(Sir("x", "mid"), make_task(), ReasonerMemory(), [], 1)

    def test_plain_text_reply_is_parse_failure(self):
        replies = [text_reply("I am just musing with no tool call.") for _ in range(3)]
        agent = make_agent(*replies)
        with pytest.raises(ActionParseFailure):
            agent.propose_action(Sir("x", "mid"), make_task(), ReasonerMemory(), [], 1)

    def test_unparseable_arguments_retry_then_success(self):
        agent = make_agent(
            raw_tool_reply("terminate_and_answer", "{not json"),
            tool_reply(
                "terminate_and_answer",
                {"answer": "B", "confidence": "medium", "reasoning": "r"},
            ),
        )
        _, action = agent.propose_action(Sir("x", "mid"), make_task(), ReasonerMemory(), [], 1)
        assert action == TerminateAnswer("B", "medium", "r")

    def test_messages_are_text_only(self):
        agent = make_agent(
            tool_reply("terminate_and_answer", {"answer": "A", "confidence": "high", "reasoning": "r"})
        )
        agent.propose_action(Sir("x", "mid"), make_task(), ReasonerMemory(), [], 1)
        request = agent.backend.consumed[0][0]
        assert request.agent_role == "reasoner"
        assert not any(
            isinstance(part, ImagePart) for m in request.messages for part in m.parts
        )

    def test_context_includes_sir_question_options_memory(self):
        agent = make_agent(
            tool_reply("terminate_and_answer", {"answer": "A", "confidence": "high", "reasoning": "r"})
        )
        memory = ReasonerMemory()
        memory.add(1, "iter 1: asked for poster details / used tools none")
        agent.propose_action(Sir("a church", "mid"), make_task(), memory, [], 1)
        text = agent.backend.consumed[0][0].text_content()
        assert '"global_caption":"a church"' in text
        assert "What animal is shown in the poster?" in text
        assert "A. dove" in text
        assert "iter 1: asked for poster details" in text
        assert "DECISION CRITERIA - BE CONSERVATIVE" in text

    def test_offers_exactly_the_three_reasoner_tools(self):
        agent = make_agent(
            tool_reply("terminate_and_answer", {"answer": "A", "confidence": "high", "reasoning": "r"})
        )
        agent.propose_action(Sir("x", "mid"), make_task(), ReasonerMemory(), [], 1)
        request = agent.backend.consumed[0][0]
        offered = {spec.name for spec in request.tool_specs}
        assert offered == {"python_execute", "terminate_and_answer", "terminate_and_ask_translator"}


class TestForceAnswer:
    def test_compliant_model(self):
        agent = make_agent(
            tool_reply(
                "terminate_and_answer",
                {"answer": "A", "confidence": "low", "reasoning": "best guess"},
            )
        )
        final, attempts = agent.force_answer(Sir("x", "low"), make_task())
        assert final.normalized == "A"
        assert not final.fallback
        assert attempts == 1

    def test_noncompliant_model_mcq_fallback(self):
        agent = make_agent(*[text_reply("prose, not a tool call") for _ in range(3)])
        final, attempts = agent.force_answer(Sir("x", "low"), make_task())
        assert final.normalized == "A"  # first option label
        assert final.fallback
        assert attempts == 3

    def test_noncompliant_model_open_ended_fallback(self):
        agent = make_agent(*[text_reply("prose") for _ in range(3)])
        final, _ = agent.force_answer(Sir("x", "low"), make_task(options=()))
        assert final.normalized == "UNKNOWN"
        assert final.fallback

    def test_only_answer_tool_offered(self):
        agent = make_agent(
            tool_reply(
                "terminate_and_answer",
                {"answer": "A", "confidence": "low", "reasoning": "r"},
            )
        )
        agent.force_answer(Sir("x", "low"), make_task())
        request = agent.backend.consumed[0][0]
        assert [spec.name for spec in request.tool_specs] == ["terminate_and_answer"]


def test_final_answer_from_terminal_maps_fields():
    final = final_answer_from_terminal(
        TerminateAnswer("the dove", "high", "because"), OPTS
    )
    assert final == FinalAnswer("the dove", "A", "high", "because", False)
