import pytest
from hypothesis import given, strategies as st

from ontorag.llm import fingerprint
from ontorag.reasoning import (
    EmptyReasoning,
    LEVEL_DEFINITIONS,
    LabeledCode,
    MappingLevel,
    StrategyConfig,
    UnparseableLevel,
    assess_pairs,
    direct_map,
    explain,
    load_bank,
    make_strategy,
    parse_level,
    predict_level,
    render_level_prompt,
    summarize,
)

from conftest import ordered_mock

RUBRIC_PAIRS = [
    ("acute renal failure", "acute kidney failure"),   # consistent
    ("renal failure", "acute kidney failure"),         # related, uncertain
    ("acute renal failure", "chronic kidney disease"), # partial conflict
]


class TestBanks:
    def test_few_shot_bank_has_sixteen(self):
        bank = load_bank(kind="few-shot")
        assert len(bank.entries) == 16

    def test_enhanced_bank_has_twenty_one(self):
        bank = load_bank(kind="enhanced-few-shot")
        assert len(bank.entries) == 21

    def test_enhanced_is_few_shot_plus_five_b(self):
        few = load_bank(kind="few-shot")
        enhanced = load_bank(kind="enhanced-few-shot")
        assert enhanced.entries[:16] == few.entries
        extras = enhanced.entries[16:]
        assert len(extras) == 5
        assert all(e.level == MappingLevel.B for e in extras)

    def test_level_distribution_recorded(self):
        bank = load_bank(kind="enhanced-few-shot")
        dist = bank.level_distribution()
        assert sum(dist.values()) == 21
        assert dist["B"] >= 5

    def test_wrong_size_rejected(self, tmp_path):
        path = tmp_path / "bank.json"
        path.write_text('{"kind": "few-shot", "entries": []}')
        with pytest.raises(ValueError):
            load_bank(str(path), kind="few-shot")


class TestStrategyConfig:
    def test_zero_shot_has_no_examples(self):
        strategy = make_strategy("zero-shot")
        assert strategy.example_bank is None

    def test_few_shot_needs_sixteen(self):
        bank = load_bank(kind="enhanced-few-shot")
        with pytest.raises(ValueError):
            StrategyConfig("few-shot", bank)

    def test_cot_uses_enhanced_bank(self):
        strategy = make_strategy("cot")
        assert len(strategy.example_bank.entries) == 21

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            StrategyConfig("many-shot")


class TestPromptRendering:
    def test_rubric_definitions_verbatim(self):
        prompt = render_level_prompt("a", "b", make_strategy("zero-shot"))
        for definition in LEVEL_DEFINITIONS.values():
            assert definition in prompt

    def test_zero_shot_has_no_example_blocks(self):
        prompt = render_level_prompt("a", "b", make_strategy("zero-shot"))
        assert "Example 1:" not in prompt

    def test_few_shot_renders_sixteen_blocks(self):
        prompt = render_level_prompt("a", "b", make_strategy("few-shot"))
        assert prompt.count("Example ") == 16

    def test_enhanced_renders_twenty_one_blocks_with_five_extra_b(self):
        prompt = render_level_prompt("a", "b", make_strategy("enhanced-few-shot"))
        assert prompt.count("Example ") == 21
        assert prompt.count("Level: B") >= 5 + 5  # bank Bs plus the extras

    def test_cot_reasoning_instruction_precedes_answer_instruction(self):
        prompt = render_level_prompt("a", "b", make_strategy("cot"))
        reason_at = prompt.index("Reason step by step")
        answer_at = prompt.index("end your answer with the chosen letter")
        assert reason_at < answer_at

    def test_cot_examples_include_rationales(self):
        prompt = render_level_prompt("a", "b", make_strategy("cot"))
        assert prompt.count("Reasoning:") >= 16

    def test_pair_is_rendered(self):
        prompt = render_level_prompt("renal failure", "acute kidney failure",
                                     make_strategy("zero-shot"))
        assert "Original description: renal failure" in prompt
        assert "Mapped description: acute kidney failure" in prompt


class TestParseLevel:
    def test_first_token_wins(self):
        assert parse_level("B, although A is close") == MappingLevel.B

    def test_cot_takes_last_token(self):
        text = "A matches partly... but B fits better. Final: C"
        assert parse_level(text, cot=True) == MappingLevel.C

    def test_case_insensitive(self):
        assert parse_level("the answer is b") == MappingLevel.B

    def test_no_token(self):
        assert parse_level("no letters here") is None

    @given(st.text(alphabet="xyz .,", max_size=30),
           st.sampled_from(["A", "B", "C"]),
           st.text(alphabet="xyz .,", max_size=30))
    def test_totality_with_one_standalone_token(self, before, letter, after):
        text = f"{before} {letter} {after}"
        assert parse_level(text) == MappingLevel(letter)


class TestPredictLevel:
    @pytest.mark.parametrize("pair,letter,expected", [
        (RUBRIC_PAIRS[0], "A", MappingLevel.A),
        (RUBRIC_PAIRS[1], "B", MappingLevel.B),
        (RUBRIC_PAIRS[2], "C", MappingLevel.C),
    ])
    def test_rubric_pairs_with_scripted_grader(self, pair, letter, expected):
        mock = ordered_mock([letter])
        assert predict_level(pair[0], pair[1], make_strategy("zero-shot"), mock) == expected

    def test_reprompt_recovers(self):
        mock = ordered_mock(["hmm, tricky", "B"])
        level = predict_level("a", "b", make_strategy("zero-shot"), mock)
        assert level == MappingLevel.B
        assert len(mock.transcript) == 2
        retry = mock.transcript[1][0]
        assert retry.messages[-1].content == "Answer with a single letter: A, B, or C."

    def test_unparseable_after_reprompt(self):
        mock = ordered_mock(["nope", "still nothing"])
        with pytest.raises(UnparseableLevel):
            predict_level("a", "b", make_strategy("zero-shot"), mock)

    def test_empty_description_rejected(self):
        with pytest.raises(ValueError):
            predict_level("", "b", make_strategy("zero-shot"), ordered_mock(["A"]))

    def test_cot_parses_trailing_letter(self):
        mock = ordered_mock(["Both say kidney. A seems too strong.\nB"])
        level = predict_level("a", "b", make_strategy("cot"), mock)
        assert level == MappingLevel.B


class TestExplain:
    def test_scripted_reasoning(self):
        mock = ordered_mock(["Both denote identical pathology."])
        text = explain("a", "b", MappingLevel.A, mock)
        assert text == "Both denote identical pathology."

    def test_retry_on_empty(self):
        mock = ordered_mock(["", "They conflict on chronicity."])
        text = explain("a", "b", MappingLevel.C, mock)
        assert text == "They conflict on chronicity."

    def test_empty_twice(self):
        mock = ordered_mock(["", "  "])
        with pytest.raises(EmptyReasoning):
            explain("a", "b", MappingLevel.C, mock)

    def test_prompt_carries_level_and_definition(self):
        mock = ordered_mock(["fine"])
        explain("a", "b", MappingLevel.B, mock)
        prompt = mock.transcript[0][0].messages[0].content
        assert "level B" in prompt
        assert LEVEL_DEFINITIONS[MappingLevel.B] in prompt


class TestAssessPairs:
    def _pairs(self):
        return [
            (LabeledCode(q), LabeledCode(r)) for q, r in RUBRIC_PAIRS
        ]

    def test_three_rubric_pairs(self):
        mock = ordered_mock(["A", "r1", "B", "r2", "C", "r3"])
        assessments, failures = assess_pairs(self._pairs(), make_strategy("zero-shot"), mock)
        assert failures == []
        assert [a.level for a in assessments] == [
            MappingLevel.A, MappingLevel.B, MappingLevel.C
        ]
        assert [a.reasoning for a in assessments] == ["r1", "r2", "r3"]

    def test_empty_pairs_rejected(self):
        with pytest.raises(ValueError):
            assess_pairs([], make_strategy("zero-shot"), ordered_mock([]))

    def test_partial_failure_collected(self):
        mock = ordered_mock(["A", "r1", "??", "??", "C", "r3"])
        assessments, failures = assess_pairs(self._pairs(), make_strategy("zero-shot"), mock)
        assert len(assessments) == 2
        assert len(failures) == 1
        assert failures[0].index == 1

    def test_provenance_fields(self):
        strategy = make_strategy("few-shot", temperature=0.6)
        mock = ordered_mock(["A", "why"])
        assessments, _ = assess_pairs(
            [(LabeledCode("x", "5849"), LabeledCode("y", "N179"))], strategy, mock,
            model_id="m9",
        )
        a = assessments[0]
        assert (a.strategy, a.temperature, a.model_id) == ("few-shot", 0.6, "m9")
        assert (a.queried_code, a.retrieved_code) == ("5849", "N179")


class TestSummarize:
    def _assessment(self, level=MappingLevel.A, reasoning="same thing"):
        return assess_pairs(
            [(LabeledCode("acute renal failure", "5849"),
              LabeledCode("acute kidney failure", "N179"))],
            make_strategy("zero-shot"),
            ordered_mock([level.value, reasoning]),
        )[0][0]

    def test_scripted_summary(self):
        mock = ordered_mock(["All pairs map cleanly."])
        text = summarize("what maps to 584.9?", [self._assessment()], mock)
        assert text == "All pairs map cleanly."

    def test_prompt_lists_each_pair_once(self):
        mock = ordered_mock(["s"])
        summarize("q", [self._assessment()], mock)
        prompt = mock.transcript[0][0].messages[0].content
        assert prompt.count("- Queried:") == 1
        assert "Level: A" in prompt
        assert "same thing" in prompt

    def test_fingerprint_changes_with_level(self):
        prompts = []
        for level in (MappingLevel.A, MappingLevel.C):
            mock = ordered_mock(["s"])
            summarize("q", [self._assessment(level=level)], mock)
            prompts.append(mock.transcript[0][0])
        assert fingerprint(prompts[0].messages) != fingerprint(prompts[1].messages)

    def test_empty_assessments_rejected(self):
        with pytest.raises(ValueError):
            summarize("q", [], ordered_mock([]))


class TestDirectMap:
    def test_single_code(self):
        assert direct_map("584.9", ordered_mock(["The code is N17.9."])) == ["N179"]

    def test_multiple_codes(self):
        mock = ordered_mock(["Codes: N17.9, N18.9, and maybe N19"])
        assert direct_map("584.9", mock) == ["N179", "N189", "N19"]

    def test_no_codes(self):
        assert direct_map("584.9", ordered_mock(["I am not sure."])) == []

    def test_undotted_tokens_accepted(self):
        assert direct_map("584.9", ordered_mock(["N179 or N17.9"])) == ["N179"]

    def test_deduplication_preserves_order(self):
        mock = ordered_mock(["N18.9 then N17.9 then N18.9 again"])
        assert direct_map("x", mock) == ["N189", "N179"]

    def test_prompt_contains_task_and_code(self):
        mock = ordered_mock(["N17.9"])
        direct_map("584.9", mock)
        prompt = mock.transcript[0][0].messages[0].content
        assert prompt.startswith("Task Summary: You are a clinical coder")
        assert "based on the 2018 version" in prompt
        assert "ICD9CM code: 584.9" in prompt

    def test_empty_code_rejected(self):
        with pytest.raises(ValueError):
            direct_map("", ordered_mock(["x"]))

    def test_lowercase_tokens_ignored(self):
        assert direct_map("x", ordered_mock(["n17.9 is lowercase"])) == []
