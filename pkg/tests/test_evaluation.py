import json
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from ontorag.evaluation import (
    DatasetError,
    EmptyGold,
    EvalReport,
    GoldPair,
    LengthMismatch,
    RunSpec,
    SweepReport,
    SweepSpec,
    confusion_matrix,
    evaluate_direct,
    evaluate_levels,
    load_direct_dataset,
    load_pair_dataset,
    precision_per_level,
    render_report,
    run_sweep,
    score_direct,
)
from ontorag.llm import ChatMessage, ProviderConfig, fingerprint
from ontorag.reasoning import MappingLevel, render_level_prompt, make_strategy

A, B, C = MappingLevel.A, MappingLevel.B, MappingLevel.C


def mock_config(tmp_path, script: dict, name: str = "script.json") -> ProviderConfig:
    path = tmp_path / name
    path.write_text(json.dumps(script))
    return ProviderConfig(kind="scripted-mock", script_path=str(path), model_id="mock")


def prompt_key(prompt: str) -> str:
    return fingerprint([ChatMessage("user", prompt)])


class TestLoaders:
    def test_direct_dataset(self, fixtures_dir):
        records = load_direct_dataset(str(fixtures_dir / "direct_gold.tsv"))
        assert len(records) == 4
        assert records[0].source_code == "5849"
        assert records[0].gold_targets == frozenset({"N179", "N19"})

    def test_pair_dataset(self, fixtures_dir):
        pairs = load_pair_dataset(str(fixtures_dir / "pair_gold.tsv"))
        assert len(pairs) == 6
        assert pairs[0] == GoldPair("myocardial infarction", "heart attack", A)

    def test_malformed_direct_line(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("5849 N179\n")
        with pytest.raises(DatasetError):
            load_direct_dataset(str(path))

    def test_unknown_level(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("a\tb\tQ\n")
        with pytest.raises(DatasetError):
            load_pair_dataset(str(path))


class TestScoreDirect:
    def test_worked_half_credit_example(self):
        assert score_direct({"A0", "B0"}, {"A0", "C0", "D0"}) == Fraction(1, 2)

    def test_identity(self):
        assert score_direct({"A0"}, {"A0"}) == 1

    def test_empty_prediction(self):
        assert score_direct({"A0", "B0"}, set()) == 0

    def test_empty_gold_rejected(self):
        with pytest.raises(EmptyGold):
            score_direct(set(), {"A0"})

    def test_extra_predictions_cost_nothing(self):
        full = score_direct({"A0", "B0"}, {"A0", "B0"})
        extra = score_direct({"A0", "B0"}, {"A0", "B0", "Z9", "Y8"})
        assert full == extra == 1

    def test_normalization_applied_to_both_sides(self):
        assert score_direct({"N17.9"}, {"n179"}) == 1

    @given(
        st.sets(st.from_regex(r"[A-Z][0-9]{2,4}", fullmatch=True), min_size=1, max_size=6),
        st.sets(st.from_regex(r"[A-Z][0-9]{2,4}", fullmatch=True), max_size=6),
        st.sets(st.from_regex(r"[A-Z][0-9]{2,4}", fullmatch=True), max_size=3),
    )
    def test_bounds_and_monotonicity(self, gold, pred, extra):
        score = score_direct(gold, pred)
        assert 0 <= score <= 1
        assert (score == 1) == gold.issubset(pred)
        assert (score == 0) == (not gold & pred)
        assert score_direct(gold, pred | extra) >= score


class TestPrecisionAndConfusion:
    def test_hand_computed_example(self):
        precision = precision_per_level([A, A, B], [A, B, B])
        assert precision[A] == 50.0
        assert precision[B] == 100.0
        assert precision[C] is None

    def test_all_c_on_one_each(self):
        precision = precision_per_level([C, C, C], [A, B, C])
        assert precision[C] == pytest.approx(100 / 3)

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch):
            precision_per_level([A], [A, B])

    def test_confusion_example(self):
        matrix = confusion_matrix([A, A, B], [A, B, B])
        assert matrix == [[1, 0, 0], [1, 1, 0], [0, 0, 0]]

    def test_empty(self):
        assert confusion_matrix([], []) == [[0, 0, 0], [0, 0, 0], [0, 0, 0]]

    @given(st.lists(st.sampled_from([A, B, C]), max_size=30))
    def test_trace_over_total_is_accuracy(self, golds):
        preds = list(reversed(golds))
        matrix = confusion_matrix(preds, golds)
        total = sum(sum(row) for row in matrix)
        trace = sum(matrix[i][i] for i in range(3))
        assert total == len(golds)
        correct = sum(1 for p, g in zip(preds, golds) if p == g)
        assert trace == correct


class TestEvaluateDirect:
    def _half_hit_config(self, tmp_path, fixtures_dir):
        from importlib import resources

        template = (
            resources.files("ontorag.data.templates")
            .joinpath("direct_map.txt")
            .read_text("utf-8")
        )
        halves = {"5849": "N17.9", "4280": "I50.9", "5990": "N39.0", "2761": "E87.1"}
        keyed = {
            prompt_key(template.format(code=code)): response
            for code, response in halves.items()
        }
        return mock_config(tmp_path, {"keyed": keyed})

    def test_half_hits_score_fifty(self, tmp_path, fixtures_dir):
        dataset = load_direct_dataset(str(fixtures_dir / "direct_gold.tsv"))
        spec = RunSpec(provider=self._half_hit_config(tmp_path, fixtures_dir), repeats=3)
        report = evaluate_direct(dataset, spec)
        assert report.mean_accuracy == pytest.approx(50.0)
        assert report.std_accuracy == pytest.approx(0.0)
        assert report.per_repeat_accuracies == [50.0, 50.0, 50.0]

    def test_full_gold_scores_hundred(self, tmp_path, fixtures_dir):
        dataset = load_direct_dataset(str(fixtures_dir / "direct_gold.tsv"))
        config = mock_config(
            tmp_path, {"keyed": {}, "default": "N17.9 N19 I50.9 I50.20 N39.0 N39.9 E87.1 E87.0"}
        )
        report = evaluate_direct(dataset, RunSpec(provider=config, repeats=2))
        assert report.mean_accuracy == pytest.approx(100.0)

    def test_empty_answers_score_zero(self, tmp_path, fixtures_dir):
        dataset = load_direct_dataset(str(fixtures_dir / "direct_gold.tsv"))
        config = mock_config(tmp_path, {"keyed": {}, "default": "no idea"})
        report = evaluate_direct(dataset, RunSpec(provider=config, repeats=1))
        assert report.mean_accuracy == pytest.approx(0.0)

    def test_provider_errors_are_tallied_as_zero(self, tmp_path, fixtures_dir):
        dataset = load_direct_dataset(str(fixtures_dir / "direct_gold.tsv"))
        # ordered script with a single entry: first record answers, rest error
        config = mock_config(tmp_path, {"ordered": ["N17.9 N19"]})
        report = evaluate_direct(dataset, RunSpec(provider=config, repeats=1))
        assert report.error_count == 3
        assert report.mean_accuracy == pytest.approx(25.0)

    def test_empty_dataset_rejected(self, tmp_path):
        config = mock_config(tmp_path, {"keyed": {}, "default": "x"})
        with pytest.raises(ValueError):
            evaluate_direct([], RunSpec(provider=config))


def _pairs_abc():
    return [
        GoldPair("d1", "e1", A),
        GoldPair("d2", "e2", B),
        GoldPair("d3", "e3", B),
    ]


def keyed_levels(tmp_path, strategy_kind, answers: dict[tuple[str, str], str]):
    strategy = make_strategy(strategy_kind)
    keyed = {
        prompt_key(render_level_prompt(d1, d2, strategy)): letter
        for (d1, d2), letter in answers.items()
    }
    return mock_config(tmp_path, {"keyed": keyed})


class TestEvaluateLevels:
    def test_hand_computed_accuracy_and_precision(self, tmp_path):
        config = keyed_levels(
            tmp_path, "zero-shot",
            {("d1", "e1"): "A", ("d2", "e2"): "A", ("d3", "e3"): "B"},
        )
        spec = RunSpec(provider=config, strategy="zero-shot", repeats=1)
        report = evaluate_levels(_pairs_abc(), spec)
        assert report.per_repeat_accuracies[0] == pytest.approx(100 * 2 / 3)
        assert report.per_level_precision == {"A": 50.0, "B": 100.0, "C": None}
        assert report.confusion_pooled == [[1, 0, 0], [1, 1, 0], [0, 0, 0]]

    def test_perfect_predictions(self, tmp_path):
        config = keyed_levels(
            tmp_path, "zero-shot",
            {("d1", "e1"): "A", ("d2", "e2"): "B", ("d3", "e3"): "B"},
        )
        report = evaluate_levels(
            _pairs_abc(), RunSpec(provider=config, strategy="zero-shot", repeats=2)
        )
        assert report.mean_accuracy == pytest.approx(100.0)
        assert report.confusion_pooled[0][0] == 2  # A gold, both repeats
        assert report.confusion_pooled[1][1] == 4

    def test_all_c_predictor(self, tmp_path):
        golds = [GoldPair("x1", "y1", A), GoldPair("x2", "y2", B), GoldPair("x3", "y3", C)]
        config = mock_config(tmp_path, {"keyed": {}, "default": "C"})
        report = evaluate_levels(
            golds, RunSpec(provider=config, strategy="zero-shot", repeats=1)
        )
        assert report.mean_accuracy == pytest.approx(100 / 3)
        assert report.per_level_precision["C"] == pytest.approx(100 / 3)
        assert report.per_level_precision["A"] is None

    def test_deterministic_mock_zero_std(self, tmp_path):
        config = mock_config(tmp_path, {"keyed": {}, "default": "B"})
        report = evaluate_levels(
            _pairs_abc(), RunSpec(provider=config, strategy="few-shot", repeats=3)
        )
        assert report.std_accuracy == pytest.approx(0.0)
        assert len(report.confusion_per_repeat) == 3
        assert all(m == report.confusion_per_repeat[0] for m in report.confusion_per_repeat)

    def test_confusion_rows_sum_to_gold_counts(self, tmp_path):
        config = mock_config(tmp_path, {"keyed": {}, "default": "A"})
        dataset = _pairs_abc()
        report = evaluate_levels(
            dataset, RunSpec(provider=config, strategy="zero-shot", repeats=2)
        )
        gold_counts = [

            sum(1 for p in dataset if p.gold_level == level) * 2
            for level in (A, B, C)
        ]
        assert [sum(row) for row in report.confusion_pooled] == gold_counts

    def test_invalid_predictions_tallied(self, tmp_path):
        # ordered: pair1 A + pair2 unparseable (2 calls incl. re-prompt) + pair3 B
        config = mock_config(tmp_path, {"ordered": ["A", "??", "??", "B"]})
        report = evaluate_levels(
            _pairs_abc(), RunSpec(provider=config, strategy="zero-shot", repeats=1)
        )
        assert report.invalid_count == 1
        assert report.per_repeat_accuracies[0] == pytest.approx(100 * 2 / 3)
        assert sum(sum(r) for r in report.confusion_pooled) == 2

    def test_gold_distribution_in_metadata(self, tmp_path):
        config = mock_config(tmp_path, {"keyed": {}, "default": "A"})
        report = evaluate_levels(
            _pairs_abc(), RunSpec(provider=config, strategy="zero-shot", repeats=1)
        )
        assert report.metadata["gold_level_distribution"] == {"A": 1, "B": 2, "C": 0}


class TestSweepAndRendering:
    def _tiny_sweep(self, tmp_path) -> SweepReport:
        config = mock_config(tmp_path, {"keyed": {}, "default": "B"})
        sweep = SweepSpec(strategies=["zero-shot", "few-shot"],
                          temperatures=[0.2, 1.0], repeats=2)
        return run_sweep(_pairs_abc(), config, sweep)

    def test_grid_has_one_cell_per_combination(self, tmp_path):
        report = self._tiny_sweep(tmp_path)
        assert len(report.cells) == 4
        markdown = render_report(report, "markdown")
        assert markdown.count("±") == 4
        assert "| zero-shot |" in markdown and "| few-shot |" in markdown
        assert "T=0.2" in markdown and "T=1.0" in markdown

    def test_default_grid_is_four_by_three(self):
        sweep = SweepSpec()
        assert len(sweep.strategies) == 4
        assert sweep.temperatures == [0.2, 0.6, 1.0]

    def test_sweep_spec_from_file(self, tmp_path):
        path = tmp_path / "sweep.json"
        path.write_text(json.dumps({"strategies": ["cot"], "temperatures": [0.6], "repeats": 1}))
        sweep = SweepSpec.from_json_file(str(path))
        assert sweep.strategies == ["cot"]

    def test_json_round_trip(self, tmp_path):
        config = keyed_levels(
            tmp_path, "zero-shot",
            {("d1", "e1"): "A", ("d2", "e2"): "A", ("d3", "e3"): "B"},
        )
        report = evaluate_levels(
            _pairs_abc(), RunSpec(provider=config, strategy="zero-shot", repeats=1)
        )
        rendered = render_report(report, "json")
        restored = EvalReport.from_json(json.loads(rendered))
        assert restored == report  # metadata excluded from comparison

    def test_csv_one_row_per_strategy_temperature_repeat(self, tmp_path):
        report = self._tiny_sweep(tmp_path)
        csv_text = render_report(report, "csv")
        lines = [l for l in csv_text.splitlines() if l]
        assert lines[0] == "strategy,temperature,repeat,accuracy"
        assert len(lines) - 1 == 2 * 2 * 2

    def test_markdown_single_report_has_precision_and_matrix(self, tmp_path):
        config = mock_config(tmp_path, {"keyed": {}, "default": "B"})
        report = evaluate_levels(
            _pairs_abc(), RunSpec(provider=config, strategy="zero-shot", repeats=1)
        )
        markdown = render_report(report, "markdown")
        assert "precision: A: n/a" in markdown
        assert "| gold\\pred | A | B | C |" in markdown

    def test_undefined_precision_renders_na_not_zero(self, tmp_path):
        config = mock_config(tmp_path, {"keyed": {}, "default": "B"})
        report = evaluate_levels(
            _pairs_abc(), RunSpec(provider=config, strategy="zero-shot", repeats=1)
        )
        markdown = render_report(report, "markdown")
        assert "A: n/a" in markdown and "C: n/a" in markdown
        assert json.loads(render_report(report, "json"))["per_level_precision"]["A"] is None

    def test_repeats_validation(self, tmp_path):
        config = mock_config(tmp_path, {"keyed": {}, "default": "B"})
        with pytest.raises(ValueError):
            RunSpec(provider=config, repeats=0)
