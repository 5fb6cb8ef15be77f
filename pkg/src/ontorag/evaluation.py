"""Gold datasets, metric functions, and repeat/sweep runners.

Accuracy is kept as exact rationals until rendered as a percentage. The
spread over repeats is the population standard deviation, recorded in the
report metadata so consumers know which convention was used.
"""

from __future__ import annotations

import datetime as _dt
import json
import statistics
from dataclasses import dataclass, field
from fractions import Fraction

from ontorag.codes import normalize_code
from ontorag.errors import IoError, OntoragError
from ontorag.llm import GatewayError, ProviderConfig, make_provider
from ontorag.reasoning import (
    MappingLevel,
    UnparseableLevel,
    direct_map,
    make_strategy,
    predict_level,
)

LEVELS = [MappingLevel.A, MappingLevel.B, MappingLevel.C]
DEFAULT_TEMPERATURES = [0.2, 0.6, 1.0]
DEFAULT_STRATEGIES = ["zero-shot", "few-shot", "enhanced-few-shot", "cot"]


class DatasetError(OntoragError):
    def __init__(self, path: str, line_no: int, detail: str):
        self.path = path
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {detail}")


class EmptyGold(OntoragError):
    def __init__(self):
        super().__init__("gold target set must not be empty")


class LengthMismatch(OntoragError):
    def __init__(self, got: int, expected: int):
        super().__init__(f"prediction count {got} does not match gold count {expected}")


@dataclass(frozen=True)
class GoldMapping:
    source_code: str
    gold_targets: frozenset[str]


@dataclass(frozen=True)
class GoldPair:
    desc1: str
    desc2: str
    gold_level: MappingLevel


def load_direct_dataset(path: str) -> list[GoldMapping]:
    """Lines of ``SOURCE<TAB>TARGET|TARGET|...``, codes in any dotting."""
    records = []
    for line_no, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DatasetError(path, line_no, "expected SOURCE<TAB>TARGETS")
        source = normalize_code(parts[0])
        targets = frozenset(
            normalize_code(t) for t in parts[1].split("|") if t.strip()
        )
        if not source or not targets:
            raise DatasetError(path, line_no, "empty source or target set")
        records.append(GoldMapping(source, targets))
    return records


def load_pair_dataset(path: str) -> list[GoldPair]:
    """Lines of ``DESC1<TAB>DESC2<TAB>LEVEL``."""
    pairs = []
    for line_no, line in enumerate(_read_lines(path), start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DatasetError(path, line_no, "expected DESC1<TAB>DESC2<TAB>LEVEL")
        desc1, desc2, level = (p.strip() for p in parts)
        if not desc1 or not desc2:
            raise DatasetError(path, line_no, "empty description")
        try:
            pairs.append(GoldPair(desc1, desc2, MappingLevel(level.upper())))
        except ValueError:
            raise DatasetError(path, line_no, f"unknown level {level!r}") from None
    return pairs


def _read_lines(path: str) -> list[str]:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read().splitlines()
    except OSError as exc:
        raise IoError(path, str(exc)) from exc


# -- metric functions ---------------------------------------------------------


def score_direct(gold_targets, predicted) -> Fraction:
    """Fraction of gold codes present among the predictions; extra
    predictions cost nothing."""
    gold = {normalize_code(c) for c in gold_targets}
    if not gold:
        raise EmptyGold()
    pred = {normalize_code(c) for c in predicted}
    return Fraction(len(gold & pred), len(gold))


def precision_per_level(preds, golds) -> dict[MappingLevel, float | None]:
    """Per-level precision as percentages; None when a level is never
    predicted."""
    if len(preds) != len(golds):
        raise LengthMismatch(len(preds), len(golds))
    out: dict[MappingLevel, float | None] = {}
    for level in LEVELS:
        predicted_n = sum(1 for p in preds if p == level)
        if predicted_n == 0:
            out[level] = None
            continue
        correct = sum(1 for p, g in zip(preds, golds) if p == level and g == level)
        out[level] = float(Fraction(correct, predicted_n) * 100)
    return out


def confusion_matrix(preds, golds) -> list[list[int]]:
    """3x3 counts; rows are gold levels, columns predicted, both in A,B,C
    order."""
    if len(preds) != len(golds):
        raise LengthMismatch(len(preds), len(golds))
    index = {level: i for i, level in enumerate(LEVELS)}
    matrix = [[0, 0, 0] for _ in LEVELS]
    for pred, gold in zip(preds, golds):
        matrix[index[gold]][index[pred]] += 1
    return matrix


# -- run specs and reports ------------------------------------------------------


@dataclass
class RunSpec:
    provider: ProviderConfig
    strategy: str = "zero-shot"
    temperature: float = 0.2
    repeats: int = 3
    dataset: str = ""
    bank_path: str | None = None

    def __post_init__(self):
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")


@dataclass
class EvalReport:
    mode: str  # "direct" | "levels"
    strategy: str
    temperature: float
    repeats: int
    dataset_size: int
    per_repeat_accuracies: list[float]
    mean_accuracy: float
    std_accuracy: float
    per_level_precision: dict[str, float | None] = field(default_factory=dict)
    confusion_pooled: list[list[int]] = field(default_factory=list)
    confusion_per_repeat: list[list[list[int]]] = field(default_factory=list)
    invalid_count: int = 0
    error_count: int = 0
    metadata: dict = field(default_factory=dict, compare=False)

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "strategy": self.strategy,
            "temperature": self.temperature,
            "repeats": self.repeats,
            "dataset_size": self.dataset_size,
            "per_repeat_accuracies": list(self.per_repeat_accuracies),
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "per_level_precision": dict(self.per_level_precision),
            "confusion_pooled": [list(r) for r in self.confusion_pooled],
            "confusion_per_repeat": [
                [list(r) for r in m] for m in self.confusion_per_repeat
            ],
            "invalid_count": self.invalid_count,
            "error_count": self.error_count,
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_json(cls, data: dict) -> "EvalReport":
        return cls(**data)


def _base_metadata(spec: RunSpec) -> dict:
    return {
        "model_id": spec.provider.model_id,
        "std_method": "population",
        "created_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
    }


def _mean_std(values: list[Fraction]) -> tuple[float, float]:
    percents = [float(v * 100) for v in values]
    mean = statistics.fmean(percents)
    std = statistics.pstdev(percents)
    return mean, std


def evaluate_direct(dataset: list[GoldMapping], spec: RunSpec) -> EvalReport:
    """Macro accuracy over records, repeated; errored records score zero and
    are tallied."""
    if not dataset:
        raise ValueError("dataset must not be empty")
    per_repeat: list[Fraction] = []
    error_count = 0
    for _ in range(spec.repeats):
        provider = make_provider(spec.provider)
        scores: list[Fraction] = []
        for record in dataset:
            try:
                predicted = direct_map(
                    record.source_code,
                    provider,
                    temperature=spec.temperature,
                    model_id=spec.provider.model_id,
                )
                scores.append(score_direct(record.gold_targets, predicted))
            except GatewayError:
                error_count += 1
                scores.append(Fraction(0))
        per_repeat.append(sum(scores, Fraction(0)) / len(scores))
    mean, std = _mean_std(per_repeat)
    return EvalReport(
        mode="direct",
        strategy="zero-shot",
        temperature=spec.temperature,
        repeats=spec.repeats,
        dataset_size=len(dataset),
        per_repeat_accuracies=[float(v * 100) for v in per_repeat],
        mean_accuracy=mean,
        std_accuracy=std,
        error_count=error_count,
        metadata=_base_metadata(spec),
    )


def evaluate_levels(dataset: list[GoldPair], spec: RunSpec) -> EvalReport:
    """Level-prediction accuracy with pooled and per-repeat confusion counts.

    Unparseable or failed predictions count against accuracy, are excluded
    from precision denominators and the confusion matrices, and are tallied.
    """
    if not dataset:
        raise ValueError("dataset must not be empty")
    strategy = make_strategy(spec.strategy, spec.temperature, spec.bank_path)
    per_repeat: list[Fraction] = []
    per_repeat_conf: list[list[list[int]]] = []
    pooled_preds: list[MappingLevel] = []
    pooled_golds: list[MappingLevel] = []
    invalid_count = 0
    errors: list[str] = []
    for _ in range(spec.repeats):
        provider = make_provider(spec.provider)
        repeat_preds: list[MappingLevel] = []
        repeat_golds: list[MappingLevel] = []
        correct = 0
        for pair in dataset:
            try:
                level = predict_level(
                    pair.desc1, pair.desc2, strategy, provider, spec.provider.model_id
                )
            except (UnparseableLevel, GatewayError) as exc:
                invalid_count += 1
                errors.append(str(exc))
                continue
            repeat_preds.append(level)
            repeat_golds.append(pair.gold_level)
            if level == pair.gold_level:
                correct += 1
        per_repeat.append(Fraction(correct, len(dataset)))
        per_repeat_conf.append(confusion_matrix(repeat_preds, repeat_golds))
        pooled_preds.extend(repeat_preds)
        pooled_golds.extend(repeat_golds)
    mean, std = _mean_std(per_repeat)
    precision = precision_per_level(pooled_preds, pooled_golds)
    gold_distribution = {
        level.value: sum(1 for p in dataset if p.gold_level == level)
        for level in LEVELS
    }
    metadata = _base_metadata(spec)
    metadata["gold_level_distribution"] = gold_distribution
    if errors:
        metadata["errors"] = errors[:20]
    return EvalReport(
        mode="levels",
        strategy=spec.strategy,
        temperature=spec.temperature,
        repeats=spec.repeats,
        dataset_size=len(dataset),
        per_repeat_accuracies=[float(v * 100) for v in per_repeat],
        mean_accuracy=mean,
        std_accuracy=std,
        per_level_precision={k.value: v for k, v in precision.items()},
        confusion_pooled=confusion_matrix(pooled_preds, pooled_golds),
        confusion_per_repeat=per_repeat_conf,
        invalid_count=invalid_count,
        metadata=metadata,
    )


# -- sweeps --------------------------------------------------------------------


@dataclass
class SweepSpec:
    strategies: list[str] = field(default_factory=lambda: list(DEFAULT_STRATEGIES))
    temperatures: list[float] = field(default_factory=lambda: list(DEFAULT_TEMPERATURES))
    repeats: int = 3

    @classmethod
    def from_json_file(cls, path: str) -> "SweepSpec":
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise IoError(path, str(exc)) from exc
        return cls(
            strategies=data.get("strategies", list(DEFAULT_STRATEGIES)),
            temperatures=data.get("temperatures", list(DEFAULT_TEMPERATURES)),
            repeats=data.get("repeats", 3),
        )


@dataclass
class SweepReport:
    mode: str
    cells: list[EvalReport] = field(default_factory=list)

    def cell(self, strategy: str, temperature: float) -> EvalReport | None:
        for report in self.cells:
            if report.strategy == strategy and report.temperature == temperature:
                return report
        return None

    def to_json(self) -> dict:
        return {"mode": self.mode, "cells": [c.to_json() for c in self.cells]}


def run_sweep(
    dataset: list[GoldPair],
    provider: ProviderConfig,
    sweep: SweepSpec,
    bank_path: str | None = None,
) -> SweepReport:
    out = SweepReport(mode="levels")
    for strategy in sweep.strategies:
        for temperature in sweep.temperatures:
            spec = RunSpec(
                provider=provider,
                strategy=strategy,
                temperature=temperature,
                repeats=sweep.repeats,
                bank_path=bank_path,
            )
            out.cells.append(evaluate_levels(dataset, spec))
    return out


# -- rendering -------------------------------------------------------------------


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def _fmt_precision(value: float | None) -> str:
    return "n/a" if value is None else _fmt(value)


def render_report(report: EvalReport | SweepReport, format: str = "json") -> str:
    if format == "json":
        return json.dumps(report.to_json(), indent=2)
    if format == "csv":
        return _render_csv(report)
    if format == "markdown":
        return _render_markdown(report)
    raise ValueError(f"unknown report format {format!r}")


def _iter_cells(report: EvalReport | SweepReport) -> list[EvalReport]:
    return report.cells if isinstance(report, SweepReport) else [report]


def _render_csv(report: EvalReport | SweepReport) -> str:
    lines = ["strategy,temperature,repeat,accuracy"]
    for cell in _iter_cells(report):
        for i, acc in enumerate(cell.per_repeat_accuracies, start=1):
            lines.append(f"{cell.strategy},{cell.temperature},{i},{_fmt(acc)}")
    return "\n".join(lines) + "\n"


def _render_markdown(report: EvalReport | SweepReport) -> str:
    if isinstance(report, SweepReport):
        return _render_markdown_grid(report)
    cell = report
    lines = [
        f"## {cell.mode} evaluation",
        "",
        f"- strategy: {cell.strategy}",
        f"- temperature: {cell.temperature}",
        f"- repeats: {cell.repeats}",
        f"- dataset size: {cell.dataset_size}",
        f"- accuracy: {_fmt(cell.mean_accuracy)}±{_fmt(cell.std_accuracy)}",
    ]
    if cell.per_level_precision:
        parts = ", ".join(
            f"{level}: {_fmt_precision(cell.per_level_precision.get(level))}"
            for level in ("A", "B", "C")
        )
        lines.append(f"- precision: {parts}")
    if cell.confusion_pooled:
        lines.append("")
        lines.append("| gold\\pred | A | B | C |")
        lines.append("|---|---|---|---|")
        for level, row in zip(("A", "B", "C"), cell.confusion_pooled):
            lines.append(f"| {level} | " + " | ".join(str(n) for n in row) + " |")
    return "\n".join(lines) + "\n"


def _render_markdown_grid(report: SweepReport) -> str:
    strategies: list[str] = []
    temperatures: list[float] = []
    for cell in report.cells:
        if cell.strategy not in strategies:
            strategies.append(cell.strategy)
        if cell.temperature not in temperatures:
            temperatures.append(cell.temperature)
    header = "| strategy | " + " | ".join(f"T={t}" for t in temperatures) + " |"
    sep = "|---" * (len(temperatures) + 1) + "|"
    lines = [header, sep]
    for strategy in strategies:
        row = [strategy]
        for temperature in temperatures:
            cell = report.cell(strategy, temperature)
            row.append(
                f"{_fmt(cell.mean_accuracy)}±{_fmt(cell.std_accuracy)}" if cell else "n/a"
            )
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines) + "\n"
