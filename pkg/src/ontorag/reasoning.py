"""Mapping proximity grading for code pairs.

Grading runs in two calls: predict a level letter for the pair, then ask for
free-text reasoning given that level, so the prediction never depends on the
reasoning. A final call summarizes a whole retrieval session. The module also
carries the direct-mapping prompt used to probe a model without any graph
context.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources

from ontorag.codes import normalize_code
from ontorag.errors import IoError, OntoragError
from ontorag.llm import ChatMessage, ChatRequest, user_request

FEW_SHOT_SIZE = 16
ENHANCED_SIZE = 21

STRATEGY_KINDS = ("zero-shot", "few-shot", "enhanced-few-shot", "cot")


class MappingLevel(str, Enum):
    A = "A"
    B = "B"
    C = "C"


LEVEL_DEFINITIONS = {
    MappingLevel.A: (
        "The content or the semantics of the original label and the mapped "
        "label are completely consistent."
    ),
    MappingLevel.B: (
        "Parts of the original and the mapped labels are related, but it is "
        "not certain whether they match or conflict."
    ),
    MappingLevel.C: (
        "The original and the mapped labels partially conflict with each other."
    ),
}

_LEVEL_TOKEN_RE = re.compile(r"\b([ABCabc])\b")

# letter, two digits, then optionally a dot and/or up to four alphanumerics;
# accepts both dotted and undotted renderings of the same code
_ICD10_TOKEN_RE = re.compile(r"\b[A-Z][0-9]{2}(?:\.?[A-Za-z0-9]{1,4})?\b")


class UnparseableLevel(OntoragError):
    def __init__(self, raw: str):
        self.raw = raw
        super().__init__(f"no level letter in response: {raw[:80]!r}")


class EmptyReasoning(OntoragError):
    def __init__(self):
        super().__init__("reasoning response was empty twice")


@dataclass
class BankEntry:
    desc1: str
    desc2: str
    level: MappingLevel
    rationale: str | None = None


@dataclass
class ExampleBank:
    kind: str
    entries: list[BankEntry] = field(default_factory=list)

    def level_distribution(self) -> dict[str, int]:
        counts = {level.value: 0 for level in MappingLevel}
        for entry in self.entries:
            counts[entry.level.value] += 1
        return counts


def _read_bank(name: str) -> dict:
    text = (
        resources.files("ontorag.data.banks").joinpath(name).read_text(encoding="utf-8")
    )
    return json.loads(text)


def load_bank(path: str | None = None, kind: str = "few-shot") -> ExampleBank:
    """Load an example bank from a JSON file (packaged defaults when path is
    None) and enforce the size its kind demands."""
    if path is None:
        data = _read_bank(
            "level_examples_16.json" if kind == "few-shot" else "level_examples_21.json"
        )
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                data = json.load(fh)
        except OSError as exc:
            raise IoError(path, str(exc)) from exc
    bank = ExampleBank(
        kind=data.get("kind", kind),
        entries=[
            BankEntry(
                e["desc1"], e["desc2"], MappingLevel(e["level"]), e.get("rationale")
            )
            for e in data.get("entries", [])
        ],
    )
    expected = FEW_SHOT_SIZE if kind == "few-shot" else ENHANCED_SIZE
    if kind != "zero-shot" and len(bank.entries) != expected:
        raise ValueError(
            f"{kind} bank must have exactly {expected} entries, got {len(bank.entries)}"
        )
    return bank


@dataclass
class StrategyConfig:
    kind: str
    example_bank: ExampleBank | None = None
    temperature: float = 0.2

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.kind == "zero-shot":
            self.example_bank = None
            return
        expected = FEW_SHOT_SIZE if self.kind == "few-shot" else ENHANCED_SIZE
        if self.example_bank is None or len(self.example_bank.entries) != expected:
            got = len(self.example_bank.entries) if self.example_bank else 0
            raise ValueError(f"{self.kind} needs exactly {expected} examples, got {got}")


def make_strategy(kind: str, temperature: float = 0.2, bank_path: str | None = None) -> StrategyConfig:
    """Build a strategy with the right packaged bank for its kind."""
    if kind == "zero-shot":
        return StrategyConfig(kind, None, temperature)
    bank_kind = "few-shot" if kind == "few-shot" else "enhanced-few-shot"
    return StrategyConfig(kind, load_bank(bank_path, bank_kind), temperature)


@dataclass
class LabeledCode:
    label: str
    code: str | None = None


@dataclass
class Assessment:
    queried_label: str
    retrieved_label: str
    queried_code: str | None
    retrieved_code: str | None
    level: MappingLevel
    reasoning: str
    model_id: str
    strategy: str
    temperature: float

    def to_json(self) -> dict:
        return {
            "queried_label": self.queried_label,
            "retrieved_label": self.retrieved_label,
            "queried_code": self.queried_code,
            "retrieved_code": self.retrieved_code,
            "level": self.level.value,
            "reasoning": self.reasoning,
            "model_id": self.model_id,
            "strategy": self.strategy,
            "temperature": self.temperature,
        }


@dataclass
class AssessmentFailure:
    index: int
    queried_label: str
    retrieved_label: str
    error: str


def _template(name: str) -> str:
    return (
        resources.files("ontorag.data.templates").joinpath(name).read_text("utf-8")
    )


def _render_examples(strategy: StrategyConfig) -> str:
    if strategy.example_bank is None:
        return ""
    blocks = []
    with_rationale = strategy.kind == "cot"
    for i, entry in enumerate(strategy.example_bank.entries, start=1):
        lines = [
            f"Example {i}:",
            f"Original description: {entry.desc1}",
            f"Mapped description: {entry.desc2}",
        ]
        if with_rationale and entry.rationale:
            lines.append(f"Reasoning: {entry.rationale}")
        lines.append(f"Level: {entry.level.value}")
        blocks.append("\n".join(lines))
    return "\n\n".join(blocks) + "\n\n"


def render_level_prompt(desc1: str, desc2: str, strategy: StrategyConfig) -> str:
    name = "level_predict_cot.txt" if strategy.kind == "cot" else "level_predict.txt"
    return _template(name).format(
        examples=_render_examples(strategy), desc1=desc1, desc2=desc2
    )


def parse_level(text: str, cot: bool = False) -> MappingLevel | None:
    """First standalone A/B/C token, or the last one for reason-first output."""
    tokens = _LEVEL_TOKEN_RE.findall(text)
    if not tokens:
        return None
    pick = tokens[-1] if cot else tokens[0]
    return MappingLevel(pick.upper())


def predict_level(
    desc1: str, desc2: str, strategy: StrategyConfig, provider, model_id: str = ""
) -> MappingLevel:
    """Grade one description pair; one re-prompt if no letter can be parsed."""
    if not desc1 or not desc2:
        raise ValueError("both descriptions must be non-empty")
    prompt = render_level_prompt(desc1, desc2, strategy)
    is_cot = strategy.kind == "cot"
    raw = provider.complete(
        user_request(prompt, temperature=strategy.temperature, model_id=model_id)
    )
    level = parse_level(raw, cot=is_cot)
    if level is not None:
        return level
    retry = ChatRequest(
        [
            ChatMessage("user", prompt),
            ChatMessage("assistant", raw),
            ChatMessage("user", "Answer with a single letter: A, B, or C."),
        ],
        temperature=strategy.temperature,
        model_id=model_id,
    )
    raw2 = provider.complete(retry)
    level = parse_level(raw2, cot=is_cot)
    if level is None:
        raise UnparseableLevel(raw2)
    return level


def explain(
    desc1: str,
    desc2: str,
    level: MappingLevel,
    provider,
    temperature: float = 0.2,
    model_id: str = "",
) -> str:
    """Free-text rationale for an already predicted level; retried once if the
    model answers with nothing."""
    prompt = _template("reasoning.txt").format(
        desc1=desc1,
        desc2=desc2,
        level=level.value,
        definition=LEVEL_DEFINITIONS[level],
    )
    for _ in range(2):
        text = provider.complete(
            user_request(prompt, temperature=temperature, model_id=model_id)
        ).strip()
        if text:
            return text
    raise EmptyReasoning()


def assess_pairs(
    pairs: list[tuple[LabeledCode, LabeledCode]],
    strategy: StrategyConfig,
    provider,
    model_id: str = "",
) -> tuple[list[Assessment], list[AssessmentFailure]]:
    """Predict then explain for each (queried, retrieved) pair, in order.
    Failures are collected so one bad pair does not sink the batch."""
    if not pairs:
        raise ValueError("assess_pairs needs at least one pair")
    assessments: list[Assessment] = []
    failures: list[AssessmentFailure] = []
    for index, (queried, retrieved) in enumerate(pairs):
        try:
            level = predict_level(
                queried.label, retrieved.label, strategy, provider, model_id
            )
            reasoning = explain(
                queried.label,
                retrieved.label,
                level,
                provider,
                strategy.temperature,
                model_id,
            )
        except OntoragError as exc:
            failures.append(
                AssessmentFailure(index, queried.label, retrieved.label, str(exc))
            )
            continue
        assessments.append(
            Assessment(
                queried_label=queried.label,
                retrieved_label=retrieved.label,
                queried_code=queried.code,
                retrieved_code=retrieved.code,
                level=level,
                reasoning=reasoning,
                model_id=model_id or getattr(provider, "model_id", ""),
                strategy=strategy.kind,
                temperature=strategy.temperature,
            )
        )
    return assessments, failures


def summarize(
    nlq: str,
    assessments: list[Assessment],
    provider,
    temperature: float = 0.2,
    model_id: str = "",
) -> str:
    """One final call that restates every pair, level, and reasoning."""
    if not assessments:
        raise ValueError("summarize needs at least one assessment")
    lines = []
    for a in assessments:
        q = f"{a.queried_label}" + (f" [{a.queried_code}]" if a.queried_code else "")
        r = f"{a.retrieved_label}" + (
            f" [{a.retrieved_code}]" if a.retrieved_code else ""
        )
        lines.append(
            f"- Queried: {q} | Retrieved: {r} | Level: {a.level.value} | "
            f"Reasoning: {a.reasoning}"
        )
    prompt = _template("summarize.txt").format(
        question=nlq, assessments="\n".join(lines)
    )
    return provider.complete(
        user_request(prompt, temperature=temperature, model_id=model_id)
    )


def direct_map(
    icd9_code: str, provider, temperature: float = 0.2, model_id: str = ""
) -> list[str]:
    """Ask for target codes with no graph context; extract every token shaped
    like an ICD-10-CM code, deduplicated and dot-stripped."""
    if not icd9_code:
        raise ValueError("code must be non-empty")
    prompt = _template("direct_map.txt").format(code=icd9_code)
    raw = provider.complete(
        user_request(prompt, temperature=temperature, model_id=model_id)
    )
    out: list[str] = []
    for token in _ICD10_TOKEN_RE.findall(raw):
        code = normalize_code(token)
        if code not in out:
            out.append(code)
    return out
