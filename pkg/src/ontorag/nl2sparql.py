"""Natural-language question to validated SPARQL.

The loop per attempt: render the prompt (with corrective context from the
previous attempt on retries), complete, extract the query from the response,
parse, validate against the store schema. It stops at the first clean query
or raises once the attempt cap is hit, keeping a full trace either way.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources

from ontorag.errors import IoError, OntoragError
from ontorag.llm import user_request
from ontorag.store.engine import QuadStore, ResultTable, SchemaSummary
from ontorag.store.sparql import SparqlSyntax, UnsupportedFeature, parse_sparql
from ontorag.store.validate import validate_query

DEFAULT_MAX_ATTEMPTS = 5

DEFAULT_INSTRUCTIONS = (
    "You translate questions about medical code systems into SPARQL queries "
    "over the quad store described below. Use only the SELECT or ASK forms, "
    "GRAPH clauses, triple patterns, FILTER with =, CONTAINS or REGEX, "
    "DISTINCT, and LIMIT. Use only graph names and predicates from the "
    "listing. Output the SPARQL query and nothing else."
)

_FENCED_RE = re.compile(r"```[A-Za-z]*\s*\n(.*?)```", re.DOTALL)
_QUERY_START_RE = re.compile(r"\b(PREFIX|SELECT|ASK)\b", re.IGNORECASE)


class NoQueryFound(OntoragError):
    def __init__(self):
        super().__init__("no SPARQL query found in the response")


class ExhaustedAttempts(OntoragError):
    def __init__(self, trace: "GenerationTrace"):
        self.trace = trace
        super().__init__(
            f"no valid query after {len(trace.attempts)} attempts"
        )


@dataclass
class QueryExample:
    nlq: str
    sparql: str


@dataclass
class Attempt:
    raw_response: str
    extracted_sparql: str | None
    parse_outcome: str  # "ok" or the failure message
    validation_issues: list[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return self.parse_outcome == "ok" and not self.validation_issues

    def to_json(self) -> dict:
        return {
            "raw_response": self.raw_response,
            "extracted_sparql": self.extracted_sparql,
            "parse_outcome": self.parse_outcome,
            "validation_issues": list(self.validation_issues),
        }


@dataclass
class GenerationTrace:
    attempts: list[Attempt] = field(default_factory=list)
    final_sparql: str | None = None
    succeeded: bool = False
    execution_error: str | None = None

    def to_json(self) -> dict:
        return {
            "attempts": [a.to_json() for a in self.attempts],
            "final_sparql": self.final_sparql,
            "succeeded": self.succeeded,
            "execution_error": self.execution_error,
        }


@dataclass
class Nl2SparqlConfig:
    max_attempts: int = DEFAULT_MAX_ATTEMPTS
    feedback_on_retry: bool = True
    temperature: float = 0.2
    max_tokens: int = 800
    check_literals: bool = False
    instructions: str = DEFAULT_INSTRUCTIONS


def load_template() -> str:
    return (
        resources.files("ontorag.data.templates")
        .joinpath("nl2sparql.txt")
        .read_text(encoding="utf-8")
    )


def load_example_bank(path: str | None = None) -> list[QueryExample]:
    """Question/query pairs shipped with the package, or a caller-supplied
    JSON file of the same shape."""
    if path is None:
        text = (
            resources.files("ontorag.data.banks")
            .joinpath("nl2sparql_examples.json")
            .read_text(encoding="utf-8")
        )
    else:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise IoError(path, str(exc)) from exc
    data = json.loads(text)
    examples = [QueryExample(e["nlq"], e["sparql"]) for e in data["examples"]]
    if not examples:
        raise ValueError("example bank is empty")
    return examples


def render_schema(schema: SchemaSummary) -> str:
    """Deterministic graph/predicate listing for the prompt."""
    lines = []
    for graph in sorted(schema.graphs):
        lines.append(f"- graph <{graph}> with predicates:")
        for pred in sorted(schema.predicates_by_graph.get(graph, frozenset())):
            lines.append(f"    <{pred}>")
    return "\n".join(lines) if lines else "- (store is empty)"


def build_prompt(
    nlq: str,
    schema: SchemaSummary,
    example_bank: list[QueryExample],
    instructions: str = DEFAULT_INSTRUCTIONS,
) -> str:
    """Instructions, graph listing, and examples in fixed order, with the
    question last."""
    if not example_bank:
        raise ValueError("example bank must not be empty")
    example_text = "\n\n".join(
        f"NLQ: {ex.nlq}\nSPARQL: {ex.sparql}" for ex in example_bank
    )
    return load_template().format(
        instructions=instructions,
        graph_sources=render_schema(schema),
        examples=example_text,
        input=nlq,
    )


def extract_sparql(llm_text: str) -> str:
    """Pull the query out of a chatty response: first fenced code block if
    present, otherwise from the first PREFIX/SELECT/ASK keyword to the end."""
    fenced = _FENCED_RE.search(llm_text)
    if fenced:
        return fenced.group(1).strip()
    started = _QUERY_START_RE.search(llm_text)
    if started:
        return llm_text[started.start():].strip()
    raise NoQueryFound()


def _corrective_context(attempt: Attempt) -> str:
    lines = ["", "Your previous query was rejected."]
    if attempt.extracted_sparql:
        lines.append("Previous query:")
        lines.append(attempt.extracted_sparql)
    else:
        lines.append("No query could be extracted from the previous response.")
    if attempt.parse_outcome != "ok":
        lines.append(f"Syntax problem: {attempt.parse_outcome}")
    for issue in attempt.validation_issues:
        lines.append(f"Validation problem: {issue}")
    lines.append("Produce a corrected SPARQL query.")
    return "\n".join(lines)


def generate(
    nlq: str,
    schema: SchemaSummary,
    example_bank: list[QueryExample],
    provider,
    max_attempts: int | None = None,
    config: Nl2SparqlConfig | None = None,
) -> GenerationTrace:
    """Generate-extract-parse-validate with a bounded retry loop."""
    cfg = config or Nl2SparqlConfig()
    attempts_cap = max_attempts if max_attempts is not None else cfg.max_attempts
    if attempts_cap < 1:
        raise ValueError("max_attempts must be at least 1")

    base_prompt = build_prompt(nlq, schema, example_bank, cfg.instructions)
    trace = GenerationTrace()
    prompt = base_prompt
    for _ in range(attempts_cap):
        try:
            raw = provider.complete(
                user_request(
                    prompt,
                    temperature=cfg.temperature,
                    max_tokens=cfg.max_tokens,
                    model_id=getattr(provider, "model_id", ""),
                )
            )
        except OntoragError as exc:
            exc.trace = trace  # expose the partial trace to callers
            raise
        attempt = _evaluate_response(raw, schema, cfg.check_literals)
        trace.attempts.append(attempt)
        if attempt.clean:
            trace.final_sparql = attempt.extracted_sparql
            trace.succeeded = True
            return trace
        prompt = base_prompt
        if cfg.feedback_on_retry:
            prompt = base_prompt + "\n" + _corrective_context(attempt)
    raise ExhaustedAttempts(trace)


def _evaluate_response(raw: str, schema: SchemaSummary, check_literals: bool) -> Attempt:
    try:
        sparql = extract_sparql(raw)
    except NoQueryFound as exc:
        return Attempt(raw, None, str(exc))
    try:
        ast = parse_sparql(sparql)
    except (SparqlSyntax, UnsupportedFeature) as exc:
        return Attempt(raw, sparql, str(exc))
    report = validate_query(ast, schema, check_literals=check_literals)
    return Attempt(raw, sparql, "ok", report.messages())


@dataclass
class AnswerResult:
    sparql: str
    result: ResultTable
    trace: GenerationTrace

    def to_json(self) -> dict:
        return {
            "sparql": self.sparql,
            "result": self.result.to_json(),
            "trace": self.trace.to_json(),
        }


def answer(
    nlq: str,
    store: QuadStore,
    provider,
    config: Nl2SparqlConfig | None = None,
    example_bank: list[QueryExample] | None = None,
) -> AnswerResult:
    """Generate a validated query for the question and execute it."""
    cfg = config or Nl2SparqlConfig()
    bank = example_bank if example_bank is not None else load_example_bank()
    schema = store.introspect()
    trace = generate(nlq, schema, bank, provider, cfg.max_attempts, cfg)
    assert trace.final_sparql is not None
    try:
        table = store.execute(parse_sparql(trace.final_sparql))
    except OntoragError as exc:
        trace.execution_error = str(exc)
        table = ResultTable(columns=[], rows=[])
    return AnswerResult(trace.final_sparql, table, trace)
