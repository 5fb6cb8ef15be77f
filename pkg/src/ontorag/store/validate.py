"""Existence checks for parsed queries against a schema snapshot.

Variables always validate; only constant graph IRIs, predicate IRIs, and
subject/object IRIs are checked. Literal constants are checked only when
check_literals is set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ontorag.store.engine import SchemaSummary
from ontorag.store.sparql import QueryAst, Var
from ontorag.store.terms import Blank, Iri, Literal


@dataclass
class ValidationIssue:
    kind: str  # "unknown-graph" | "unknown-predicate" | "unknown-term"
    value: str
    graph: str | None = None

    def __str__(self) -> str:
        if self.kind == "unknown-graph":
            return f"unknown graph <{self.value}>"
        where = f" in graph <{self.graph}>" if self.graph else " in any graph"
        if self.kind == "unknown-predicate":
            return f"unknown predicate <{self.value}>{where}"
        return f"unknown term {self.value}{where}"


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def messages(self) -> list[str]:
        return [str(issue) for issue in self.issues]


def validate_query(
    ast: QueryAst, schema: SchemaSummary, check_literals: bool = False
) -> ValidationReport:
    report = ValidationReport()
    for group in ast.groups:
        scoped: list[str]
        if isinstance(group.graph, Iri):
            if group.graph.value not in schema.graphs:
                report.issues.append(
                    ValidationIssue("unknown-graph", group.graph.value)
                )
                # nothing inside an unknown graph can resolve; skip the noise
                continue
            scoped = [group.graph.value]
        else:
            scoped = sorted(schema.graphs)
        scope_label = scoped[0] if len(scoped) == 1 else None
        for tp in group.triples:
            if isinstance(tp.p, Iri):
                known = any(
                    tp.p.value in schema.predicates_by_graph.get(g, frozenset())
                    for g in scoped
                )
                if not known:
                    report.issues.append(
                        ValidationIssue("unknown-predicate", tp.p.value, scope_label)
                    )
            for part in (tp.s, tp.o):
                if isinstance(part, (Var, Blank)):
                    continue
                if isinstance(part, Literal) and not check_literals:
                    continue
                if not any(schema.term_exists(part, g) for g in scoped):
                    shown = (
                        f"<{part.value}>"
                        if isinstance(part, Iri)
                        else f'"{part.lexical}"'
                    )
                    report.issues.append(
                        ValidationIssue("unknown-term", shown, scope_label)
                    )
    return report
